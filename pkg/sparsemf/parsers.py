"""Parsers of sparsemf input files.

Note:
    These functions check the structure of the files and the sanity of their
    content, and raise :class:`~sparsemf.error.ScenarioError` naming the
    offending field. Errors of the underlying constructors are reported the
    same way.
"""

from __future__ import annotations
from pathlib import Path
import json
import math
import typing

import numpy as np

from . import expr
from .datatypes import Budget, CostSpec, Scenario, Simulation, SolverParams
from .dynamics import ControlSet, ControlSystem, VectorField
from .ensembles import BUDGET_MODES, Ensemble, TimeGrid
from .error import ExprEvaluationError, ExprSyntaxError, ScenarioError
from .gdpp import GeneralizedInstance
from .hamiltonian import Covector
from .measures import DiscreteMeasure, TargetSpec

if typing.TYPE_CHECKING:
    from typing import Any, Callable, Dict, List, Mapping, Optional, Union
    from numpy import ndarray

COST_KINDS = ('min_time', 'averaged_min_time', 'terminal_w2_plus_effort')
_MISSING = object()


def load_json(path: Path) -> Any:
    """Read a JSON file.

    Raises:
        ScenarioError: if the file cannot be read, is empty or is not valid
            JSON. The line of syntax errors is reported.
    """
    try:
        text = path.read_text()
    except OSError as err:
        raise ScenarioError(path, '', err.strerror or str(err))
    if not text.strip():
        raise ScenarioError(path, '', 'empty file')
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(path, f'line {err.lineno}', err.msg)


class _Node:
    """A JSON object and its dotted path inside a file."""

    def __init__(self, file: Path, path: str, data: Any):
        self.file = file
        self.path = path
        if not isinstance(data, dict):
            raise self.error('', 'expected an object')
        self.data: Dict[str, Any] = data

    def _sub(self, key: Union[str, int]) -> str:
        if isinstance(key, int):
            return f'{self.path}[{key}]'
        return f'{self.path}.{key}' if self.path else key

    def error(self, key: Union[str, int], msg: str) -> ScenarioError:
        return ScenarioError(self.file, self._sub(key) if key != '' else
                             self.path, msg)

    def __contains__(self, key: str) -> bool:
        return self.data.get(key) is not None

    def get(self, key: str, default: Any = _MISSING) -> Any:
        val = self.data.get(key)
        if val is None:
            if default is _MISSING:
                raise self.error(key, 'missing field')
            return default
        return val

    def node(self, key: str) -> _Node:
        return _Node(self.file, self._sub(key), self.get(key))

    def nodes(self, key: str) -> List[_Node]:
        items = self.get(key)
        if not isinstance(items, list):
            raise self.error(key, 'expected a list')
        path = self._sub(key)
        return [_Node(self.file, f'{path}[{i}]', item)
                for i, item in enumerate(items)]

    def number(self, key: str, default: Any = _MISSING,
               kind: Callable[[Any], Any] = float) -> Any:
        if key not in self and default is not _MISSING:
            return default
        val = self.get(key)
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise self.error(key, f'expected a number, got {val!r}')
        if kind is int and val != int(val):
            raise self.error(key, f'expected an integer, got {val!r}')
        return kind(val)

    def array(self, key: str, ndim: int, default: Any = _MISSING) -> Any:
        if key not in self and default is not _MISSING:
            return default
        try:
            arr = np.array(self.get(key), dtype=float)
        except (TypeError, ValueError):
            raise self.error(key, 'expected a numeric array')
        if arr.ndim != ndim:
            raise self.error(key, f'expected {ndim} nested levels, '
                             f'got {arr.ndim}')
        return arr

    def choice(self, key: str, choices: typing.Sequence[str],
               default: Any = _MISSING) -> str:
        val = self.get(key, default)
        if val not in choices:
            raise self.error(key, f'{val!r} is not one of {list(choices)}')
        return val


def _measure(node: _Node, dim: Optional[int] = None) -> DiscreteMeasure:
    points = node.get('points')
    try:
        arr = np.array(points, dtype=float)
    except (TypeError, ValueError):
        raise node.error('points', 'expected a numeric array')
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2:
        raise node.error('points', 'expected a list of points')
    if dim is not None and arr.shape[1] != dim:
        raise node.error('points', f'points of dimension {arr.shape[1]}, '
                         f'expected {dim}')
    weights = node.array('weights', 1, None)
    try:
        return DiscreteMeasure(arr, weights)
    except ValueError as err:
        raise node.error('', str(err))


def parse_measure(path: Path) -> DiscreteMeasure:
    """Read a measure file.

    The file holds an object ``{"points": [[...], ...], "weights": [...]}``,
    weights being optional (uniform by default).
    """
    return _measure(_Node(path, '', load_json(path)))


def _field(node: _Node, dim: int) -> VectorField:
    kind = node.choice('kind', ('constant', 'linear', 'expr'))
    try:
        if kind == 'constant':
            field = VectorField.constant(node.array('value', 1))
        elif kind == 'linear':
            field = VectorField.linear(node.array('matrix', 2))
        else:
            comps = node.get('components')
            if not isinstance(comps, list) or \
                    not all(isinstance(c, str) for c in comps):
                raise node.error('components', 'expected a list of strings')
            field = VectorField.expression(comps, dim)
    except ExprSyntaxError as err:
        raise node.error('components', str(err))
    except ValueError as err:
        raise node.error('', str(err))
    if field.dim != dim:
        raise node.error('', f'field of dimension {field.dim}, '
                         f'expected {dim}')
    return field


def _control_set(node: _Node, m: int) -> ControlSet:
    kind = node.choice('kind', ('ball', 'box'))
    try:
        if kind == 'ball':
            uset = ControlSet.ball(m, node.number('radius'))
        else:
            uset = ControlSet.box(node.array('lo', 1), node.array('hi', 1))
    except ValueError as err:
        raise node.error('', str(err))
    if uset.m != m:
        raise node.error('', f'control set of dimension {uset.m}, '
                         f'expected {m}')
    return uset


def _system(node: _Node) -> ControlSystem:
    dim = node.number('d', kind=int)
    ncols = node.number('m', kind=int)
    if dim < 1 or ncols < 0:
        raise node.error('', 'need d >= 1 and m >= 0')
    drift = _field(node.node('f0'), dim)
    columns = [_field(col, dim) for col in node.nodes('columns')]
    if len(columns) != ncols:
        raise node.error('columns', f'{len(columns)} columns, '
                         f'expected {ncols}')
    uset = _control_set(node.node('control_set'), ncols)
    return ControlSystem(drift, columns, uset).validated()


def _budget(node: _Node) -> Budget:
    mode = node.choice('mode', BUDGET_MODES)
    alpha = node.number('alpha')
    omega0 = node.number('omega0', 0.)
    if not alpha >= 0:
        raise node.error('alpha', 'budget must be nonnegative')
    if not 0 <= omega0 <= alpha:
        raise node.error('omega0', f'initial effort {omega0} not in '
                         f'[0, {alpha}]')
    return Budget(mode, alpha, omega0)


def _target(node: _Node, dim: int) -> TargetSpec:
    kind = node.choice('kind', ('measures', 'box', 'ball'))
    try:
        if kind == 'measures':
            family = [_measure(sub, dim) for sub in node.nodes('family')]
            return TargetSpec.measures(family)
        if kind == 'box':
            target = TargetSpec.box(node.array('lo', 1), node.array('hi', 1))
            assert target.lo is not None
            size = target.lo.size
        else:
            target = TargetSpec.ball(node.array('center', 1),
                                     node.number('radius'))
            assert target.center is not None
            size = target.center.size
    except ValueError as err:
        raise node.error('', str(err))
    if size != dim:
        raise node.error('', f'target of dimension {size}, expected {dim}')
    return target


def _cost(node: Optional[_Node]) -> CostSpec:
    if node is None:
        return CostSpec('min_time')
    kind = node.choice('kind', COST_KINDS, 'min_time')
    horizon = node.number('horizon', None)
    if horizon is not None and not horizon > 0:
        raise node.error('horizon', 'horizon must be positive')
    if kind == 'terminal_w2_plus_effort' and horizon is None:
        raise node.error('horizon', 'terminal costs need a fixed horizon')
    return CostSpec(kind, horizon, node.number('effort_weight', 1.),
                    node.number('terminal_weight', 1.))


def _solver(node: Optional[_Node], m: int) -> SolverParams:
    if node is None:
        return SolverParams()
    dflt = SolverParams()
    menu = node.array('menu', 2, None)
    if menu is not None:
        if menu.shape[1] != m:
            raise node.error('menu', f'controls of dimension {menu.shape[1]}'
                             f', expected {m}')
        menu = tuple(tuple(float(v) for v in row) for row in menu)
    params = SolverParams(
        t_lo=node.number('t_lo', dflt.t_lo),
        t_hi=node.number('t_hi', dflt.t_hi),
        dt=node.number('dt', dflt.dt),
        restarts=node.number('restarts', dflt.restarts, int),
        seed=node.number('seed', dflt.seed, int),
        max_evals=node.number('max_evals', dflt.max_evals, int),
        blocks=node.number('blocks', dflt.blocks, int),
        tol_target=node.number('tol_target', dflt.tol_target),
        menu=menu,
        state_cap=node.number('state_cap', dflt.state_cap, int))
    if not (0 <= params.t_lo < params.t_hi and math.isfinite(params.t_hi)):
        raise node.error('t_hi', 'need 0 <= t_lo < t_hi < inf')
    if params.dt is not None and not params.dt > 0:
        raise node.error('dt', 'time step must be positive')
    if params.restarts < 1 or params.max_evals < 1 or params.blocks < 1:
        raise node.error('', 'restarts, max_evals and blocks must be '
                         'positive')
    return params


def _simulation(node: _Node, nparts: int, m: int) -> Simulation:
    steps = node.number('steps', kind=int)
    try:
        grid = TimeGrid.from_bounds(node.number('t0', 0.),
                                    node.number('t1'), steps)
    except ValueError as err:
        raise node.error('', str(err))
    try:
        ctrl = np.array(node.get('controls'), dtype=float)
    except (TypeError, ValueError):
        raise node.error('controls', 'expected a numeric array')
    if ctrl.ndim == 2:
        ctrl = np.repeat(ctrl[:, np.newaxis], steps, axis=1)
    if ctrl.shape != (nparts, steps, m):
        raise node.error('controls', f'controls of shape {ctrl.shape}, '
                         f'expected ({nparts}, {steps}, {m}) or '
                         f'({nparts}, {m})')
    return Simulation(grid, ctrl)


def parse_scenario(path: Path) -> Scenario:
    """Read and validate a scenario file.

    The dynamics are validated on the default probes, the budget, target and
    cost are checked for consistency with each other.

    Args:
        path: path of the scenario JSON file.
    Raises:
        ScenarioError: on malformed or inconsistent content.
        RankConditionError: if the sampled rank of A(x) varies.
    """
    root = _Node(path, '', load_json(path))
    sys = _system(root.node('dynamics'))
    initial = root.node('initial')
    mu0 = _measure(initial, sys.d)
    budget = _budget(root.node('budget'))
    cost = _cost(root.node('cost') if 'cost' in root else None)
    target = (_target(root.node('target'), sys.d) if 'target' in root
              else None)
    if cost.kind == 'terminal_w2_plus_effort':
        if target is None or target.is_set:
            raise root.error('target', 'terminal costs need a family of '
                             'target measures')
    elif cost.kind == 'averaged_min_time':
        if target is None or not target.is_set:
            raise root.error('target', 'averaged minimum time needs a box '
                             'or ball target')
    solver = _solver(root.node('solver') if 'solver' in root else None,
                     sys.m)
    simulation = (_simulation(root.node('simulation'), mu0.size, sys.m)
                  if 'simulation' in root else None)
    offsets = root.array('offsets', 1, None)
    if offsets is not None:
        if offsets.shape != (mu0.size,):
            raise root.error('offsets', f'{offsets.size} offsets for '
                             f'{mu0.size} particles')
        if np.any(offsets < 0) or np.any(offsets > budget.alpha):
            raise root.error('offsets', 'offsets must lie in [0, alpha]')
    return Scenario(sys, mu0, budget, target, cost, solver, simulation,
                    offsets)


def parse_instance(path: Path) -> GeneralizedInstance:
    """Read a generalized control system.

    The file holds ``{"states": [...], "transitions": [{"from", "to",
    "sigma", "cost"}, ...], "exit": {state: cost}}``. A cost given as the
    string ``"inf"`` is infinite. With ``"standstill": true``, a zero-cost
    ``stay`` loop is added to every state.

    Raises:
        ScenarioError: on malformed content.
        ConditionViolation: when C1 or C2 fails.
    """
    root = _Node(path, '', load_json(path))
    states = root.get('states')
    if not isinstance(states, list) or \
            not all(isinstance(s, str) for s in states):
        raise root.error('states', 'expected a list of strings')
    trans = []
    for node in root.nodes('transitions'):
        trans.append((node.get('from'), node.get('to'),
                      str(node.get('sigma')), _cost_value(node, 'cost')))
    exits = root.node('exit') if 'exit' in root else None
    exit_costs = ({} if exits is None else
                  {key: _cost_value(exits, key) for key in exits.data})
    build = (GeneralizedInstance.with_standstill
             if root.get('standstill', False) else GeneralizedInstance)
    try:
        return build(states, trans, exit_costs)
    except ValueError as err:
        raise root.error('', str(err))


def _cost_value(node: _Node, key: str) -> float:
    val = node.get(key)
    if isinstance(val, str) and val.strip().lstrip('+') in ('inf', 'Infinity'):
        return math.inf
    return node.number(key)


def parse_covector(path: Path) -> Covector:
    """Read a covector ``{"p": [[...], ...], "p_omega": ...}``."""
    root = _Node(path, '', load_json(path))
    try:
        return Covector.of(root.get('p'), root.number('p_omega', 0.))
    except ValueError as err:
        raise root.error('p', str(err))


def parse_vector(src: str) -> ndarray:
    """Parse a comma-separated list of floats such as ``"0,1"``.

    Each entry may be any constant expression, e.g. ``"1/3,-2"``.
    """
    vals = []
    for item in src.split(','):
        ast = expr.parse_expr(item)
        if expr.max_index(ast) > 0:
            raise ExprEvaluationError(item.strip(), 'not a constant')
        vals.append(float(expr.evaluate(ast, np.zeros(0))))
    return np.array(vals)


def load_ensemble(path: Path) -> Ensemble:
    """Read an ensemble saved by :func:`sparsemf.outputs.save_ensemble`."""
    root = _Node(path, '', load_json(path))
    grid = root.node('grid')
    try:
        return Ensemble(
            TimeGrid(grid.number('t0'), grid.number('dt'),
                     grid.number('steps', kind=int)),
            positions=root.get('positions'), zeta=root.get('zeta'),
            weights=root.get('weights'), controls=root.get('controls'))
    except ValueError as err:
        raise root.error('', str(err))


def read_result(path: Path) -> Mapping[str, Any]:
    """Read a result file written by :func:`sparsemf.outputs.write_result`.

    The ``"+inf"`` marker is turned back into ``math.inf``.
    """
    root = _Node(path, '', load_json(path))
    out = dict(root.data)
    for key, val in out.items():
        if val == '+inf':
            out[key] = math.inf
    return out
