"""Implementation of the subcommands.

Commands return the exit status of the run: 0 on success and 2 when the
result is infinite or a requested check fails. Errors raise
:class:`~sparsemf.error.SmfError`, see :mod:`sparsemf.__main__`.
"""

from __future__ import annotations
from itertools import zip_longest
from math import ceil
from pathlib import Path
from shutil import get_terminal_size
from textwrap import TextWrapper
import logging
import math
import sys
import time
import typing

import loam.tools

from . import conf, __version__
from . import dynamics, ensembles, gdpp, magnitude, measures, outputs
from .config import CONFIG_FILE, CONFIG_LOCAL
from .datatypes import RunManifest, SolveDiagnostics, SolveResult
from .error import ScenarioError
from .hamiltonian import cost_rate, h1, hinf
from .parsers import (load_ensemble, parse_covector, parse_instance,
                      parse_measure, parse_scenario, parse_vector,
                      read_result)
from .solvers import solve, validate_optimum

if typing.TYPE_CHECKING:
    from typing import Any, Iterable, Mapping, Optional, Sequence, Tuple
    from .datatypes import Scenario

logger = logging.getLogger(__name__)


def _emit(data: Mapping[str, Any]) -> None:
    print(outputs.dumps(data), end='')


def _status(ok: bool) -> int:
    return 0 if ok else 2


def _scenario() -> Tuple[Path, Scenario]:
    """Scenario of conf.core, with the CLI overrides applied."""
    path = Path(conf.core.scenario)
    sc = parse_scenario(path)
    params = sc.solver
    if conf.core.seed is not None:
        params = params._replace(seed=conf.core.seed)
    if conf.core.restarts is not None:
        params = params._replace(restarts=conf.core.restarts)
    return path, sc._replace(solver=params)


def tolerances(sc: Optional[Scenario] = None) -> Mapping[str, float]:
    """Tolerance set in effect."""
    tols = dict(tol_u=dynamics.TOL_U, tol_residual=magnitude.TOL_RESIDUAL,
                tol_qp=magnitude.TOL_QP, tol_feas=ensembles.TOL_FEAS,
                tol_match=measures.TOL_MATCH, tol_cond=gdpp.TOL_COND,
                tol_dpp=gdpp.TOL_DPP)
    if sc is not None:
        tols['tol_target'] = sc.solver.tol_target
    return tols


def _manifest(out: Path, scenario: Path, sc: Scenario, start: float) -> None:
    if not conf.core.manifest:
        return
    manifest = RunManifest(
        scenario_hash=outputs.scenario_hash(scenario), seed=sc.solver.seed,
        version=__version__, wall_time=time.perf_counter() - start,
        tolerances=tolerances(sc))
    path = outputs.write_manifest(out, manifest)
    logger.info('manifest written to %s', path)


def psi_cmd() -> int:
    """Compute the control magnitude density.

    Other Parameters:
        conf.core
        conf.psi
    """
    _, sc = _scenario()
    point = parse_vector(conf.psi.x)
    vel = parse_vector(conf.psi.v)
    if point.size != sc.sys.d or vel.size != sc.sys.d:
        raise ScenarioError(conf.core.scenario, 'dynamics.d',
                            f'point and velocity need {sc.sys.d} coordinates')
    res = magnitude.psi(sc.sys, point, vel)
    _emit(dict(value=math.inf if res.value is None else res.value,
               control=res.control, residual=res.residual))
    return _status(res.finite)


def wasserstein_cmd() -> int:
    """Compute the Wasserstein distance between two measures.

    Other Parameters:
        conf.wasserstein
    """
    mu = parse_measure(Path(conf.wasserstein.mu))
    nu = parse_measure(Path(conf.wasserstein.nu))
    value, plan = measures.wasserstein(mu, nu, conf.wasserstein.p)
    _emit(dict(value=value, p=conf.wasserstein.p,
               plan=[list(entry) for entry in plan.coupling]))
    return 0


def simulate_cmd() -> int:
    """Integrate the prescribed controls of a scenario.

    Other Parameters:
        conf.core
        conf.simulate
    """
    start = time.perf_counter()
    path, sc = _scenario()
    if sc.simulation is None:
        raise ScenarioError(path, 'simulation', 'missing field')
    ens = ensembles.integrate(sc.sys, sc.mu0, sc.simulation.controls,
                              sc.simulation.grid, sc.offsets)
    report = ensembles.check_feasibility(ens, sc.budget.mode,
                                         sc.budget.alpha)
    out = Path(conf.simulate.out)
    outputs.save_ensemble(out, ens)
    if conf.simulate.dump_traj:
        outputs.dump_trajectory(
            Path(conf.simulate.dump_traj), ens,
            sc.sys if conf.simulate.recompute_psi else None)
    _manifest(out, path, sc, start)
    _emit(report._asdict())
    return _status(report.feasible)


def solve_cmd() -> int:
    """Solve the optimal control problem of a scenario.

    Other Parameters:
        conf.core
        conf.solve
    """
    start = time.perf_counter()
    path, sc = _scenario()
    res = solve(sc, strict=conf.solve.strict)
    out = Path(conf.solve.out)
    outputs.write_result(out, sc, res)
    outputs.save_ensemble(ensemble_path(out), res.ensemble)
    if conf.solve.dump_traj:
        outputs.dump_trajectory(Path(conf.solve.dump_traj), res.ensemble)
    _manifest(out, path, sc, start)
    logger.info('value %s at horizon %s', res.value, res.horizon)
    _emit(outputs.result_dict(sc, res))
    return _status(res.finite)


def ensemble_path(result: Path) -> Path:
    """Path of the ensemble saved alongside a result file."""
    return result.with_name(result.stem + '.ensemble.json')


def validate_cmd() -> int:
    """Check the dynamic programming principle along a solution.

    Other Parameters:
        conf.core
        conf.validate
    """
    _, sc = _scenario()
    result_file = Path(conf.validate.result)
    found = read_result(result_file)
    value = found.get('value')
    if not isinstance(value, (int, float)):
        raise ScenarioError(result_file, 'value', 'expected a number')
    if math.isinf(value):
        logger.warning('infinite value, nothing to validate')
        return 2
    ens = load_ensemble(ensemble_path(result_file))
    feas = ensembles.check_feasibility(ens, sc.budget.mode, sc.budget.alpha)
    res = SolveResult(
        value=float(value), ensemble=ens, horizon=ens.grid.t1,
        effort_total=float(found.get('effort_total', 0.)),
        terminal_cost=float(found.get('terminal_cost', 0.)),
        diagnostics=SolveDiagnostics(feasibility=feas,
                                     restarts=int(found.get('restarts', 0)),
                                     trace=()))
    report = validate_optimum(sc, res, conf.validate.samples)
    _emit(report._asdict())
    return _status(report.is_monotone)


def hamiltonian_cmd() -> int:
    """Evaluate the budgeted Hamiltonian at the initial measure.

    Other Parameters:
        conf.core
        conf.hamiltonian
    """
    _, sc = _scenario()
    cov_file = Path(conf.hamiltonian.covector)
    cov = parse_covector(cov_file)
    if cov.p.shape != (sc.mu0.size, sc.sys.d):
        raise ScenarioError(cov_file, 'p', f'covector of shape '
                            f'{cov.p.shape}, expected '
                            f'({sc.mu0.size}, {sc.sys.d})')
    if sc.cost.kind == 'terminal_w2_plus_effort':
        h_mu = 0.
    else:
        h_mu = cost_rate(sc.cost, sc.mu0, sc.target, sc.solver.tol_target)
    if conf.hamiltonian.mode == 'linf':
        alpha = (sc.budget.alpha if conf.hamiltonian.alpha is None
                 else conf.hamiltonian.alpha)
        value, sel = hinf(sc.sys, sc.mu0, cov, alpha, h_mu)
    else:
        alpha = None
        value, sel = h1(sc.sys, sc.mu0, cov, h_mu)
    _emit(dict(value=value, mode=conf.hamiltonian.mode, alpha=alpha,
               h_mu=h_mu, controls=sel.controls, velocities=sel.velocities,
               effort=sel.effort(sc.mu0)))
    return 0


def _trajectory(inst: gdpp.GeneralizedInstance, origin: str,
                path: str) -> gdpp.GeneralizedTrajectory:
    """Trajectory from ``state[:sigma],...``.

    A missing sigma is the cheapest transition from the origin, the first
    entry defaults to a zero-cost standstill.
    """
    gamma, sigma = [], []
    for item in path.split(','):
        state, _, label = item.strip().partition(':')
        if not label:
            options = sorted((tr.cost, tr.sigma)
                             for tr in inst.successors(origin)
                             if tr.target == state)
            if not options:
                raise ScenarioError('--path', state, 'not reachable from '
                                    f'{origin}')
            label = options[0][1]
        gamma.append(state)
        sigma.append(label)
    return gdpp.GeneralizedTrajectory(gamma, sigma).validated(inst)


def dpp_check_cmd() -> int:
    """Check the dynamic programming principle on a finite instance.

    Other Parameters:
        conf.dpp
    """
    inst_file = Path(conf.dpp.instance)
    inst = parse_instance(inst_file)
    origin = inst.states[0] if conf.dpp.origin is None else conf.dpp.origin
    if origin not in inst.states:
        raise ScenarioError(inst_file, 'states', f'unknown state {origin!r}')
    value = gdpp.value(inst, origin)
    best = gdpp.optimal_transition(inst, origin)
    dpp_ok = all(gdpp.check_dpp(inst, x) for x in inst.states)
    report = dict(
        origin=origin, value=value,
        brute_force=gdpp.brute_force_value(inst, origin),
        dpp_holds=dpp_ok,
        optimal_transition=None if best is None else best._asdict(),
        values={str(x): v for x, v in inst.values.items()})
    ok = dpp_ok and math.isfinite(value)
    if conf.dpp.path:
        traj = _trajectory(inst, origin, conf.dpp.path)
        hrep = gdpp.check_h_monotone(inst, traj)
        report['h'] = dict(hrep._asdict(), consistent=hrep.consistent)
        ok = ok and hrep.is_monotone and hrep.consistent
        if inst.has_standstill(traj.gamma[-1]):
            terminal = gdpp.check_terminal(inst, traj)
            report['terminal'] = dict(terminal._asdict(),
                                      holds=terminal.holds)
            ok = ok and terminal.holds
    _emit(report)
    return _status(ok)


def version_cmd() -> int:
    """Print sparsemf version.

    Use :data:`sparsemf.__version__` to obtain the version in a script.
    """
    print(f'sparsemf version: {__version__}')
    return 0


def report_parsing_problems(
        parsing_out: Tuple[Any, Sequence[Path], Sequence[Path]]) -> None:
    """Output message about potential parsing problems."""
    _, empty, faulty = parsing_out
    if CONFIG_FILE in empty or CONFIG_FILE in faulty:
        print('Unable to read global config file', CONFIG_FILE,
              file=sys.stderr)
        print('Please run sparsemf config --create',
              sep='\n', end='\n\n', file=sys.stderr)
    if CONFIG_LOCAL in faulty:
        print('Unable to read local config file', CONFIG_LOCAL,
              file=sys.stderr)
        print('Please run sparsemf config --create_local',
              sep='\n', end='\n\n', file=sys.stderr)


def _pretty_print(key_val: Sequence[Tuple[str, str]], sep: str = ': ',
                  min_col_width: int = 39,
                  text_width: Optional[int] = None) -> None:
    """Print a iterable of key/values.

    Args:
        key_val: the pairs of section names and text.
        sep: separator between section names and text.
        min_col_width: minimal acceptable column width
        text_width: text width to use. If set to None, will try to infer the
            size of the terminal.
    """
    if text_width is None:
        text_width = get_terminal_size().columns
    if text_width < min_col_width:
        min_col_width = text_width
    ncols = (text_width + 1) // (min_col_width + 1)
    colw = (text_width + 1) // ncols - 1
    ncols = min(ncols, len(key_val))

    wrapper = TextWrapper(width=colw)
    lines = []
    for key, val in key_val:
        if len(key) + len(sep) >= colw // 2:
            wrapper.subsequent_indent = ' '
        else:
            wrapper.subsequent_indent = ' ' * (len(key) + len(sep))
        lines.extend(wrapper.wrap(f'{key}{sep}{val}'))

    chunks = []
    for rem_col in range(ncols, 1, -1):
        isep = ceil(len(lines) / rem_col)
        while isep < len(lines) and lines[isep][0] == ' ':
            isep += 1
        chunks.append(lines[:isep])
        lines = lines[isep:]
    chunks.append(lines)
    full_lines = zip_longest(*chunks, fillvalue='')

    fmt = '|'.join([f'{{:{colw}}}'] * (ncols - 1))
    fmt += '|{}' if ncols > 1 else '{}'
    print(*(fmt.format(*line) for line in full_lines), sep='\n')


def config_pp(subs: Iterable[str]) -> None:
    """Pretty print of configuration options.

    Args:
        subs: conf sections to print.
    """
    print('(c|f): available only as CLI argument/in the config file',
          end='\n\n')
    for sub in subs:
        hlp_lst = []
        for opt, meta in conf[sub].defaults_():
            if meta.cmd_arg ^ meta.conf_arg:
                opt += ' (c)' if meta.cmd_arg else ' (f)'
            hlp_lst.append((opt, meta.help))
        if hlp_lst:
            print(f'{sub}:')
            _pretty_print(hlp_lst, sep=' -- ',
                          text_width=min(get_terminal_size().columns, 100))
            print()


def config_cmd() -> int:
    """Configuration handling.

    Other Parameters:
        conf.config
    """
    if not (conf.common.config or conf.config.create or
            conf.config.create_local or conf.config.update or
            conf.config.edit):
        config_pp(conf.sections_())
    loam.tools.config_cmd_handler(conf)
    return 0
