"""Generalized control systems and their dynamic programming principle.

A generalized control system is made of states, transitions between them
labelled by an identifier sigma, a transition cost c(x, y, sigma) >= 0 and
an exit cost c_f(y) >= 0. Only finitely many transitions are represented,
missing ones have an infinite cost. The concatenation (C1) and splitting
(C2) conditions are checked exhaustively when an instance is built.
"""

from __future__ import annotations
from itertools import product
from types import MappingProxyType
import heapq
import logging
import math
import typing

import numpy as np

from .datatypes import HReport, TerminalReport, Transition
from .ensembles import rk4_positions
from .error import (ConditionViolation, InvalidTrajectory, MissingSelfLoop,
                    StateExplosion)
from .measures import DiscreteMeasure, in_target
from ._helpers import CachedReadOnlyProperty as crop

if typing.TYPE_CHECKING:
    from typing import (Any, Dict, Hashable, Iterable, List, Mapping,
                        Optional, Sequence, Tuple)
    from numpy import ndarray
    from .datatypes import Scenario

logger = logging.getLogger(__name__)

TOL_COND = 1e-12
TOL_DPP = 1e-12
STAY = 'stay'
DECIMALS = 9


def _close(lhs: float, rhs: float, tol: float) -> bool:
    """Equality of extended reals within a relative tolerance."""
    if math.isinf(lhs) or math.isinf(rhs):
        return lhs == rhs
    return abs(lhs - rhs) <= tol * max(1., abs(lhs), abs(rhs))


class GeneralizedInstance:
    """Finite generalized control system.

    Args:
        states: the states, hashable and mutually comparable.
        transitions: (source, target, sigma, cost) entries. A key (source,
            target, sigma) may only appear once.
        exit_costs: exit cost of the states, states left out have an
            infinite exit cost.
        check: whether to check the C1 and C2 conditions.

    Raises:
        ConditionViolation: when C1 or C2 fails.
    """

    def __init__(self, states: Iterable[Hashable],
                 transitions: Iterable[Sequence[Any]],
                 exit_costs: Mapping[Hashable, float],
                 check: bool = True):
        self.states = tuple(states)
        self._index = {x: i for i, x in enumerate(self.states)}
        if len(self._index) != len(self.states):
            raise ValueError('duplicate states')
        trans = []
        costs: Dict[Tuple[Any, Any, str], float] = {}
        for entry in transitions:
            src, dst, sigma, cost = entry
            if src not in self._index or dst not in self._index:
                raise ValueError(f'transition {tuple(entry)} uses an '
                                 'unknown state')
            cost = float(cost)
            if not cost >= 0:
                raise ValueError(f'transition {tuple(entry)} has a negative '
                                 'cost')
            key = (src, dst, str(sigma))
            if key in costs:
                raise ValueError(f'duplicate transition {key}')
            costs[key] = cost
            trans.append(Transition(src, dst, str(sigma), cost))
        self.transitions = tuple(trans)
        self._costs = costs
        self._out: Dict[Any, List[Transition]] = {x: [] for x in self.states}
        for tr in trans:
            self._out[tr.source].append(tr)
        exits = {x: math.inf for x in self.states}
        for state, cost in exit_costs.items():
            if state not in self._index:
                raise ValueError(f'exit cost of unknown state {state!r}')
            if not float(cost) >= 0:
                raise ValueError(f'negative exit cost at {state!r}')
            exits[state] = float(cost)
        self.exit_costs: Mapping[Any, float] = MappingProxyType(exits)
        if check:
            self.check_conditions()

    @classmethod
    def with_standstill(cls, states: Iterable[Hashable],
                        transitions: Iterable[Sequence[Any]],
                        exit_costs: Mapping[Hashable, float],
                        check: bool = True) -> GeneralizedInstance:
        """Instance where every state also has a zero-cost ``stay`` loop."""
        states = tuple(states)
        trans = list(transitions)
        present = {(entry[0], entry[1], str(entry[2])) for entry in trans}
        for state in states:
            if (state, state, STAY) not in present:
                trans.append((state, state, STAY, 0.))
        return cls(states, trans, exit_costs, check)

    def __len__(self) -> int:
        return len(self.states)

    def cost(self, x: Hashable, y: Hashable, sigma: str) -> float:
        """Cost c(x, y, sigma), infinite for absent transitions."""
        return self._costs.get((x, y, str(sigma)), math.inf)

    def successors(self, x: Hashable) -> Tuple[Transition, ...]:
        """Finite-cost transitions leaving x."""
        return tuple(tr for tr in self._out[x] if math.isfinite(tr.cost))

    def has_standstill(self, x: Hashable) -> bool:
        """Whether x has a zero-cost transition to itself."""
        return any(tr.target == x and tr.cost == 0 for tr in self._out[x])

    @crop
    def cheapest(self) -> ndarray:
        """Matrix of the cheapest direct transition costs."""
        best = np.full((len(self.states),) * 2, np.inf)
        for tr in self.transitions:
            i, j = self._index[tr.source], self._index[tr.target]
            best[i, j] = min(best[i, j], tr.cost)
        return best

    def _cheapest_transition(self, i: int, j: int) -> Transition:
        src, dst = self.states[i], self.states[j]
        return min((tr for tr in self._out[src] if tr.target == dst),
                   key=lambda tr: (tr.cost, tr.sigma))

    def check_conditions(self, tol: float = TOL_COND) -> None:
        """Check C1 and C2 on every pair of transitions.

        C1 asks that x -> y -> z is never cheaper than the best direct x -> z,
        C2 that every transition x -> z splits through some y' at no extra
        cost. On the matrix B of cheapest costs, both amount to B being equal
        to its min-plus square wherever it is finite.

        Raises:
            ConditionViolation: with the offending transitions.
        """
        best = self.cheapest
        nstates = best.shape[0]
        square = np.full_like(best, np.inf)
        via = np.zeros(best.shape, dtype=int)
        for k in range(nstates):
            cand = best[:, k, np.newaxis] + best[np.newaxis, k, :]
            better = cand < square
            square[better] = cand[better]
            via[better] = k
        scale = tol * np.maximum(1., np.where(np.isfinite(best),
                                              np.abs(best), 1.))
        c1_bad = np.isfinite(square) & (best > square + scale)
        if np.any(c1_bad):
            i, j = (int(n) for n in np.argwhere(c1_bad)[0])
            k = int(via[i, j])
            raise ConditionViolation('C1', [
                self._cheapest_transition(i, k),
                self._cheapest_transition(k, j)])
        c2_bad = np.isfinite(best) & (square > best + scale)
        if np.any(c2_bad):
            i, j = (int(n) for n in np.argwhere(c2_bad)[0])
            raise ConditionViolation('C2', [self._cheapest_transition(i, j)])

    @crop
    def _solved(self) -> Tuple[Mapping[Any, float],
                               Mapping[Any, Optional[Transition]]]:
        """Value function and tie-broken optimal transitions."""
        values: Dict[Any, float] = {}
        argmin: Dict[Any, Optional[Transition]] = {}
        for x in self.states:
            best_val = math.inf
            best_tr = None
            for tr in sorted(self._out[x],
                             key=lambda tr: (tr.target, tr.sigma)):
                val = tr.cost + self.exit_costs[tr.target]
                if val < best_val:
                    best_val, best_tr = val, tr
            values[x] = best_val
            argmin[x] = best_tr
        # relaxation reaches its fixpoint at once on instances satisfying C1
        for sweep in range(len(self.states)):
            changed = False
            for tr in self.transitions:
                cand = tr.cost + values[tr.target]
                if cand < values[tr.source] - TOL_DPP * max(1., cand):
                    values[tr.source] = cand
                    changed = True
            if not changed:
                break
            logger.debug('relaxation sweep %d lowered the value function',
                         sweep)
        return MappingProxyType(values), MappingProxyType(argmin)

    @property
    def values(self) -> Mapping[Any, float]:
        """Value function on every state."""
        return self._solved[0]

    def __repr__(self) -> str:
        return (f'GeneralizedInstance({len(self.states)} states, '
                f'{len(self.transitions)} transitions)')


def value(inst: GeneralizedInstance, x: Hashable) -> float:
    """Value V(x), the infimum of c(x, y, sigma) + c_f(y).

    Returns ``math.inf`` when no target with finite exit cost is reachable.
    """
    return inst.values[x]


def optimal_transition(inst: GeneralizedInstance,
                       x: Hashable) -> Optional[Transition]:
    """Transition realizing V(x).

    Ties break toward the smallest (target, sigma). None when V(x) is
    infinite.
    """
    tr = inst._solved[1][x]
    if tr is None or math.isinf(inst.values[x]):
        return None
    return tr


def check_dpp(inst: GeneralizedInstance, x: Hashable,
              tol: float = TOL_DPP) -> bool:
    """Whether V(x) equals the infimum of c(x, y, sigma) + V(y)."""
    rhs = min((tr.cost + inst.values[tr.target]
               for tr in inst.successors(x)), default=math.inf)
    return _close(inst.values[x], rhs, tol)


def brute_force_value(inst: GeneralizedInstance, x: Hashable) -> float:
    """Value of x by enumeration of transition sequences.

    Sequences of at most len(inst) transitions are explored. A cycle through
    a state other than x can be cut without increasing the cost, so only
    sequences visiting every intermediate state once are followed.
    """
    best = math.inf

    def walk(state: Any, spent: float, visited: frozenset) -> None:
        nonlocal best
        for tr in inst.successors(state):
            total = spent + tr.cost
            if total >= best:
                continue
            best = min(best, total + inst.exit_costs[tr.target])
            if tr.target not in visited:
                walk(tr.target, total, visited | {tr.target})

    walk(x, 0., frozenset([x]))
    return best


class GeneralizedTrajectory:
    """Generalized trajectory on a finite totally ordered index grid.

    Args:
        gamma: the states gamma(t).
        sigma: the transition identifiers sigma(t), c(x, gamma(t), sigma(t))
            being the cost of reaching gamma(t) from the origin x.
        witnesses: identifiers sigma_{i->j} for index pairs i <= j. Missing
            pairs are looked up by :meth:`validated`.
        times: the index grid, strictly increasing, defaults to 0..n-1.
    """

    def __init__(self, gamma: Sequence[Hashable], sigma: Sequence[str],
                 witnesses: Optional[Mapping[Tuple[int, int], str]] = None,
                 times: Optional[Sequence[float]] = None):
        if not gamma or len(gamma) != len(sigma):
            raise ValueError('gamma and sigma must be nonempty and of '
                             'equal length')
        self.gamma = tuple(gamma)
        self.sigma = tuple(str(s) for s in sigma)
        self.times = (tuple(range(len(gamma))) if times is None
                      else tuple(times))
        if len(self.times) != len(self.gamma) or \
                any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError('times must be strictly increasing')
        self.witnesses: Mapping[Tuple[int, int], str] = MappingProxyType(
            dict(witnesses or {}))

    @property
    def origin(self) -> Any:
        """Initial state gamma(a)."""
        return self.gamma[0]

    def __len__(self) -> int:
        return len(self.gamma)

    def validated(self, inst: GeneralizedInstance,
                  tol: float = TOL_COND) -> GeneralizedTrajectory:
        """Check admissibility and record a witness for every index pair.

        Raises:
            InvalidTrajectory: on the first failed requirement.
        """
        orig = self.origin
        if inst.cost(orig, orig, self.sigma[0]) != 0:
            raise InvalidTrajectory(0, 'initial transition is not a '
                                    'zero-cost standstill')
        reach = [inst.cost(orig, y, s) for y, s in zip(self.gamma, self.sigma)]
        for i, cost in enumerate(reach):
            if math.isinf(cost):
                raise InvalidTrajectory(i, 'state not reached at finite cost')
        witnesses = dict(self.witnesses)
        for i, j in product(range(len(self)), repeat=2):
            if i > j:
                continue
            src, dst = self.gamma[i], self.gamma[j]
            if (i, j) in witnesses:
                candidates = [witnesses[i, j]]
            else:
                candidates = sorted(tr.sigma for tr in inst.successors(src)
                                    if tr.target == dst)
            for cand in candidates:
                split = reach[i] + inst.cost(src, dst, cand)
                if reach[j] >= split - tol * max(1., split):
                    witnesses[i, j] = cand
                    break
            else:
                raise InvalidTrajectory((i, j), 'no transition splits the '
                                        'trajectory')
        return GeneralizedTrajectory(self.gamma, self.sigma, witnesses,
                                     self.times)

    def __repr__(self) -> str:
        return f'GeneralizedTrajectory({self.gamma!r}, {self.sigma!r})'


def check_h_monotone(inst: GeneralizedInstance, traj: GeneralizedTrajectory,
                     tol: float = TOL_DPP) -> HReport:
    """Evaluate h(t) = c(x, gamma(t), sigma(t)) + V(gamma(t)).

    h is nondecreasing along any admissible trajectory and constant exactly
    when the trajectory is optimal.
    """
    orig = traj.origin
    vals = tuple(inst.cost(orig, y, s) + inst.values[y]
                 for y, s in zip(traj.gamma, traj.sigma))
    increases = tuple(i + 1 for i, (a, b) in enumerate(zip(vals, vals[1:]))
                      if not _close(a, b, tol) and b > a)
    decreases = any(not _close(a, b, tol) and b < a
                    for a, b in zip(vals, vals[1:]))
    constant = all(_close(vals[0], val, tol) for val in vals)
    optimal = all(_close(inst.values[orig], val, tol) for val in vals)
    return HReport(values=vals, is_monotone=not decreases,
                   is_constant=constant, is_optimal=optimal,
                   increases=increases)


def check_terminal(inst: GeneralizedInstance, traj: GeneralizedTrajectory,
                   tol: float = TOL_DPP) -> TerminalReport:
    """Check the statements about the final state of a trajectory.

    With gamma(b) the final state: V(gamma(b)) <= c_f(gamma(b)); optimality
    and V(gamma(b)) = c_f(gamma(b)) imply that gamma(b), sigma(b) realize
    V(gamma(a)); the latter implies optimality.

    Raises:
        MissingSelfLoop: if gamma(b) has no zero-cost standstill.
    """
    last = traj.gamma[-1]
    if not inst.has_standstill(last):
        raise MissingSelfLoop(last)
    v_end = inst.values[last]
    exit_cost = inst.exit_costs[last]
    optimal = check_h_monotone(inst, traj, tol).is_optimal
    attained = _close(inst.values[traj.origin],
                      inst.cost(traj.origin, last, traj.sigma[-1]) +
                      exit_cost, tol)
    equal = _close(v_end, exit_cost, tol)
    return TerminalReport(
        value_bound=v_end <= exit_cost or equal,
        strict=v_end < exit_cost and not equal,
        optimal=optimal,
        attained=attained,
        optimal_implies_attained=not (optimal and equal) or attained,
        attained_implies_optimal=not attained or optimal)


def _rounded(arr: ndarray) -> Tuple[float, ...]:
    return tuple(round(float(val), DECIMALS) + 0. for val in arr)


class _MeasureState(typing.NamedTuple):
    """Representative of a reachable discrete measure."""

    positions: ndarray
    zeta: ndarray
    omega: float


def _state_key(state: _MeasureState, weights: ndarray,
               mode: str) -> Tuple[Any, ...]:
    """Canonical hashable form: sorted atoms plus effort bookkeeping."""
    atoms = []
    for pos, wgt, spent in zip(state.positions, weights, state.zeta):
        atom: Tuple[Any, ...] = (_rounded(pos), round(float(wgt), DECIMALS))
        if mode == 'lagrangian':
            atom += (round(float(spent), DECIMALS) + 0.,)
        atoms.append(atom)
    omega = round(state.omega, DECIMALS) + 0. if mode == 'l1' else 0.
    return (tuple(sorted(atoms)), omega)


def _admissible(mode: str, alpha: float, state: _MeasureState,
                norms: ndarray, weights: ndarray, dt: float,
                tol: float) -> ndarray:
    """Mask of the joint controls allowed by the budget from state."""
    if mode == 'linf':
        return norms @ weights <= alpha + tol
    if mode == 'l1':
        return state.omega + dt * (norms @ weights) <= alpha + tol
    return np.all(state.zeta + dt * norms <= alpha + tol, axis=1)


def _running_cost(sc: Scenario, state: _MeasureState, dt: float) -> float:
    if sc.cost.kind != 'averaged_min_time':
        return dt
    assert sc.target is not None
    outside = (sc.target.set_distance(state.positions) >
               sc.solver.tol_target).astype(float)
    return dt * float(sc.mu0.weights @ outside)


def _shortest_words(order: List[Any],
                    edges: Mapping[Any, Mapping[Any, Tuple[float, str]]]
                    ) -> List[Tuple[Any, Any, str, float]]:
    """Cheapest control word between every pair of reachable states."""
    index = {key: i for i, key in enumerate(order)}
    transitions = []
    for src in order:
        transitions.append((src, src, STAY, 0.))
        done: Dict[Any, Tuple[float, str]] = {}
        heap: List[Tuple[float, str, int]] = [(0., '', index[src])]
        while heap:
            cost, word, i = heapq.heappop(heap)
            node = order[i]
            if node in done:
                continue
            done[node] = (cost, word)
            for dst, (step_cost, label) in sorted(
                    edges.get(node, {}).items(), key=lambda kv: index[kv[0]]):
                if dst not in done:
                    heapq.heappush(heap, (cost + step_cost,
                                          f'{word} {label}'.strip(),
                                          index[dst]))
        for dst, (cost, word) in done.items():
            if dst != src:
                transitions.append((src, dst, word, cost))
    return transitions


def wrap_measure_problem(sc: Scenario,
                         menu: Optional[Sequence[Sequence[float]]] = None,
                         steps: Optional[int] = None,
                         cap: Optional[int] = None) -> GeneralizedInstance:
    """Finite generalized system of a minimum time problem.

    Every particle picks its control in a finite menu at every step of
    length dt, subject to the scenario budget. States are the discrete
    measures reachable within the given number of steps (hashed atom lists
    with the effort bookkeeping of the budget mode), transitions are the
    cheapest control words between them. Costs are the elapsed time, or the
    time integral of the mass outside the target set for averaged minimum
    time problems. Exit costs vanish on the target and are infinite
    elsewhere.

    Args:
        sc: the scenario.
        menu: control menu, defaults to ``sc.solver.menu``.
        steps: number of steps explored, defaults to t_hi / dt.
        cap: cap on the number of states, defaults to
            ``sc.solver.state_cap``.
    Returns:
        the instance, whose first state is the initial measure.
    Raises:
        StateExplosion: when more than cap states are reachable.
    """
    menu = sc.solver.menu if menu is None else menu
    if not menu:
        raise ValueError('a finite control menu is needed')
    if sc.cost.kind not in ('min_time', 'averaged_min_time'):
        raise ValueError(f'no finite model for {sc.cost.kind!r} costs')
    if sc.target is None:
        raise ValueError('minimum time problems need a target')
    choices = np.array(menu, dtype=float).reshape(len(menu), sc.sys.m)
    if not sc.sys.control_set.contains(choices):
        raise ValueError('control menu leaves the control set')
    dt = sc.solver.step
    steps = (max(1, int(round(sc.solver.t_hi / dt))) if steps is None
             else steps)
    cap = sc.solver.state_cap if cap is None else cap
    mode = sc.budget.mode
    tol = sc.solver.tol_target
    weights = sc.mu0.weights
    joint = np.array(list(product(range(len(choices)),
                                  repeat=sc.mu0.size)), dtype=int)
    controls = choices[joint]
    norms = np.linalg.norm(controls, axis=2)
    labels = ['+'.join(str(c) for c in word) for word in joint]

    offsets = (np.full(sc.mu0.size, sc.budget.omega0) if sc.offsets is None
               else np.asarray(sc.offsets, dtype=float))
    start = _MeasureState(np.array(sc.mu0.points), offsets,
                          float(sc.budget.omega0))
    start_key = _state_key(start, weights, mode)
    reps = {start_key: start}
    order = [start_key]
    edges: Dict[Any, Dict[Any, Tuple[float, str]]] = {}
    frontier = [start_key]
    for _ in range(steps):
        nxt_frontier = []
        for key in frontier:
            state = reps[key]
            cost = _running_cost(sc, state, dt)
            ok = _admissible(mode, sc.budget.alpha, state, norms, weights,
                             dt, tol)
            new_pos = rk4_positions(sc.sys, state.positions[np.newaxis],
                                    controls[:, :, np.newaxis], dt,
                                    check=False)[:, :, 1]
            ok &= np.all(np.isfinite(new_pos), axis=(1, 2))
            out = edges.setdefault(key, {})
            for c in np.nonzero(ok)[0]:
                child = _MeasureState(
                    new_pos[c], state.zeta + dt * norms[c],
                    state.omega + dt * float(norms[c] @ weights))
                child_key = _state_key(child, weights, mode)
                if child_key not in reps:
                    reps[child_key] = child
                    order.append(child_key)
                    nxt_frontier.append(child_key)
                    if len(order) > cap:
                        raise StateExplosion(cap)
                if child_key not in out or \
                        (cost, labels[c]) < out[child_key]:
                    out[child_key] = (cost, labels[c])
        frontier = nxt_frontier
    logger.info('finite model: %d states reached in %d steps', len(order),
                steps)

    exits = {}
    for key in order:
        mu = DiscreteMeasure(reps[key].positions, weights)
        exits[key] = 0. if in_target(mu, sc.target, tol) else math.inf
    return GeneralizedInstance(order, _shortest_words(order, edges), exits)
