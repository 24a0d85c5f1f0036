"""Desk-scale optimal control of discrete measures.

Controls are piecewise constant on a uniform grid, one control sequence per
particle. For a fixed number of steps, the inner problem is tackled by a
multi-start pattern search on the control array, every candidate being
projected on the control set and on the budget set of the scenario.
Minimum time problems bisect on the number of steps.
"""

from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from itertools import product
import logging
import math
import typing

import numpy as np

from . import gdpp
from .datatypes import (Budget, CostSpec, DPPReport, Scenario,
                        SolveDiagnostics, SolveResult)
from .ensembles import (TOL_FEAS, Ensemble, TimeGrid, check_feasibility,
                        integrate, restrict, rk4_positions)
from .error import HorizonExhausted, StateExplosion
from .magnitude import SV_CUTOFF, norm_minimal_controls
from .measures import DiscreteMeasure, target_distance, wasserstein
from ._helpers import rng, worker_count

if typing.TYPE_CHECKING:
    from typing import Callable, List, Optional, Tuple
    from numpy import ndarray
    from .datatypes import SolverParams

logger = logging.getLogger(__name__)

DELTA_MIN = 1e-3


class _Problem:
    """Fixed-grid inner problem of a scenario.

    Args:
        sc: the scenario.
        nsteps: number of grid cells.
        dt: time step.
        fixed: whether the final time is prescribed. Warm starts then reach
            the target at the final time instead of as soon as possible.
    """

    def __init__(self, sc: Scenario, nsteps: int, dt: float, fixed: bool):
        self.sc = sc
        self.nsteps = nsteps
        self.dt = dt
        self.fixed = fixed
        self.sys = sc.sys
        self.weights = np.array(sc.mu0.weights)
        self.offsets = initial_offsets(sc)
        self.shape = (sc.mu0.size, nsteps, sc.sys.m)

    def project(self, ctrl: ndarray) -> ndarray:
        """Project controls of shape (..., N, K, m) on U and the budget."""
        return project_budget(self.sys.control_set.project(ctrl),
                              self.weights, self.dt, self.sc.budget,
                              self.offsets)

    def positions(self, ctrl: ndarray) -> ndarray:
        """Curves of shape (B, N, K+1, d), not checked for overflow."""
        return rk4_positions(self.sys, self.sc.mu0.points, ctrl, self.dt,
                             check=False)

    def objective(self, ctrl: ndarray) -> ndarray:
        """Lexicographic objective (primary, secondary), shape (B, 2)."""
        pos = self.positions(ctrl)
        finite = np.all(np.isfinite(pos), axis=(1, 2, 3))
        vals = np.zeros((ctrl.shape[0], 2))
        kind = self.sc.cost.kind
        target = self.sc.target
        assert target is not None
        if kind == 'averaged_min_time':
            with np.errstate(invalid='ignore'):
                dist = target.set_distance(pos[:, :, :-1])
            outside = (dist > self.sc.solver.tol_target).astype(float)
            vals[:, 0] = self.dt * np.einsum('bnk,n->b', outside,
                                             self.weights)
            final = target.set_distance(pos[:, :, -1]).max(axis=1)
            vals[:, 1] = final + self.dt * np.einsum(
                'bnk,n->b', np.nan_to_num(dist), self.weights)
        else:
            vals[:, 0] = [self._terminal(pts) if ok else np.inf
                          for pts, ok in zip(pos[:, :, -1], finite)]
            if kind == 'terminal_w2_plus_effort':
                effort = self.dt * np.einsum(
                    'bnk,n->b', np.linalg.norm(ctrl, axis=-1), self.weights)
                vals[:, 0] = self.sc.cost.terminal_weight * vals[:, 0] + \
                    self.sc.cost.effort_weight * effort
        vals[~finite] = np.inf
        return vals

    def _terminal(self, points: ndarray) -> float:
        target = self.sc.target
        assert target is not None
        if target.is_set:
            return float(target.set_distance(points).max())
        return target_distance(DiscreteMeasure(points, self.weights), target)

    def success(self, val: ndarray) -> bool:
        """Whether a minimum time objective meets the target."""
        return bool(val[0] <= self.sc.solver.tol_target)


def initial_offsets(sc: Scenario) -> ndarray:
    """Initial per-curve efforts of a scenario."""
    if sc.offsets is not None:
        return np.asarray(sc.offsets, dtype=float).reshape(sc.mu0.size)
    return np.full(sc.mu0.size, sc.budget.omega0)


def project_budget(ctrl: ndarray, weights: ndarray, dt: float,
                   budget: Budget, offsets: ndarray) -> ndarray:
    """Scale controls of shape (..., N, K, m) into the budget set.

    L-infinity budgets rescale every cell whose instantaneous effort exceeds
    alpha, L1 budgets rescale the whole array to the remaining effort and
    Lagrangian budgets cut the tail of every curve once its effort reaches
    alpha.
    """
    norms = np.linalg.norm(ctrl, axis=-1)
    alpha = budget.alpha
    with np.errstate(divide='ignore', invalid='ignore'):
        if budget.mode == 'linf':
            theta = np.einsum('...nk,n->...k', norms, weights)
            scale = np.where(theta > alpha, alpha / theta, 1.)
            return ctrl * scale[..., np.newaxis, :, np.newaxis]
        if budget.mode == 'l1':
            total = dt * np.einsum('...nk,n->...', norms, weights)
            room = max(alpha - budget.omega0, 0.)
            scale = np.where(total > room, room / total, 1.)
            return ctrl * scale[..., np.newaxis, np.newaxis, np.newaxis]
        if budget.mode == 'lagrangian':
            before = offsets[:, np.newaxis] + dt * (
                np.cumsum(norms, axis=-1) - norms)
            allowed = np.maximum(alpha - before, 0.) / dt
            scale = np.where(norms > allowed, allowed / norms, 1.)
            return ctrl * scale[..., np.newaxis]
    raise ValueError(f'unknown budget mode {budget.mode!r}')


def _destinations(sc: Scenario) -> ndarray:
    """Point each particle is steered to by the warm start."""
    target = sc.target
    assert target is not None
    if target.is_set:
        return target.project(sc.mu0.points)
    best = min(target.family, key=lambda nu: wasserstein(sc.mu0, nu)[0])
    _, plan = wasserstein(sc.mu0, best)
    dest = np.zeros_like(sc.mu0.points)
    for i, j, mass in plan.coupling:
        dest[i] += mass * best.points[j]
    return dest / sc.mu0.weights[:, np.newaxis]


def warm_start(prob: _Problem) -> ndarray:
    """Closed-loop steering toward the target under the budget.

    Every particle aims at its destination with the norm-minimal control of
    the velocity that reaches it at the final time (fixed horizons) or
    within one step, projected on U and on what remains of the budget.
    """
    sys, dt = prob.sys, prob.dt
    dest = _destinations(prob.sc)
    pts = np.array(prob.sc.mu0.points)
    spent = prob.offsets.copy()
    ctrl = np.zeros(prob.shape)
    for k in range(prob.nsteps):
        tau = (prob.nsteps - k) * dt if prob.fixed else dt
        rhs = (dest - pts) / tau - sys.drift(pts)
        pinv = np.linalg.pinv(sys.matrix(pts), rcond=SV_CUTOFF)
        step = sys.control_set.project(np.einsum('nij,nj->ni', pinv, rhs))
        step = project_budget(step[:, np.newaxis], prob.weights, dt,
                              prob.sc.budget._replace(
                                  omega0=float(prob.weights @ spent)),
                              spent)[:, 0]
        ctrl[:, k] = step
        spent = spent + dt * np.linalg.norm(step, axis=1)
        pts = rk4_positions(sys, pts, step[:, np.newaxis], dt,
                            check=False)[:, -1]
        if not np.all(np.isfinite(pts)):
            break
    return ctrl


def _random_controls(prob: _Problem, gen: np.random.Generator) -> ndarray:
    uset = prob.sys.control_set
    if uset.kind == 'box':
        return gen.uniform(uset.lo, uset.hi, size=prob.shape)
    dirs = gen.normal(size=prob.shape)
    norms = np.linalg.norm(dirs, axis=-1, keepdims=True)
    mags = uset.radius * gen.uniform(size=prob.shape[:-1] + (1,))**(
        1 / max(prob.sys.m, 1))
    return dirs / np.maximum(norms, 1e-300) * mags


def _better(val: ndarray, ref: ndarray) -> bool:
    eps = 1e-15 * max(1., abs(float(ref[0]))) if np.isfinite(ref[0]) else 0.
    if val[0] < ref[0] - eps:
        return True
    return bool(val[0] <= ref[0] + eps and val[1] < ref[1] - 1e-15)


def _block_edges(nsteps: int, finest: int) -> List[ndarray]:
    edges = []
    nblocks = 1
    while True:
        count = min(nblocks, nsteps)
        edges.append(np.unique(np.linspace(0, nsteps, count + 1)
                               .round().astype(int)))
        if count >= min(finest, nsteps):
            break
        nblocks *= 2
    return edges


def pattern_search(prob: _Problem, start: ndarray,
                   stop: Optional[Callable[[ndarray], bool]] = None
                   ) -> Tuple[ndarray, ndarray, int]:
    """Coordinate perturbation descent over time blocks.

    Each sweep perturbs one control coordinate of one particle on one block
    of cells by +delta or -delta, for block partitions from the whole
    horizon down to the finest configured one. Delta starts at half the
    largest control norm and is halved after every sweep without progress.

    Args:
        prob: the inner problem.
        start: initial controls, projected before use.
        stop: predicate on the objective ending the search early.
    Returns:
        the best controls, their objective and the number of evaluations.
    """
    params = prob.sc.solver
    best = prob.project(start)
    best_val = prob.objective(best[np.newaxis])[0]
    evals = 1
    radius = prob.sys.control_set.r_max
    delta = 0.5 * radius
    nat, nsteps, ncomp = prob.shape
    partitions = _block_edges(nsteps, params.blocks) if nsteps else []
    while delta >= DELTA_MIN * radius and evals < params.max_evals:
        if stop is not None and stop(best_val):
            break
        improved = False
        for edges in partitions:
            moves = list(product(range(nat), range(edges.size - 1),
                                 range(ncomp), (1., -1.)))
            cands = np.repeat(best[np.newaxis], len(moves), axis=0)
            for c, (i, blk, j, sign) in enumerate(moves):
                cands[c, i, edges[blk]:edges[blk + 1], j] += sign * delta
            cands = prob.project(cands)
            vals = prob.objective(cands)
            evals += len(moves)
            pick = int(np.lexsort((vals[:, 1], vals[:, 0]))[0])
            if _better(vals[pick], best_val):
                best, best_val = cands[pick], vals[pick]
                improved = True
            if evals >= params.max_evals:
                break
        if not improved:
            delta /= 2
    return best, best_val, evals


def _run_restart(prob: _Problem, index: int,
                 stop: Optional[Callable[[ndarray], bool]]
                 ) -> Tuple[ndarray, ndarray]:
    params = prob.sc.solver
    if index == 0:
        start = warm_start(prob)
    elif index == 1:
        start = np.zeros(prob.shape)
    else:
        start = _random_controls(prob, rng(params.seed, index))
    ctrl, val, evals = pattern_search(prob, start, stop)
    logger.debug('restart %d on %d steps: objective %s after %d '
                 'evaluations', index, prob.nsteps, val, evals)
    return ctrl, val


def optimize(prob: _Problem,
             stop: Optional[Callable[[ndarray], bool]] = None
             ) -> Tuple[ndarray, ndarray, int]:
    """Multi-start search for the inner problem.

    The warm start runs first and ends the search when it satisfies stop.
    Remaining restarts run in a thread pool, the best objective wins with
    ties going to the lowest restart index.

    Returns:
        the best controls, their objective and the number of restarts used.
    """
    restarts = max(1, prob.sc.solver.restarts)
    first = _run_restart(prob, 0, stop)
    if restarts == 1 or (stop is not None and stop(first[1])):
        return first[0], first[1], 1
    with ThreadPoolExecutor(max_workers=worker_count()) as executor:
        others = list(executor.map(lambda idx: _run_restart(prob, idx, stop),
                                   range(1, restarts)))
    outcomes = [first] + others
    pick = min(range(restarts),
               key=lambda idx: (tuple(outcomes[idx][1]), idx))
    return outcomes[pick][0], outcomes[pick][1], restarts


def _ensemble(prob: _Problem, ctrl: ndarray) -> Ensemble:
    """Integrate the controls, replacing them by norm-minimal ones."""
    sc = prob.sc
    grid = TimeGrid(0., prob.dt, prob.nsteps)
    ens = integrate(sc.sys, sc.mu0, ctrl, grid, prob.offsets)
    if sc.sys.rank is None or sc.sys.rank >= sc.sys.m or not prob.nsteps:
        return ens
    canon = norm_minimal_controls(sc.sys, ens.positions[:, :-1], ctrl)
    return integrate(sc.sys, sc.mu0, prob.project(canon), grid,
                     prob.offsets)


def _result(sc: Scenario, ens: Ensemble, value: float, terminal: float,
            restarts: int, trace: List[Tuple[float, float]],
            exhausted: bool = False, residual: float = 0.,
            cross_check: Optional[bool] = None) -> SolveResult:
    feas = check_feasibility(ens, sc.budget.mode, sc.budget.alpha, TOL_FEAS)
    effort = float(ens.omega_series[-1] - ens.omega_series[0])
    diag = SolveDiagnostics(feasibility=feas, restarts=restarts,
                            trace=tuple(trace), cross_check=cross_check,
                            exhausted=exhausted, best_residual=residual)
    return SolveResult(value=value, ensemble=ens, horizon=ens.grid.t1,
                       effort_total=effort, terminal_cost=terminal,
                       diagnostics=diag)


def _step_range(params: SolverParams) -> Tuple[float, int, int]:
    dt = params.step
    if not dt > 0:
        raise ValueError(f'time step must be positive, got {dt}')
    k_lo = max(0, int(round(params.t_lo / dt)))
    k_hi = max(k_lo, int(math.ceil(params.t_hi / dt - 1e-9)))
    return dt, k_lo, k_hi


def _cross_check(sc: Scenario, value: float, dt: float) -> Optional[bool]:
    """Agreement with the finite-state model when a menu is given."""
    if not sc.solver.menu:
        return None
    try:
        inst = gdpp.wrap_measure_problem(sc)
    except StateExplosion as err:
        logger.warning('finite-state cross-check skipped: %s', err)
        return None
    ref = gdpp.value(inst, inst.states[0])
    if math.isinf(ref) or math.isinf(value):
        agree = math.isinf(ref) == math.isinf(value)
    else:
        agree = abs(ref - value) <= 2 * dt + 1e-9
    if not agree:
        logger.warning('solver value %s disagrees with the finite-state '
                       'value %s', value, ref)
    return agree


def _solve_min_time(sc: Scenario, strict: bool) -> SolveResult:
    if sc.cost.kind != 'min_time':
        raise ValueError(f'expected a min_time cost, got {sc.cost.kind!r}')
    if sc.target is None:
        raise ValueError('minimum time problems need a target')
    params = sc.solver
    dt, k_lo, k_hi = _step_range(params)
    trace: List[Tuple[float, float]] = []
    if target_distance(sc.mu0, sc.target) <= params.tol_target:
        prob = _Problem(sc, 0, dt, True)
        return _result(sc, _ensemble(prob, np.zeros(prob.shape)), 0., 0., 0,
                       trace, cross_check=_cross_check(sc, 0., dt))
    found = {}

    def attempt(nsteps: int) -> bool:
        prob = _Problem(sc, nsteps, dt, True)
        ctrl, val, used = optimize(prob, prob.success)
        trace.append((nsteps * dt, float(val[0])))
        found[nsteps] = (prob, ctrl, val, used)
        logger.debug('horizon %s: residual %s', nsteps * dt, val[0])
        return prob.success(val)

    if k_hi == 0 or not attempt(k_hi):
        residual = float(found[k_hi][2][0]) if k_hi in found else \
            target_distance(sc.mu0, sc.target)
        if strict:
            raise HorizonExhausted(params.t_hi, residual)
        logger.info('target not reached within horizon %s', params.t_hi)
        prob = found[k_hi][0] if k_hi in found else _Problem(sc, 0, dt, True)
        ctrl = found[k_hi][1] if k_hi in found else np.zeros(prob.shape)
        used = found[k_hi][3] if k_hi in found else 0
        return _result(sc, _ensemble(prob, ctrl), math.inf, 0., used, trace,
                       exhausted=True, residual=residual,
                       cross_check=_cross_check(sc, math.inf, dt))
    lo, hi = k_lo, k_hi
    if k_lo > 0 and attempt(k_lo):
        hi = k_lo
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if attempt(mid):
                hi = mid
            else:
                lo = mid
    prob, ctrl, val, used = found[hi]
    ens = _ensemble(prob, ctrl)
    residual = target_distance(ens.marginal(hi), sc.target)
    if residual > params.tol_target:
        ens = integrate(sc.sys, sc.mu0, ctrl, ens.grid, prob.offsets)
        residual = float(val[0])
    value = hi * dt
    logger.info('minimum time %s found with %d restarts', value, used)
    return _result(sc, ens, value, 0., used, trace, residual=residual,
                   cross_check=_cross_check(sc, value, dt))


def solve_min_time(sc: Scenario, strict: bool = False) -> SolveResult:
    """Minimum time to reach the target under the scenario budget.

    The horizon is bisected on the grid of step dt within [t_lo, t_hi]; at
    each horizon the target distance is minimized by :func:`optimize`.

    Args:
        sc: scenario with a ``min_time`` cost.
        strict: raise instead of returning an infinite value when t_hi
            fails.
    Raises:
        HorizonExhausted: in strict mode, with the best residual at t_hi.
    """
    return _solve_min_time(sc, strict)


def solve_min_time_l1(sc: Scenario, strict: bool = False) -> SolveResult:
    """Minimum time under a cumulative effort budget.

    The value is infinite when reaching the target needs more effort than
    alpha - omega0, in particular once omega0 = alpha only the drift moves
    the particles.
    """
    if sc.budget.mode != 'l1':
        raise ValueError(f'expected an l1 budget, got {sc.budget.mode!r}')
    if not 0 <= sc.budget.omega0 <= sc.budget.alpha + TOL_FEAS:
        raise ValueError('initial effort must lie in [0, alpha]')
    return _solve_min_time(sc, strict)


def _averaged_cost(prob: _Problem, ens: Ensemble) -> Tuple[float, int]:
    """Integrated mass outside S and the first step with all mass in S."""
    target = prob.sc.target
    assert target is not None
    outside = (target.set_distance(ens.positions) >
               prob.sc.solver.tol_target).astype(float)
    mass = ens.weights @ outside
    inside = np.nonzero(mass == 0)[0]
    if not inside.size:
        return math.inf, ens.grid.steps
    entry = int(inside[0])
    return prob.dt * float(mass[:entry].sum()), entry


def solve_averaged_min_time(sc: Scenario,
                            strict: bool = False) -> SolveResult:
    """Minimize the time integral of the mass outside the target set.

    Mass contributes dt w_i for every cell it starts outside S, until all
    the mass lies in S. The horizon is free up to t_hi.

    Raises:
        HorizonExhausted: in strict mode, when some mass is still outside S
            at t_hi.
    """
    if sc.cost.kind != 'averaged_min_time':
        raise ValueError(f'expected an averaged_min_time cost, '
                         f'got {sc.cost.kind!r}')
    if sc.target is None or not sc.target.is_set:
        raise ValueError('averaged minimum time needs a target set')
    dt, _, k_hi = _step_range(sc.solver)
    prob = _Problem(sc, k_hi, dt, False)
    if target_distance(sc.mu0, sc.target) <= sc.solver.tol_target:
        prob = _Problem(sc, 0, dt, False)
        return _result(sc, _ensemble(prob, np.zeros(prob.shape)), 0., 0., 0,
                       [], cross_check=_cross_check(sc, 0., dt))
    ctrl, val, used = optimize(prob)
    ens = _ensemble(prob, ctrl)
    value, entry = _averaged_cost(prob, ens)
    trace = [(k_hi * dt, float(val[0]))]
    if math.isinf(value):
        residual = target_distance(ens.marginal(k_hi), sc.target)
        if strict:
            raise HorizonExhausted(sc.solver.t_hi, residual)
        return _result(sc, ens, value, 0., used, trace, exhausted=True,
                       residual=residual,
                       cross_check=_cross_check(sc, value, dt))
    return _result(sc, restrict(ens, 0, entry), value, 0., used, trace,
                   cross_check=_cross_check(sc, value, dt))


def solve_advertising(sc: Scenario) -> SolveResult:
    """Minimize integrated effort plus terminal distance to a target family.

    The objective is effort_weight dt sum_k theta(k) + terminal_weight
    min_j W2(mu_T, theta_j) on the fixed horizon of the cost. The best
    ensemble found is always returned.
    """
    cost = sc.cost
    if cost.kind != 'terminal_w2_plus_effort' or cost.horizon is None:
        raise ValueError('expected a terminal_w2_plus_effort cost with a '
                         'horizon')
    if sc.target is None:
        raise ValueError('terminal cost problems need a target family')
    dt = sc.solver.dt if sc.solver.dt is not None else 1e-2 * cost.horizon
    nsteps = max(1, int(round(cost.horizon / dt)))
    prob = _Problem(sc, nsteps, dt, True)
    ctrl, val, used = optimize(prob)
    ens = _ensemble(prob, ctrl)
    terminal = target_distance(ens.marginal(nsteps), sc.target)
    effort = float(ens.omega_series[-1] - ens.omega_series[0])
    value = cost.effort_weight * effort + cost.terminal_weight * terminal
    logger.info('campaign cost %s: effort %s, terminal %s', value, effort,
                terminal)
    return _result(sc, ens, value, terminal, used,
                   [(nsteps * dt, float(val[0]))], residual=terminal)


def solve(sc: Scenario, strict: bool = False) -> SolveResult:
    """Dispatch a scenario to the solver matching its cost."""
    kind = sc.cost.kind
    if kind == 'min_time':
        if sc.budget.mode == 'l1':
            return solve_min_time_l1(sc, strict)
        return solve_min_time(sc, strict)
    if kind == 'averaged_min_time':
        return solve_averaged_min_time(sc, strict)
    if kind == 'terminal_w2_plus_effort':
        return solve_advertising(sc)
    raise ValueError(f'unknown cost {kind!r}')


def _elapsed_cost(sc: Scenario, ens: Ensemble, k: int) -> float:
    """Running cost spent on the first k cells."""
    dt = ens.grid.dt
    kind = sc.cost.kind
    if kind == 'min_time':
        return k * dt
    if kind == 'averaged_min_time':
        target = sc.target
        assert target is not None
        outside = (target.set_distance(ens.positions[:, :k]) >
                   sc.solver.tol_target).astype(float)
        return dt * float((ens.weights @ outside).sum())
    return sc.cost.effort_weight * dt * float(ens.theta_series[:k].sum())


def _subscenario(sc: Scenario, ens: Ensemble, k: int) -> Scenario:
    """Scenario restarting from the state reached at grid index k."""
    dt = ens.grid.dt
    elapsed = k * dt
    zeta = ens.zeta[:, k]
    budget = sc.budget._replace(
        omega0=min(float(ens.omega_series[k]), sc.budget.alpha))
    cost: CostSpec = sc.cost
    if cost.horizon is not None and cost.kind == 'terminal_w2_plus_effort':
        cost = cost._replace(horizon=max(cost.horizon - elapsed, dt))
    solver = sc.solver._replace(
        dt=dt, t_lo=0., t_hi=max(sc.solver.t_hi - elapsed, dt))
    return sc._replace(mu0=ens.marginal(k), budget=budget, cost=cost,
                       solver=solver, offsets=zeta, simulation=None)


def validate_optimum(sc: Scenario, res: SolveResult,
                     samples: int = 5) -> DPPReport:
    """Check the dynamic programming principle along a computed optimum.

    At sampled grid indices k, including both ends, the problem is solved
    again from the state reached by the ensemble, and h(k) = c(0 -> t_k) +
    V(mu_k) must be nondecreasing, and constant when the ensemble is
    optimal, within max(2 dt, 1e-3 value).

    Args:
        sc: the scenario that was solved.
        res: a result with a finite value.
        samples: number of interior sample times.
    """
    if not res.finite:
        raise ValueError('cannot validate an infinite value')
    ens = res.ensemble
    nsteps = ens.grid.steps
    tol = max(2 * ens.grid.dt, 1e-3 * abs(res.value))
    if nsteps == 0:
        return DPPReport(times=(ens.grid.t0,), values=(res.value,),
                         tolerance=tol, is_monotone=True, is_constant=True,
                         max_decrease=0.)
    idx = sorted({int(round(j * nsteps / (samples + 1)))
                  for j in range(samples + 2)})
    values = []
    for k in idx:
        if k == nsteps and sc.cost.kind == 'terminal_w2_plus_effort':
            assert sc.target is not None
            remaining = sc.cost.terminal_weight * target_distance(
                ens.marginal(k), sc.target)
        else:
            remaining = solve(_subscenario(sc, ens, k)).value
        values.append(_elapsed_cost(sc, ens, k) + remaining)
        logger.debug('h(%s) = %s', ens.grid.times[k], values[-1])
    drops = [a - b for a, b in zip(values, values[1:])]
    max_drop = max([0.] + drops)
    finite = all(math.isfinite(val) for val in values)
    return DPPReport(
        times=tuple(float(ens.grid.times[k]) for k in idx),
        values=tuple(values), tolerance=tol,
        is_monotone=finite and max_drop <= tol,
        is_constant=finite and max(values) - min(values) <= tol,
        max_decrease=max_drop)
