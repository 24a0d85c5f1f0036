"""Discrete representations of admissible trajectories.

An :class:`Ensemble` stores one curve per particle of the initial measure on
a uniform time grid, the piecewise-constant controls steering it, and the
extended coordinate zeta accumulating the control effort spent by the curve.
"""

from __future__ import annotations
import typing

import numpy as np

from .datatypes import (BoundReport, FeasibilityReport, SuperpositionReport)
from .dynamics import TOL_GROWTH, TOL_U, eval_velocities
from .error import (ControlOutOfSet, EndpointMismatch, InvalidIndexError,
                    NonFiniteState)
from .magnitude import TOL_RESIDUAL, psi
from .measures import DiscreteMeasure, TOL_MATCH, moment
from ._helpers import CachedReadOnlyProperty as crop

if typing.TYPE_CHECKING:
    from typing import List, Optional, Tuple
    from numpy import ndarray
    from numpy.typing import ArrayLike
    from .dynamics import ControlSystem

TOL_FEAS = 1e-9
BUDGET_MODES = ('linf', 'l1', 'lagrangian')


class TimeGrid(typing.NamedTuple):
    """Uniform time grid t_k = t0 + k dt, k = 0..steps.

    Attributes:
        t0: initial time.
        dt: time step, positive.
        steps: number of cells, possibly zero.
    """

    t0: float
    dt: float
    steps: int

    @classmethod
    def from_bounds(cls, t0: float, t1: float, steps: int) -> TimeGrid:
        """Grid of [t0, t1] with the given number of cells."""
        if not t1 > t0:
            raise ValueError(f'empty time interval [{t0}, {t1}]')
        if steps < 1:
            raise ValueError(f'need at least one step, got {steps}')
        return cls(float(t0), (t1 - t0) / steps, int(steps))

    @property
    def t1(self) -> float:
        """Final time."""
        return self.t0 + self.steps * self.dt

    @property
    def times(self) -> ndarray:
        """The steps+1 grid times."""
        return self.t0 + self.dt * np.arange(self.steps + 1)


def rk4_positions(sys: ControlSystem, x0: ndarray, controls: ndarray,
                  dt: float, check: bool = True) -> ndarray:
    """Integrate x' = f(x, u) with piecewise-constant controls.

    Args:
        sys: the control system.
        x0: initial points, shape (..., d).
        controls: controls, shape (..., K, m) broadcasting against x0.
        dt: the time step.
        check: raise :class:`NonFiniteState` on overflow. Otherwise non
            finite states are propagated.
    Returns:
        positions of shape (..., K+1, d).
    """
    nsteps = controls.shape[-2]
    lead = np.broadcast_shapes(x0.shape[:-1], controls.shape[:-2])
    pos = np.empty(lead + (nsteps + 1, sys.d))
    pts = np.broadcast_to(x0, lead + (sys.d,)).astype(float)
    pos[..., 0, :] = pts
    with np.errstate(over='ignore', invalid='ignore'):
        for k in range(nsteps):
            ctrl = controls[..., k, :]
            k1 = eval_velocities(sys, pts, ctrl)
            k2 = eval_velocities(sys, pts + 0.5 * dt * k1, ctrl)
            k3 = eval_velocities(sys, pts + 0.5 * dt * k2, ctrl)
            k4 = eval_velocities(sys, pts + dt * k3, ctrl)
            pts = pts + dt * ((k1 + 2 * k2 + 2 * k3 + k4) / 6)
            if check and not np.all(np.isfinite(pts)):
                bad = np.nonzero(~np.all(np.isfinite(pts), axis=-1))
                raise NonFiniteState(k + 1, [int(i) for i in bad[-1]])
            pos[..., k + 1, :] = pts
    return pos


def effort_path(controls: ndarray, dt: float, offsets: ndarray) -> ndarray:
    """Cumulative per-curve effort zeta, shape (..., K+1)."""
    norms = np.linalg.norm(controls, axis=-1)
    zeta = np.empty(norms.shape[:-1] + (norms.shape[-1] + 1,))
    zeta[..., 0] = offsets
    zeta[..., 1:] = offsets[..., np.newaxis] + dt * np.cumsum(norms, axis=-1)
    return zeta


class Ensemble:
    """Discrete probabilistic representation of a trajectory.

    Instances are immutable, use :func:`integrate` to build one from
    controls.

    Args:
        grid: the time grid.
        positions: curves, shape (N, steps+1, d).
        zeta: cumulative efforts, shape (N, steps+1).
        weights: particle weights, shape (N,).
        controls: controls, shape (N, steps, m).
    """

    def __init__(self, grid: TimeGrid, positions: ArrayLike,
                 zeta: ArrayLike, weights: ArrayLike, controls: ArrayLike):
        self.grid = grid
        self.positions = np.array(positions, dtype=float)
        self.zeta = np.array(zeta, dtype=float)
        self.weights = np.array(weights, dtype=float)
        self.controls = np.array(controls, dtype=float)
        nat = self.weights.size
        if self.positions.shape[:2] != (nat, grid.steps + 1):
            raise ValueError(f'positions of shape {self.positions.shape} '
                             f'for {nat} particles and {grid.steps} steps')
        if self.zeta.shape != (nat, grid.steps + 1):
            raise ValueError(f'zeta of shape {self.zeta.shape}')
        if self.controls.shape[:2] != (nat, grid.steps):
            raise ValueError(f'controls of shape {self.controls.shape}')
        for arr in (self.positions, self.zeta, self.weights, self.controls):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        """Number of particles."""
        return self.weights.size

    @property
    def dim(self) -> int:
        """State dimension."""
        return self.positions.shape[2]

    @property
    def offsets(self) -> ndarray:
        """Initial per-curve efforts."""
        return self.zeta[:, 0]

    @crop
    def theta_series(self) -> ndarray:
        """Instantaneous effort on each cell, shape (steps,)."""
        return self.weights @ np.linalg.norm(self.controls, axis=2)

    @crop
    def omega_series(self) -> ndarray:
        """Cumulative effort at each grid time, shape (steps+1,)."""
        return self.weights @ self.zeta

    def marginal(self, k: int) -> DiscreteMeasure:
        """Time marginal at grid index k."""
        _check_index(k, self.grid.steps, 'grid index')
        return DiscreteMeasure(self.positions[:, k], self.weights)

    def __repr__(self) -> str:
        return (f'Ensemble(N={self.size}, d={self.dim}, '
                f'grid={self.grid!r})')


def _check_index(k: int, last: int, what: str) -> None:
    if not 0 <= k <= last:
        raise InvalidIndexError(k, f'{what} out of range [0, {last}]')


def integrate(sys: ControlSystem, mu0: DiscreteMeasure, controls: ArrayLike,
              grid: TimeGrid,
              init_offsets: Optional[ArrayLike] = None) -> Ensemble:
    """Integrate every particle of mu0 under its controls.

    Args:
        sys: the control system.
        mu0: the initial measure, N atoms.
        controls: controls of shape (N, steps, m).
        grid: the time grid.
        init_offsets: initial per-curve efforts, zero by default.
    Raises:
        ControlOutOfSet: if a control is farther than ``TOL_U`` from U.
        NonFiniteState: if a coordinate overflows.
    """
    ctrl = np.asarray(controls, dtype=float)
    expected = (mu0.size, grid.steps, sys.m)
    if ctrl.shape != expected:
        raise ValueError(f'controls of shape {ctrl.shape}, '
                         f'expected {expected}')
    if ctrl.size:
        dist = sys.control_set.distance(ctrl)
        if np.any(dist > TOL_U):
            worst = np.unravel_index(np.argmax(dist), dist.shape)
            raise ControlOutOfSet(ctrl[worst], float(dist[worst]))
    offsets = (np.zeros(mu0.size) if init_offsets is None
               else np.asarray(init_offsets, dtype=float).reshape(mu0.size))
    positions = rk4_positions(sys, mu0.points, ctrl, grid.dt)
    return Ensemble(grid, positions, effort_path(ctrl, grid.dt, offsets),
                    mu0.weights, ctrl)


def theta(ens: Ensemble, k: int, sys: Optional[ControlSystem] = None
          ) -> float:
    """Instantaneous effort on cell k.

    Args:
        ens: the ensemble.
        k: cell index in [0, steps-1].
        sys: when given, Psi is recomputed from the realized velocities
            instead of using the norms of the stored controls.
    """
    _check_index(k, ens.grid.steps - 1, 'cell index')
    if sys is None:
        return float(ens.theta_series[k])
    total = 0.
    for weight, pt, u in zip(ens.weights, ens.positions[:, k],
                             ens.controls[:, k]):
        res = psi(sys, pt, sys.velocity(pt, u))
        norm = float(np.linalg.norm(u))
        total += weight * (norm if res.value is None
                           else min(res.value, norm))
    return total


def omega(ens: Ensemble, k: int) -> float:
    """Cumulative effort at grid index k."""
    _check_index(k, ens.grid.steps, 'grid index')
    return float(ens.omega_series[k])


def check_feasibility(ens: Ensemble, mode: str, alpha: float,
                      tol: float = TOL_FEAS) -> FeasibilityReport:
    """Check a sparsity budget along an ensemble.

    Args:
        ens: the ensemble.
        mode: ``'linf'`` bounds the instantaneous effort, ``'l1'`` the final
            cumulative effort and ``'lagrangian'`` the effort of each curve.
        alpha: the budget level.
        tol: feasibility tolerance.
    """
    if alpha < 0:
        raise ValueError(f'budget must be nonnegative, got {alpha}')
    if mode == 'linf':
        series = ens.theta_series
        measured = float(series.max()) if series.size else 0.
        bad = np.nonzero(series > alpha + tol)[0]
    elif mode == 'l1':
        measured = float(ens.omega_series[-1])
        bad = np.array([ens.grid.steps] if measured > alpha + tol else [])
    elif mode == 'lagrangian':
        per_curve = ens.zeta.max(axis=1)
        measured = float(per_curve.max())
        bad = np.nonzero(per_curve > alpha + tol)[0]
    else:
        raise ValueError(f'unknown budget mode {mode!r}')
    return FeasibilityReport(feasible=bad.size == 0, mode=mode, alpha=alpha,
                             measured=measured, slack=alpha - measured,
                             violations=tuple(int(i) for i in bad))


def restrict(ens: Ensemble, k_lo: int, k_hi: int) -> Ensemble:
    """Restriction to the grid indices k_lo..k_hi.

    The efforts already spent become the initial offsets of the restricted
    ensemble.
    """
    _check_index(k_lo, ens.grid.steps, 'grid index')
    _check_index(k_hi, ens.grid.steps, 'grid index')
    if k_lo > k_hi:
        raise InvalidIndexError((k_lo, k_hi), 'reversed index range')
    grid = TimeGrid(ens.grid.t0 + k_lo * ens.grid.dt, ens.grid.dt,
                    k_hi - k_lo)
    return Ensemble(grid, ens.positions[:, k_lo:k_hi + 1],
                    ens.zeta[:, k_lo:k_hi + 1], ens.weights,
                    ens.controls[:, k_lo:k_hi])


def _endpoint_order(points: ndarray, weights: ndarray) -> ndarray:
    """Stable lexicographic order on (position, weight)."""
    keys = np.column_stack([points, weights])
    return np.lexsort(keys.T[::-1])


def _check_junction(a: Ensemble, b: Ensemble) -> None:
    scale = max(1., abs(a.grid.t1))
    if abs(a.grid.t1 - b.grid.t0) > 1e-12 * scale:
        raise EndpointMismatch(
            f'first ensemble ends at {a.grid.t1}, second starts at '
            f'{b.grid.t0}')
    if b.grid.steps and a.grid.steps and \
            abs(a.grid.dt - b.grid.dt) > 1e-12 * a.grid.dt:
        raise EndpointMismatch(
            f'time steps differ: {a.grid.dt} and {b.grid.dt}')


def _glue(a: Ensemble, b: Ensemble, pairs: List[Tuple[int, int]],
          weights: ndarray) -> Ensemble:
    i_a = np.array([i for i, _ in pairs], dtype=int)
    i_b = np.array([j for _, j in pairs], dtype=int)
    pos = np.concatenate([a.positions[i_a], b.positions[i_b, 1:]], axis=1)
    shift = a.zeta[i_a, -1] - b.zeta[i_b, 0]
    zeta = np.concatenate(
        [a.zeta[i_a], b.zeta[i_b, 1:] + shift[:, np.newaxis]], axis=1)
    ctrl = np.concatenate([a.controls[i_a], b.controls[i_b]], axis=1)
    dt = a.grid.dt if a.grid.steps else b.grid.dt
    grid = TimeGrid(a.grid.t0, dt, a.grid.steps + b.grid.steps)
    return Ensemble(grid, pos, zeta, weights, ctrl)


def _match_index(a: Ensemble, b: Ensemble,
                 tol: float) -> List[Tuple[int, int]]:
    """One to one pairs of curves after sorting endpoints."""
    if a.size != b.size:
        raise EndpointMismatch(
            f'{a.size} curves cannot be matched one to one with '
            f'{b.size} curves')
    ends = a.positions[:, -1]
    starts = b.positions[:, 0]
    ord_a = _endpoint_order(ends, a.weights)
    ord_b = _endpoint_order(starts, b.weights)
    pairs = []
    for i, j in zip(ord_a, ord_b):
        if np.any(np.abs(ends[i] - starts[j]) > tol) or \
                abs(a.weights[i] - b.weights[j]) > 1e-9:
            raise EndpointMismatch('unmatched endpoint',
                                   (ends[i].tolist(), a.weights[i]))
        pairs.append((int(i), int(j)))
    return sorted(pairs)


def _junction_groups(a: Ensemble, b: Ensemble, tol: float
                     ) -> List[Tuple[ndarray, List[int], List[int]]]:
    """Junction atoms with the curves of a ending and of b leaving there."""
    ends = a.positions[:, -1]
    starts = b.positions[:, 0]
    groups: List[Tuple[ndarray, List[int], List[int]]] = []
    for i in _endpoint_order(ends, a.weights):
        for atom, members, _ in groups:
            if np.all(np.abs(ends[i] - atom) <= tol):
                members.append(int(i))
                break
        else:
            groups.append((ends[i], [int(i)], []))
    for j in range(b.size):
        for atom, _, members in groups:
            if np.all(np.abs(starts[j] - atom) <= tol):
                members.append(j)
                break
        else:
            raise EndpointMismatch('unmatched endpoint',
                                   (starts[j].tolist(), b.weights[j]))
    return groups


def concatenate(a: Ensemble, b: Ensemble, mode: str = 'index',
                tol: float = TOL_MATCH) -> Ensemble:
    """Glue two ensembles at a common time.

    Args:
        a: ensemble on [t0, t1].
        b: ensemble on [t1, t2] whose initial marginal is the final marginal
            of a.
        mode: ``'index'`` matches curves one to one after sorting endpoints
            by (position, weight), keeping the particles of a. In
            ``'disintegrate'`` mode every curve of a ending at a junction
            atom is continued by every curve of b leaving it, with weight
            w_i w_j / W where W is the mass of the atom.
        tol: matching tolerance on positions.
    Raises:
        EndpointMismatch: when the junction marginals differ.
    """
    _check_junction(a, b)
    if mode == 'index':
        return _glue(a, b, _match_index(a, b, tol), a.weights)
    if mode != 'disintegrate':
        raise ValueError(f'unknown concatenation mode {mode!r}')
    pairs = []
    weights = []
    for atom, from_a, from_b in _junction_groups(a, b, tol):
        mass_a = a.weights[from_a].sum()
        mass_b = b.weights[from_b].sum() if from_b else 0.
        if abs(mass_a - mass_b) > 1e-9:
            raise EndpointMismatch('junction masses differ',
                                   (atom.tolist(), mass_a, mass_b))
        for i in sorted(from_a):
            for j in sorted(from_b):
                pairs.append((i, j))
                weights.append(a.weights[i] * b.weights[j] / mass_b)
    order = sorted(range(len(pairs)), key=lambda n: pairs[n])
    return _glue(a, b, [pairs[n] for n in order],
                 np.array([weights[n] for n in order]))


def check_moment_bounds(sys: ControlSystem, ens: Ensemble,
                        p: float = 2) -> BoundReport:
    """Check the displacement and moment estimates along an ensemble.

    Each curve must satisfy |x(t) - x(0)| <= D t exp(D t) (1 + |x(0)|), and
    m_p(mu_t) <= K (1 + m_p(mu_0)) with K = 2^(p-1) (1 + D T exp(D T))^p.

    Args:
        sys: a validated control system providing D.
        ens: the ensemble.
        p: moment order, p >= 1.
    """
    dconst = sys.growth_bound
    elapsed = ens.grid.times - ens.grid.t0
    horizon = float(elapsed[-1])
    start = ens.positions[:, :1]
    disp = np.linalg.norm(ens.positions - start, axis=2)
    bound = (dconst * elapsed * np.exp(dconst * elapsed))[np.newaxis] * \
        (1 + np.linalg.norm(start[:, 0], axis=1))[:, np.newaxis]
    bound = bound * (1 + TOL_GROWTH)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(disp > 0, disp / bound, 0.)
    kconst = 2**(p - 1) * (1 + dconst * horizon * np.exp(dconst * horizon))**p
    m0 = moment(ens.marginal(0), p)
    moments = np.array([moment(ens.marginal(k), p)
                        for k in range(ens.grid.steps + 1)])
    mratio = float(moments.max() / (kconst * (1 + m0) * (1 + TOL_GROWTH)))
    dratio = float(np.nanmax(ratios)) if ratios.size else 0.
    return BoundReport(holds=dratio <= 1 and mratio <= 1,
                       max_displacement_ratio=dratio,
                       max_moment_ratio=mratio,
                       constant_d=dconst, constant_k=float(kconst))


def check_superposition(sys: ControlSystem, ens: Ensemble,
                        tol: float = TOL_MATCH) -> SuperpositionReport:
    """Check that the averaged velocity at coincident atoms is admissible.

    At every cell, particles sharing a position are grouped and the weight
    average of their velocities must lie in F(x).
    """
    failures = []
    worst = 0.
    for k in range(ens.grid.steps):
        pts = ens.positions[:, k]
        vel = eval_velocities(sys, pts, ens.controls[:, k])
        done = np.zeros(ens.size, dtype=bool)
        for i in range(ens.size):
            if done[i]:
                continue
            group = np.all(np.abs(pts - pts[i]) <= tol, axis=1) & ~done
            done |= group
            wgt = ens.weights[group]
            mean_vel = wgt @ vel[group] / wgt.sum()
            res = psi(sys, pts[i], mean_vel)
            worst = max(worst, res.residual)
            if res.value is None:
                failures.append((k, i))
    return SuperpositionReport(holds=not failures and worst <= TOL_RESIDUAL,
                               max_residual=worst, failures=tuple(failures))


def initial_velocity_ensemble(sys: ControlSystem, mu0: DiscreteMeasure,
                              velocities: ArrayLike, grid: TimeGrid,
                              beta: float) -> Ensemble:
    """Ensemble leaving mu0 with prescribed velocities on a small budget.

    Particle i is driven by u_i r^k on cell k, where u_i is the norm-minimal
    control of the initial velocity v_i and r = 1 - theta0 dt / beta. The
    first cell realizes the initial velocities, the instantaneous effort
    never exceeds theta0 = sum_i w_i Psi(x_i, v_i), and the total effort is
    at most beta.

    Raises:
        ValueError: if a velocity is not admissible or theta0 dt > beta.
    """
    vels = np.asarray(velocities, dtype=float)
    if beta <= 0:
        raise ValueError(f'effort bound must be positive, got {beta}')
    ctrl0 = np.zeros((mu0.size, sys.m))
    for i, (pt, vel) in enumerate(zip(mu0.points, vels)):
        res = psi(sys, pt, vel)
        if res.control is None:
            raise ValueError(f'velocity {vel.tolist()} is not admissible '
                             f'at {pt.tolist()}')
        ctrl0[i] = res.control
    theta0 = float(mu0.weights @ np.linalg.norm(ctrl0, axis=1))
    if theta0 * grid.dt > beta:
        raise ValueError(f'first cell alone spends {theta0 * grid.dt}, '
                         f'more than {beta}')
    ratio = 1 - theta0 * grid.dt / beta if theta0 > 0 else 0.
    decay = ratio**np.arange(grid.steps)
    controls = ctrl0[:, np.newaxis, :] * decay[np.newaxis, :, np.newaxis]
    return integrate(sys, mu0, controls, grid)
