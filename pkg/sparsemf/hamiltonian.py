"""Feasible initial velocities and Hamiltonians at discrete measures.

With g_i = A(x_i)^T p_i, the inner problem of the L-infinity Hamiltonian is
a budgeted allocation of control magnitude across particles: on a ball
control set it is a fractional knapsack solved exactly by a greedy fill in
decreasing order of |g_i|. Box control sets are handled by dualizing the
budget. The L1 Hamiltonian has no budget coupling and separates into
per-particle threshold problems.
"""

from __future__ import annotations
import typing

import numpy as np

from .ensembles import TOL_FEAS
from .magnitude import TOL_RESIDUAL, psi
from ._helpers import rng

if typing.TYPE_CHECKING:
    from typing import Optional, Tuple
    from numpy import ndarray
    from numpy.typing import ArrayLike
    from .datatypes import CostSpec
    from .dynamics import ControlSystem
    from .measures import DiscreteMeasure, TargetSpec

TOL_LAMBDA = 1e-8
BOX_STARTS = 64
PG_MAX_ITER = 500


class Covector(typing.NamedTuple):
    """Element of the cotangent space at a discrete measure.

    Attributes:
        p: per-particle vectors, shape (N, d).
        p_omega: dual variable of the cumulative effort, used by
            :func:`h1`.
    """

    p: ndarray
    p_omega: float = 0.

    @classmethod
    def of(cls, p: ArrayLike, p_omega: float = 0.) -> Covector:
        """Covector from nested sequences."""
        arr = np.array(p, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, np.newaxis]
        if p_omega < 0:
            raise ValueError(f'p_omega must be nonnegative, got {p_omega}')
        return cls(arr, float(p_omega))


class VelocitySelection(typing.NamedTuple):
    """Per-particle velocities with the controls realizing them.

    Attributes:
        velocities: shape (N, d).
        controls: shape (N, m).
    """

    velocities: ndarray
    controls: ndarray

    @classmethod
    def from_controls(cls, sys: ControlSystem, mu: DiscreteMeasure,
                      controls: ArrayLike) -> VelocitySelection:
        """Selection driven by the given controls."""
        ctrl = np.array(controls, dtype=float).reshape(mu.size, sys.m)
        return cls(sys.velocity(mu.points, ctrl), ctrl)

    @classmethod
    def from_velocities(cls, sys: ControlSystem, mu: DiscreteMeasure,
                        velocities: ArrayLike) -> VelocitySelection:
        """Selection realized by norm-minimal controls.

        Raises:
            ValueError: if a velocity is not admissible.
        """
        vels = np.array(velocities, dtype=float).reshape(mu.size, sys.d)
        ctrl = np.zeros((mu.size, sys.m))
        for i, (pt, vel) in enumerate(zip(mu.points, vels)):
            res = psi(sys, pt, vel)
            if res.control is None:
                raise ValueError(f'velocity {vel.tolist()} is not '
                                 f'admissible at {pt.tolist()}')
            ctrl[i] = res.control
        return cls(vels, ctrl)

    def effort(self, mu: DiscreteMeasure) -> float:
        """Weighted control magnitude sum_i w_i |u_i|."""
        return float(mu.weights @ np.linalg.norm(self.controls, axis=1))


def _check_selection(sys: ControlSystem, mu: DiscreteMeasure,
                     sel: VelocitySelection) -> None:
    if sel.controls.shape != (mu.size, sys.m) or \
            sel.velocities.shape != (mu.size, sys.d):
        raise ValueError('selection does not match the measure')
    res = np.linalg.norm(sys.velocity(mu.points, sel.controls) -
                         sel.velocities, axis=1)
    if np.any(res > TOL_RESIDUAL):
        raise ValueError('controls do not realize the velocities')


def in_Zinf(sys: ControlSystem, mu: DiscreteMeasure, sel: VelocitySelection,
            alpha: float, tol: float = TOL_FEAS) -> bool:
    """Whether a selection is a feasible initial velocity in L-infinity mode.

    Controls must lie in U and the instantaneous effort must not exceed
    alpha.
    """
    _check_selection(sys, mu, sel)
    return sys.control_set.contains(sel.controls) and \
        sel.effort(mu) <= alpha + tol


def in_Z1(sys: ControlSystem, mu: DiscreteMeasure, sel: VelocitySelection,
          omega: float, alpha: float, tol: float = TOL_FEAS) -> bool:
    """Whether a selection is a feasible initial velocity in L1 mode.

    Any selection of F is feasible while effort remains, once the cumulative
    effort omega reaches alpha only the drift is.
    """
    _check_selection(sys, mu, sel)
    if not sys.control_set.contains(sel.controls):
        return False
    if omega < alpha - tol:
        return True
    drift = sys.drift(mu.points)
    return bool(np.all(np.linalg.norm(sel.velocities - drift, axis=1)
                       <= TOL_RESIDUAL))


def _sensitivities(sys: ControlSystem, mu: DiscreteMeasure,
                   cov: Covector) -> ndarray:
    """Vectors g_i = A(x_i)^T p_i, shape (N, m)."""
    if cov.p.shape != (mu.size, sys.d):
        raise ValueError(f'covector of shape {cov.p.shape} for {mu.size} '
                         f'particles in dimension {sys.d}')
    return np.einsum('nij,ni->nj', sys.matrix(mu.points), cov.p)


def _assemble(sys: ControlSystem, mu: DiscreteMeasure, cov: Covector,
              ctrl: ndarray, h_mu: float,
              p_omega: float = 0.) -> Tuple[float, VelocitySelection]:
    sel = VelocitySelection.from_controls(sys, mu, ctrl)
    inner = np.einsum('ni,ni->n', cov.p, sel.velocities)
    inner = inner + p_omega * np.linalg.norm(ctrl, axis=1)
    return h_mu + float(mu.weights @ inner), sel


def greedy_fill(gnorms: ndarray, weights: ndarray, radius: float,
                alpha: float) -> ndarray:
    """Fractional knapsack allocation of magnitudes t_i in [0, radius].

    Particles are filled to the radius in decreasing order of |g_i|, lower
    indices first among ties, until sum_i w_i t_i reaches alpha. Particles
    with g_i = 0 get nothing.
    """
    mags = np.zeros_like(gnorms)
    remaining = alpha
    for i in np.argsort(-gnorms, kind='stable'):
        if remaining <= 0 or gnorms[i] == 0:
            break
        mags[i] = min(radius, remaining / weights[i])
        remaining -= weights[i] * mags[i]
    return mags


def _boundary_starts(low: ndarray, high: ndarray, count: int) -> ndarray:
    """Points of the box boundary along count directions."""
    ndim = low.size
    if ndim == 1:
        return np.array([[low[0]], [high[0]]])
    if ndim == 2:
        angles = 2 * np.pi * np.arange(count) / count
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        dirs = rng(0, ndim).normal(size=(count, ndim))
    with np.errstate(divide='ignore', invalid='ignore'):
        reach = np.where(dirs > 0, high / dirs,
                         np.where(dirs < 0, low / dirs, np.inf))
    scale = reach.min(axis=1, keepdims=True)
    return dirs * np.where(np.isfinite(scale), scale, 0.)


def _box_inner(gvec: ndarray, lam: float, low: ndarray,
               high: ndarray) -> ndarray:
    """Minimize <g, u> + lam |u| over the box [low, high]."""
    if lam == 0:
        return np.where(gvec > 0, low, np.where(gvec < 0, high, 0.))
    if np.linalg.norm(gvec) <= lam:
        return np.zeros_like(gvec)

    def objective(u: ndarray) -> float:
        return float(gvec @ u + lam * np.linalg.norm(u))

    starts = list(_boundary_starts(low, high, BOX_STARTS))
    starts.append(np.where(gvec > 0, low, high))
    best, best_val = np.zeros_like(gvec), 0.
    for ctrl in starts:
        val = objective(ctrl)
        step = 1.
        for _ in range(PG_MAX_ITER):
            norm = np.linalg.norm(ctrl)
            grad = gvec + lam * ctrl / norm if norm > 0 else gvec
            while True:
                trial = np.clip(ctrl - step * grad, low, high)
                new_val = objective(trial)
                gap = trial - ctrl
                if new_val <= val - 1e-4 * (gap @ gap) / step or step < 1e-12:
                    break
                step /= 2
            if np.linalg.norm(gap) <= 1e-12 or new_val > val:
                break
            ctrl, val = trial, new_val
            step = min(2 * step, 1e6)
        if val < best_val:
            best, best_val = ctrl, val
    return best


def _box_controls(gvecs: ndarray, lam: float, low: ndarray,
                  high: ndarray) -> ndarray:
    return np.array([_box_inner(g, lam, low, high) for g in gvecs])


def hinf(sys: ControlSystem, mu: DiscreteMeasure, cov: Covector,
         alpha: float, h_mu: float) -> Tuple[float, VelocitySelection]:
    """L-infinity Hamiltonian h(mu) + min over Z_inf of sum_i w_i <p_i, v_i>.

    Args:
        sys: a validated control system.
        mu: the measure.
        cov: the covector, p_omega is ignored.
        alpha: the budget.
        h_mu: the running cost rate at mu, see :func:`cost_rate`.
    Returns:
        the value and a minimizing selection. Ball control sets are solved
        exactly. Box control sets dualize the budget with a bisection on its
        multiplier, up to ``TOL_LAMBDA``.
    """
    if alpha < 0:
        raise ValueError(f'budget must be nonnegative, got {alpha}')
    gvecs = _sensitivities(sys, mu, cov)
    gnorms = np.linalg.norm(gvecs, axis=1)
    uset = sys.control_set
    if uset.kind == 'ball':
        mags = greedy_fill(gnorms, mu.weights, uset.radius, alpha)
        with np.errstate(invalid='ignore', divide='ignore'):
            dirs = np.where(gnorms[:, np.newaxis] > 0,
                            gvecs / gnorms[:, np.newaxis], 0.)
        return _assemble(sys, mu, cov, -mags[:, np.newaxis] * dirs, h_mu)
    assert uset.lo is not None and uset.hi is not None

    def effort(ctrl: ndarray) -> float:
        return float(mu.weights @ np.linalg.norm(ctrl, axis=1))

    ctrl_lo = _box_controls(gvecs, 0., uset.lo, uset.hi)
    if effort(ctrl_lo) <= alpha + TOL_FEAS:
        return _assemble(sys, mu, cov, ctrl_lo, h_mu)
    lam_lo, lam_hi = 0., float(gnorms.max())
    ctrl_hi = np.zeros_like(ctrl_lo)
    while lam_hi - lam_lo > TOL_LAMBDA:
        lam = 0.5 * (lam_lo + lam_hi)
        ctrl = _box_controls(gvecs, lam, uset.lo, uset.hi)
        if effort(ctrl) > alpha:
            lam_lo, ctrl_lo = lam, ctrl
        else:
            lam_hi, ctrl_hi = lam, ctrl
    e_lo, e_hi = effort(ctrl_lo), effort(ctrl_hi)
    mix = (alpha - e_hi) / (e_lo - e_hi) if e_lo > e_hi else 0.
    return _assemble(sys, mu, cov, mix * ctrl_lo + (1 - mix) * ctrl_hi, h_mu)


def h1(sys: ControlSystem, mu: DiscreteMeasure, cov: Covector,
       h_mu: float) -> Tuple[float, VelocitySelection]:
    """L1 Hamiltonian, minimizing sum_i w_i (<p_i, v_i> + p_omega Psi).

    Each particle is either left uncontrolled, when |g_i| <= p_omega, or
    pushed at full magnitude against g_i.

    Returns:
        the value and a minimizing selection.
    """
    gvecs = _sensitivities(sys, mu, cov)
    gnorms = np.linalg.norm(gvecs, axis=1)
    uset = sys.control_set
    if uset.kind == 'ball':
        active = gnorms > cov.p_omega
        with np.errstate(invalid='ignore', divide='ignore'):
            ctrl = np.where(active[:, np.newaxis],
                            -uset.radius * gvecs / gnorms[:, np.newaxis], 0.)
    else:
        assert uset.lo is not None and uset.hi is not None
        ctrl = _box_controls(gvecs, cov.p_omega, uset.lo, uset.hi)
    return _assemble(sys, mu, cov, ctrl, h_mu, cov.p_omega)


def cost_rate(cost: CostSpec, mu: DiscreteMeasure,
              target: Optional[TargetSpec] = None,
              tol: float = 1e-9) -> float:
    """Running cost rate h(mu) of a time cost.

    1 for minimum time, the mass outside the target set for averaged
    minimum time.
    """
    if cost.kind == 'min_time':
        return 1.
    if cost.kind == 'averaged_min_time':
        if target is None or not target.is_set:
            raise ValueError('averaged minimum time needs a target set')
        outside = (target.set_distance(mu.points) > tol).astype(float)
        return float(mu.weights @ outside)
    raise ValueError(f'{cost.kind!r} costs have no time rate')
