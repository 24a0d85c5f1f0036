"""Control magnitude density.

Psi(x, v) is the smallest norm of a control u in U with f(x, u) = v. The
unconstrained minimizer is given by the Moore-Penrose pseudo-inverse of A(x),
which is exact for ball control sets. Box control sets need a small convex
program, solved here through its dual.
"""

from __future__ import annotations
import logging
import typing
import warnings

import numpy as np
from scipy.optimize import lsq_linear

from .datatypes import PsiResult
from .dynamics import TOL_U
from .error import NotValidatedError, RankDeficiencyWarning

if typing.TYPE_CHECKING:
    from typing import List, Optional, Tuple
    from numpy import ndarray
    from numpy.typing import ArrayLike
    from .dynamics import ControlSystem
    from .measures import DiscreteMeasure

logger = logging.getLogger(__name__)

TOL_RESIDUAL = 1e-7
TOL_QP = 1e-9
SV_CUTOFF = 1e-10
QP_MAX_ITER = 10000


def pinv_solve(mat: ndarray, rhs: ndarray) -> Tuple[ndarray, int]:
    """Minimum norm least squares solution through a truncated SVD.

    Args:
        mat: matrix of shape (d, m).
        rhs: vector of shape (d,).
    Returns:
        the solution and the number of singular values kept.
    """
    nrows, ncols = mat.shape
    if 0 in (nrows, ncols):
        return np.zeros(ncols), 0
    usv_u, sing, usv_vt = np.linalg.svd(mat, full_matrices=False)
    if sing[0] == 0:
        return np.zeros(ncols), 0
    rank = int(np.sum(sing > SV_CUTOFF * sing[0]))
    if rank < min(nrows, ncols):
        warnings.warn(
            f'singular value cutoff keeps {rank} of {min(nrows, ncols)} '
            'directions', RankDeficiencyWarning, stacklevel=3)
    coefs = (usv_u[:, :rank].T @ rhs) / sing[:rank]
    return usv_vt[:rank].T @ coefs, rank


def _box_min_norm(mat: ndarray, rhs: ndarray, low: ndarray,
                  high: ndarray) -> ndarray:
    """Min-norm u in [low, high] with A u = b by dual gradient ascent.

    The dual function of min |u|^2/2 s.t. A u = b, u in box is concave and
    smooth, its maximizer lam gives u = clip(A^T lam).
    """
    def primal(lam: ndarray) -> ndarray:
        return np.clip(mat.T @ lam, low, high)

    def dual(lam: ndarray) -> Tuple[float, ndarray]:
        ctrl = primal(lam)
        gap = mat @ ctrl - rhs
        return 0.5 * ctrl @ ctrl - lam @ gap, -gap

    lam = np.zeros(rhs.size)
    step = 1. / max(np.linalg.norm(mat, 2)**2, 1e-300)
    val, grad = dual(lam)
    for _ in range(QP_MAX_ITER):
        if np.linalg.norm(grad) <= 0.1 * TOL_RESIDUAL:
            break
        trial = step
        while True:
            new_lam = lam + trial * grad
            new_val, new_grad = dual(new_lam)
            if new_val >= val + 0.5 * trial * grad @ grad or trial < 1e-16:
                break
            trial /= 2
        converged = abs(new_val - val) <= TOL_QP * max(1., abs(val))
        lam, val, grad = new_lam, new_val, new_grad
        step = min(2 * trial, 1e6)
        if converged and np.linalg.norm(grad) <= TOL_RESIDUAL:
            break
    return primal(lam)


def psi(sys: ControlSystem, x: ArrayLike, v: ArrayLike) -> PsiResult:
    """Control magnitude density Psi(x, v) and a norm-minimal control.

    Args:
        sys: a validated control system.
        x: the point, shape (d,).
        v: the velocity, shape (d,).
    Returns:
        the value (None when v is not an admissible velocity at x), the
        realizing control and the residual.
    Raises:
        NotValidatedError: if sys was not validated.
    """
    if not sys.is_validated:
        raise NotValidatedError('psi')
    pts = np.asarray(x, dtype=float)
    rhs = np.asarray(v, dtype=float) - sys.drift(pts)
    mat = sys.matrix(pts)
    ctrl, _ = pinv_solve(mat, rhs)
    residual = float(np.linalg.norm(mat @ ctrl - rhs))
    if residual > TOL_RESIDUAL:
        return PsiResult(None, None, residual)
    uset = sys.control_set
    if uset.contains(ctrl):
        return PsiResult(float(np.linalg.norm(ctrl)), ctrl, residual)
    if uset.kind == 'ball':
        proj = uset.project(ctrl)
        return PsiResult(None, None, float(np.linalg.norm(mat @ proj - rhs)))
    assert uset.lo is not None and uset.hi is not None
    feas = lsq_linear(mat, rhs, bounds=(uset.lo, uset.hi), method='bvls',
                      tol=1e-12)
    best = np.clip(feas.x, uset.lo, uset.hi)
    best_res = float(np.linalg.norm(mat @ best - rhs))
    if best_res > TOL_RESIDUAL:
        return PsiResult(None, None, best_res)
    ctrl = _box_min_norm(mat, rhs, uset.lo, uset.hi)
    residual = float(np.linalg.norm(mat @ ctrl - rhs))
    if residual > TOL_RESIDUAL or np.linalg.norm(ctrl) > np.linalg.norm(best):
        logger.warning('box min-norm program did not converge at x=%s, '
                       'using the feasible least squares control', pts)
        ctrl, residual = best, best_res
    return PsiResult(float(np.linalg.norm(ctrl)), ctrl, residual)


def min_norm_field(sys: ControlSystem, mu: DiscreteMeasure,
                   velocities: ArrayLike
                   ) -> Tuple[List[PsiResult], Optional[float]]:
    """Norm-minimal controls of a velocity field along a measure.

    Args:
        sys: a validated control system.
        mu: the measure, N atoms.
        velocities: array of shape (N, d).
    Returns:
        per-particle :func:`psi` results and the instantaneous effort
        sum_i w_i Psi(x_i, v_i), None if any particle is infeasible.
    """
    vels = np.asarray(velocities, dtype=float)
    if vels.shape != mu.points.shape:
        raise ValueError(f'expected velocities of shape {mu.points.shape}, '
                         f'got {vels.shape}')
    results = [psi(sys, pt, vel) for pt, vel in zip(mu.points, vels)]
    total: Optional[float] = 0.
    for weight, res in zip(mu.weights, results):
        if res.value is None:
            total = None
            break
        total += weight * res.value
    return results, total


def norm_minimal_controls(sys: ControlSystem, points: ArrayLike,
                          controls: ArrayLike) -> ndarray:
    """Replace controls by norm-minimal ones realizing the same velocities.

    Controls are kept untouched where A(x) has a trivial null space.

    Args:
        sys: a validated control system.
        points: array of shape (..., d).
        controls: array of shape (..., m).
    """
    ctrl = np.array(controls, dtype=float)
    if sys.rank is None or sys.rank >= sys.m:
        return ctrl
    pts = np.asarray(points, dtype=float)
    flat_pts = pts.reshape(-1, sys.d)
    flat_ctrl = ctrl.reshape(-1, sys.m)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RankDeficiencyWarning)
        for i, (pt, u) in enumerate(zip(flat_pts, flat_ctrl)):
            res = psi(sys, pt, sys.velocity(pt, u))
            if res.control is not None and res.value is not None and \
                    res.value <= np.linalg.norm(u) + TOL_U:
                flat_ctrl[i] = res.control
    return flat_ctrl.reshape(ctrl.shape)

