"""Control-affine dynamics f(x, u) = f0(x) + A(x) u.

The columns of A(x) and the drift f0 are :class:`VectorField` instances, the
control takes values in a convex compact :class:`ControlSet` containing 0.
Every evaluation accepts a single point of shape (d,) or a stack of points of
shape (..., d).
"""

from __future__ import annotations
import typing

import numpy as np
from scipy.stats import qmc

from . import expr
from .datatypes import ValidationReport
from .error import (ControlOutOfSet, ExprEvaluationError, InvalidControlSet,
                    NotValidatedError, RankConditionError)

if typing.TYPE_CHECKING:
    from typing import Optional, Sequence, Union
    from numpy import ndarray
    from numpy.typing import ArrayLike

TOL_U = 1e-9
TOL_GROWTH = 1e-6
RANK_CUTOFF = 1e-10


class VectorField:
    """A continuous vector field on R^d.

    Use one of the :meth:`constant`, :meth:`linear` and :meth:`expression`
    constructors.

    Attributes:
        kind: one of ``'constant'``, ``'linear'`` and ``'expr'``.
        dim: dimension d of the field.
    """

    def __init__(self, kind: str, dim: int,
                 value: Optional[ndarray] = None,
                 matrix: Optional[ndarray] = None,
                 components: Sequence[expr.ExprAst] = ()):
        self.kind = kind
        self.dim = dim
        self._value = value
        self._matrix = matrix
        self._components = tuple(components)

    @classmethod
    def constant(cls, value: ArrayLike) -> VectorField:
        """Constant field."""
        arr = np.array(value, dtype=float).reshape(-1)
        arr.setflags(write=False)
        return cls('constant', arr.size, value=arr)

    @classmethod
    def linear(cls, matrix: ArrayLike) -> VectorField:
        """Linear field x -> M x with M a square matrix."""
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f'linear field needs a square matrix, '
                             f'got shape {mat.shape}')
        mat.setflags(write=False)
        return cls('linear', mat.shape[0], matrix=mat)

    @classmethod
    def expression(cls, components: Sequence[Union[str, expr.ExprAst]],
                   dim: Optional[int] = None) -> VectorField:
        """Field given componentwise by arithmetic expressions.

        Args:
            components: expression source strings or trees, one per output
                coordinate.
            dim: dimension of the field, defaults to the number of
                components.
        """
        asts = [expr.parse_expr(c) if isinstance(c, str) else c
                for c in components]
        dim = len(asts) if dim is None else dim
        if len(asts) != dim:
            raise ValueError(f'expected {dim} components, got {len(asts)}')
        for ast in asts:
            if expr.max_index(ast) > dim:
                raise ValueError(
                    f'{expr.print_expr(ast)} uses a coordinate beyond {dim}')
        return cls('expr', dim, components=asts)

    @property
    def components(self) -> typing.Tuple[expr.ExprAst, ...]:
        """Expression trees of an ``'expr'`` field."""
        return self._components

    @property
    def value(self) -> Optional[ndarray]:
        """Value of a constant field."""
        return self._value

    @property
    def matrix(self) -> Optional[ndarray]:
        """Matrix of a linear field."""
        return self._matrix

    def __call__(self, x: ArrayLike) -> ndarray:
        """Evaluate the field on points of shape (..., d)."""
        pts = np.asarray(x, dtype=float)
        if self.kind == 'constant':
            assert self._value is not None
            return np.broadcast_to(self._value, pts.shape).copy()
        if self.kind == 'linear':
            assert self._matrix is not None
            return pts @ self._matrix.T
        return np.stack([expr.evaluate(ast, pts) for ast in self._components],
                        axis=-1)

    def __repr__(self) -> str:
        if self.kind == 'constant':
            return f'VectorField.constant({self._value!r})'
        if self.kind == 'linear':
            return f'VectorField.linear({self._matrix!r})'
        srcs = [expr.print_expr(ast) for ast in self._components]
        return f'VectorField.expression({srcs!r})'


class ControlSet:
    """Convex compact control set U containing 0.

    Use :meth:`ball` or :meth:`box` to build one.

    Attributes:
        kind: either ``'ball'`` or ``'box'``.
        m: dimension of the controls.
        radius: radius of a ball.
        lo: lower bounds of a box.
        hi: upper bounds of a box.
    """

    def __init__(self, kind: str, m: int, radius: float = 0.,
                 lo: Optional[ndarray] = None,
                 hi: Optional[ndarray] = None):
        self.kind = kind
        self.m = m
        self.radius = radius
        self.lo = lo
        self.hi = hi

    @classmethod
    def ball(cls, m: int, radius: float) -> ControlSet:
        """Euclidean ball of given radius in R^m."""
        if not radius > 0:
            raise InvalidControlSet(f'ball radius must be positive, '
                                    f'got {radius}')
        return cls('ball', m, radius=float(radius))

    @classmethod
    def box(cls, lo: ArrayLike, hi: ArrayLike) -> ControlSet:
        """Box prod [lo_j, hi_j] with lo_j <= 0 <= hi_j."""
        low = np.array(lo, dtype=float).reshape(-1)
        high = np.array(hi, dtype=float).reshape(-1)
        if low.shape != high.shape:
            raise InvalidControlSet('box bounds have different lengths')
        if np.any(low > 0) or np.any(high < 0):
            raise InvalidControlSet('0 ∉ U')
        low.setflags(write=False)
        high.setflags(write=False)
        return cls('box', low.size, lo=low, hi=high)

    @property
    def r_max(self) -> float:
        """Largest norm of an element of U."""
        if self.kind == 'ball':
            return self.radius
        assert self.lo is not None and self.hi is not None
        corner = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return float(np.linalg.norm(corner))

    def project(self, u: ArrayLike) -> ndarray:
        """Euclidean projection of controls of shape (..., m) on U."""
        ctrl = np.asarray(u, dtype=float)
        if self.kind == 'box':
            return np.clip(ctrl, self.lo, self.hi)
        norms = np.linalg.norm(ctrl, axis=-1, keepdims=True)
        scale = np.minimum(1., self.radius / np.maximum(norms, 1e-300))
        return ctrl * scale

    def distance(self, u: ArrayLike) -> ndarray:
        """Distance of controls of shape (..., m) to U."""
        ctrl = np.asarray(u, dtype=float)
        return np.linalg.norm(ctrl - self.project(ctrl), axis=-1)

    def contains(self, u: ArrayLike, tol: float = TOL_U) -> bool:
        """Whether all the given controls lie in U within tol."""
        return bool(np.all(self.distance(u) <= tol))

    def __repr__(self) -> str:
        if self.kind == 'ball':
            return f'ControlSet.ball({self.m}, {self.radius!r})'
        return f'ControlSet.box({list(self.lo)!r}, {list(self.hi)!r})'


class ControlSystem:
    """Control-affine system with its sampled constants.

    Args:
        f0: the drift.
        columns: the m columns of A(x).
        control_set: the control set U.
        growth_constant: sampled growth constant C, set by
            :meth:`validated`.
        rank: sampled rank of A(x), set by :meth:`validated`.
    """

    def __init__(self, f0: VectorField, columns: Sequence[VectorField],
                 control_set: ControlSet,
                 growth_constant: Optional[float] = None,
                 rank: Optional[int] = None):
        self.f0 = f0
        self.columns = tuple(columns)
        self.control_set = control_set
        self.growth_constant = growth_constant
        self.rank = rank
        for col in self.columns:
            if col.dim != f0.dim:
                raise ValueError(f'column of dimension {col.dim} in a '
                                 f'system of dimension {f0.dim}')
        if control_set.m != len(self.columns):
            raise ValueError(f'control set of dimension {control_set.m} '
                             f'for {len(self.columns)} columns')

    @property
    def d(self) -> int:
        """State dimension."""
        return self.f0.dim

    @property
    def m(self) -> int:
        """Control dimension."""
        return len(self.columns)

    @property
    def is_validated(self) -> bool:
        """Whether the standing assumptions were sampled."""
        return self.growth_constant is not None and self.rank is not None

    @property
    def growth_bound(self) -> float:
        """Constant D with |f(x,u)| <= D (1+|x|)."""
        if self.growth_constant is None:
            raise NotValidatedError('the growth bound')
        return self.growth_constant * max(1., self.control_set.r_max)

    def drift(self, x: ArrayLike) -> ndarray:
        """Drift f0 on points of shape (..., d)."""
        return self.f0(x)

    def matrix(self, x: ArrayLike) -> ndarray:
        """Matrices A(x) of shape (..., d, m)."""
        pts = np.asarray(x, dtype=float)
        if not self.columns:
            return np.zeros(pts.shape[:-1] + (self.d, 0))
        return np.stack([col(pts) for col in self.columns], axis=-1)

    def velocity(self, x: ArrayLike, u: ArrayLike) -> ndarray:
        """Velocities f0(x) + A(x) u, without checking that u is in U."""
        pts = np.asarray(x, dtype=float)
        ctrl = np.asarray(u, dtype=float)
        vel = self.drift(pts)
        if self.columns:
            vel = vel + np.einsum('...ij,...j->...i', self.matrix(pts), ctrl)
        return vel

    def validated(self, probes: Optional[ArrayLike] = None) -> ControlSystem:
        """Copy of the system carrying its sampled constants.

        Args:
            probes: points on which the assumptions are sampled, defaults to
                :func:`default_probes`.
        Raises:
            RankConditionError: if the sampled rank varies.
            ExprEvaluationError: if a field fails on a probe.
        """
        pts = default_probes(self.d) if probes is None else probes
        report = validate(self, pts)
        if report.failed_probes:
            bad = np.asarray(pts)[report.failed_probes[0]]
            self.drift(bad)
            self.matrix(bad)
        if not report.rank_constant:
            raise RankConditionError(sorted(set(report.ranks)))
        return ControlSystem(self.f0, self.columns, self.control_set,
                             report.growth_constant, report.rank)

    def __repr__(self) -> str:
        return (f'ControlSystem(d={self.d}, m={self.m}, f0={self.f0!r}, '
                f'U={self.control_set!r})')


def default_probes(dim: int, npoints: int = 1000,
                   half_width: float = 10.) -> ndarray:
    """Origin followed by unscrambled Halton points in a centered box."""
    if dim == 0:
        return np.zeros((1, 0))
    halton = qmc.Halton(d=dim, scramble=False)
    pts = half_width * (2 * halton.random(npoints - 1) - 1)
    return np.vstack([np.zeros((1, dim)), pts])


def matrix_rank(mats: ndarray) -> ndarray:
    """Rank of a stack of matrices with relative singular value cutoff."""
    if 0 in mats.shape[-2:]:
        return np.zeros(mats.shape[:-2], dtype=int)
    sing = np.linalg.svd(mats, compute_uv=False)
    cutoff = RANK_CUTOFF * sing[..., :1]
    return np.sum((sing > cutoff) & (sing > 0), axis=-1)


def eval_drift(sys: ControlSystem, x: ArrayLike) -> ndarray:
    """Return f0(x)."""
    return sys.drift(x)


def eval_matrix(sys: ControlSystem, x: ArrayLike) -> ndarray:
    """Return A(x), of shape (d, m) for a single point."""
    return sys.matrix(x)


def eval_velocity(sys: ControlSystem, x: ArrayLike, u: ArrayLike) -> ndarray:
    """Return f(x, u) = f0(x) + A(x) u.

    Raises:
        ControlOutOfSet: if u is farther than ``TOL_U`` from U.
    """
    ctrl = np.asarray(u, dtype=float)
    dist = sys.control_set.distance(ctrl)
    if np.any(dist > TOL_U):
        worst = np.unravel_index(np.argmax(dist), dist.shape)
        raise ControlOutOfSet(np.atleast_1d(ctrl[worst]), float(dist[worst]))
    return sys.velocity(x, ctrl)


def _eval_probe(sys: ControlSystem, pts: ndarray) -> typing.Tuple[ndarray,
                                                                   ndarray]:
    """Sum of field norms and matrices on probes."""
    norms = np.linalg.norm(sys.drift(pts), axis=-1)
    mats = sys.matrix(pts)
    if sys.m:
        norms = norms + np.linalg.norm(mats, axis=-2).sum(axis=-1)
    return norms, mats


def validate(sys: ControlSystem, probes: ArrayLike) -> ValidationReport:
    """Sample the growth and rank conditions on probe points.

    Failures are reported, never raised.

    Args:
        sys: the control system.
        probes: nonempty array of points of shape (P, d).
    Returns:
        the sampled ranks, growth constant and rank-constant flag.
    """
    pts = np.atleast_2d(np.asarray(probes, dtype=float))
    failed = []
    try:
        norms, mats = _eval_probe(sys, pts)
        ok_pts = pts
    except ExprEvaluationError:
        keep = []
        for i, pt in enumerate(pts):
            try:
                _eval_probe(sys, pt[np.newaxis])
            except ExprEvaluationError:
                failed.append(i)
            else:
                keep.append(i)
        ok_pts = pts[keep]
        if ok_pts.size:
            norms, mats = _eval_probe(sys, ok_pts)
        else:
            norms, mats = np.zeros(0), np.zeros((0, sys.d, sys.m))
    ranks = tuple(int(r) for r in matrix_rank(mats))
    ratio = norms / (1 + np.linalg.norm(ok_pts, axis=-1))
    growth = float(ratio.max()) if ratio.size else 0.
    return ValidationReport(ranks=ranks, growth_constant=growth,
                            rank_constant=len(set(ranks)) <= 1,
                            failed_probes=tuple(failed))


def eval_velocities(sys: ControlSystem, points: ArrayLike,
                    controls: ArrayLike) -> ndarray:
    """Batched velocities on points (..., d) and controls (..., m).

    Controls are not checked against U.
    """
    return sys.velocity(points, controls)
