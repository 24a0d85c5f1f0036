"""Discrete probability measures and Wasserstein distances."""

from __future__ import annotations
import typing

import numpy as np
from scipy.spatial.distance import cdist

from . import _transport

if typing.TYPE_CHECKING:
    from typing import Callable, Optional, Sequence, Tuple
    from numpy import ndarray
    from numpy.typing import ArrayLike

TOL_TARGET = 1e-9
TOL_MATCH = 1e-9


class DiscreteMeasure:
    """Weighted particle cloud representing a probability measure.

    Zero weights are dropped and weights are renormalized to sum to one.

    Args:
        points: positions of the atoms, shape (N, d).
        weights: nonnegative weights, uniform if omitted.

    Attributes:
        points: read-only array of shape (N, d).
        weights: read-only array of shape (N,).
    """

    def __init__(self, points: ArrayLike,
                 weights: Optional[ArrayLike] = None):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, np.newaxis]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError('a measure needs at least one atom')
        if weights is None:
            wgt = np.full(pts.shape[0], 1. / pts.shape[0])
        else:
            wgt = np.array(weights, dtype=float).reshape(-1)
        if wgt.shape[0] != pts.shape[0]:
            raise ValueError(f'{wgt.shape[0]} weights for '
                             f'{pts.shape[0]} points')
        if np.any(wgt < 0) or not np.all(np.isfinite(wgt)):
            raise ValueError('weights must be finite and nonnegative')
        keep = wgt > 0
        if not np.any(keep):
            raise ValueError('weights sum to zero')
        pts = pts[keep]
        wgt = wgt[keep] / wgt[keep].sum()
        pts.setflags(write=False)
        wgt.setflags(write=False)
        self.points = pts
        self.weights = wgt

    @property
    def size(self) -> int:
        """Number of atoms."""
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        """Dimension of the ambient space."""
        return self.points.shape[1]

    def mean(self) -> ndarray:
        """Barycenter of the measure."""
        return self.weights @ self.points

    def lexsorted(self) -> DiscreteMeasure:
        """Same measure with atoms sorted lexicographically."""
        order = np.lexsort(self.points.T[::-1])
        return DiscreteMeasure(self.points[order], self.weights[order])

    def merged(self, tol: float = TOL_MATCH) -> DiscreteMeasure:
        """Merge atoms closer than tol, in lexicographic order."""
        srt = self.lexsorted()
        pts = [srt.points[0]]
        wgts = [srt.weights[0]]
        for pt, wgt in zip(srt.points[1:], srt.weights[1:]):
            if np.all(np.abs(pt - pts[-1]) <= tol):
                wgts[-1] += wgt
            else:
                pts.append(pt)
                wgts.append(wgt)
        return DiscreteMeasure(np.array(pts), np.array(wgts))

    def same_atoms(self, other: DiscreteMeasure, tol: float = TOL_MATCH,
                   wtol: float = 1e-9) -> bool:
        """Whether both measures agree as merged atom multisets."""
        mine = self.merged(tol)
        theirs = other.merged(tol)
        if mine.points.shape != theirs.points.shape:
            return False
        return bool(np.all(np.abs(mine.points - theirs.points) <= tol) and
                    np.all(np.abs(mine.weights - theirs.weights) <= wtol))

    def __repr__(self) -> str:
        return f'DiscreteMeasure({self.points.tolist()}, ' \
               f'{self.weights.tolist()})'


class TransportPlan(typing.NamedTuple):
    """Coupling between two discrete measures.

    Attributes:
        coupling: sorted (i, j, mass) triples with positive mass.
    """

    coupling: Tuple[Tuple[int, int, float], ...]

    def as_matrix(self, nrows: int, ncols: int) -> ndarray:
        """Dense (nrows, ncols) coupling matrix."""
        mat = np.zeros((nrows, ncols))
        for i, j, mass in self.coupling:
            mat[i, j] += mass
        return mat


class TargetSpec:
    """Target of a control problem.

    Either a finite family of measures, or a box or ball of R^d that the
    support must lie in. Use :meth:`measures`, :meth:`box` or :meth:`ball`.

    Attributes:
        kind: one of ``'measures'``, ``'box'`` and ``'ball'``.
        family: the measures of a ``'measures'`` target.
    """

    def __init__(self, kind: str, family: Sequence[DiscreteMeasure] = (),
                 lo: Optional[ndarray] = None, hi: Optional[ndarray] = None,
                 center: Optional[ndarray] = None, radius: float = 0.):
        self.kind = kind
        self.family = tuple(family)
        self.lo = lo
        self.hi = hi
        self.center = center
        self.radius = radius

    @classmethod
    def measures(cls, family: Sequence[DiscreteMeasure]) -> TargetSpec:
        """Finite family of target measures."""
        if not family:
            raise ValueError('empty family of target measures')
        return cls('measures', family=family)

    @classmethod
    def box(cls, lo: ArrayLike, hi: ArrayLike) -> TargetSpec:
        """Support inclusion in the box prod [lo_j, hi_j]."""
        low = np.array(lo, dtype=float).reshape(-1)
        high = np.array(hi, dtype=float).reshape(-1)
        if low.shape != high.shape or np.any(low > high):
            raise ValueError('box target needs lo <= hi')
        return cls('box', lo=low, hi=high)

    @classmethod
    def ball(cls, center: ArrayLike, radius: float) -> TargetSpec:
        """Support inclusion in a closed Euclidean ball."""
        if radius < 0:
            raise ValueError('ball target needs a nonnegative radius')
        return cls('ball', center=np.array(center, dtype=float).reshape(-1),
                   radius=float(radius))

    @property
    def is_set(self) -> bool:
        """Whether this is a support-inclusion target."""
        return self.kind != 'measures'

    def project(self, points: ArrayLike) -> ndarray:
        """Closest points of the target set, shape (..., d)."""
        pts = np.asarray(points, dtype=float)
        if self.kind == 'box':
            return np.clip(pts, self.lo, self.hi)
        if self.kind == 'ball':
            assert self.center is not None
            offset = pts - self.center
            norms = np.linalg.norm(offset, axis=-1, keepdims=True)
            scale = np.minimum(1., self.radius / np.maximum(norms, 1e-300))
            return self.center + offset * scale
        raise TypeError('a family of measures has no point projection')

    def set_distance(self, points: ArrayLike) -> ndarray:
        """Distance of each point to the target set."""
        pts = np.asarray(points, dtype=float)
        return np.linalg.norm(pts - self.project(pts), axis=-1)

    def __repr__(self) -> str:
        if self.kind == 'box':
            return f'TargetSpec.box({self.lo!r}, {self.hi!r})'
        if self.kind == 'ball':
            return f'TargetSpec.ball({self.center!r}, {self.radius!r})'
        return f'TargetSpec.measures({list(self.family)!r})'


def moment(mu: DiscreteMeasure, p: float) -> float:
    """Moment of order p, sum_i w_i |x_i|^p."""
    if p < 1:
        raise ValueError(f'moment order must be >= 1, got {p}')
    return float(mu.weights @ np.linalg.norm(mu.points, axis=1)**p)


def pushforward(mu: DiscreteMeasure,
                fmap: Callable[[ndarray], ArrayLike]) -> DiscreteMeasure:
    """Image measure, atoms with coincident images are kept distinct.

    Args:
        mu: the measure.
        fmap: map applied to the (N, d) array of atom positions.
    """
    return DiscreteMeasure(np.asarray(fmap(mu.points), dtype=float),
                           mu.weights)


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure,
                p: float) -> ndarray:
    """Matrix of |x_i - y_j|^p."""
    return cdist(mu.points, nu.points)**p


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure,
                p: float = 2) -> Tuple[float, TransportPlan]:
    """Exact p-Wasserstein distance and an optimal plan.

    Args:
        mu: source measure.
        nu: target measure.
        p: order, p >= 1.
    Returns:
        the distance and an optimal :class:`TransportPlan`.
    """
    if p < 1:
        raise ValueError(f'Wasserstein order must be >= 1, got {p}')
    if mu.dim != nu.dim:
        raise ValueError('measures live in different dimensions')
    cost = cost_matrix(mu, nu, p)
    uniform = (mu.size == nu.size and
               np.all(mu.weights == mu.weights[0]) and
               np.all(nu.weights == nu.weights[0]))
    if uniform:
        value, flows = _transport.assignment(cost)
    else:
        value, flows = _transport.transport_simplex(
            np.array(mu.weights), np.array(nu.weights), cost)
    coupling = tuple((i, j, mass) for (i, j), mass in sorted(flows.items())
                     if mass > 0)
    return max(value, 0.)**(1 / p), TransportPlan(coupling)


def target_distance(mu: DiscreteMeasure, target: TargetSpec) -> float:
    """Distance of a measure to a target.

    For a family of measures, the smallest W2 distance to its members. For a
    set, the largest distance of an atom to the set.
    """
    if target.kind == 'measures':
        return min(wasserstein(mu, theta, 2)[0] for theta in target.family)
    return float(target.set_distance(mu.points).max())


def in_target(mu: DiscreteMeasure, target: TargetSpec,
              tol: float = TOL_TARGET) -> bool:
    """Whether the target distance is at most tol."""
    return target_distance(mu, target) <= tol
