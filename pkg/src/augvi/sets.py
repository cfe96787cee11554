"""Closed convex sets with cheap projections.

Boxes and cones are projected by clamping, which is the exact metric
projection only when the metric is diagonal; pairing them with a
non-diagonal space raises :class:`~augvi.errors.UnsupportedError`.  Balls are
projected radially in their own metric, which is exact for any inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidParameterError, UnsupportedError
from .spaces import DiscreteSpace


def _require_diagonal(space, kind):
    if space is not None and not space.is_diagonal:
        raise UnsupportedError(f"{kind} projection needs a diagonal (lumped) metric")


def _check_dim(y, dim):
    y = np.asarray(y, dtype=float)
    if y.shape != (dim,):
        raise DimensionError("vector", dim, y.shape)
    return y


class ConvexSet:
    """Interface shared by all set variants."""

    dim: int
    is_cone = False

    def project(self, y, space=None):
        raise NotImplementedError

    def distance(self, y, space=None):
        space = space if space is not None else DiscreteSpace.euclidean(self.dim)
        y = _check_dim(y, self.dim)
        return space.norm(y - self.project(y, space))

    def contains(self, y, tol=1e-12):
        y = _check_dim(y, self.dim)
        return bool(np.max(np.abs(y - self.project(y)), initial=0.0) <= tol)

    def polar(self):
        raise UnsupportedError(f"{type(self).__name__} is not a cone")

    def recession_directions(self):
        """``(index, sign)`` pairs: the coordinate rays ``sign * e_index`` in K_inf."""
        return np.empty(0, dtype=int), np.empty(0)

    def sample(self, rng, scale=1.0):
        """A random point of the set (for randomized certificates)."""
        return self.project(scale * rng.standard_normal(self.dim))

    def derivative(self, y, space=None):
        """An element of the generalized derivative of ``P_K`` at ``y``."""
        raise UnsupportedError(f"no projection derivative for {type(self).__name__}")


class ProjectionDerivative:
    """Linear map ``v -> D P_K(y) v``; ``diag`` is set when it is diagonal."""

    def __init__(self, diag=None, apply=None):
        self.diag = diag
        self._apply = apply

    def apply(self, v):
        if self.diag is not None:
            return self.diag * v
        return self._apply(v)

    @property
    def clamped(self):
        """Number of components where the projection is locally constant."""
        if self.diag is None:
            return 0
        return int(np.count_nonzero(self.diag == 0.0))


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    """``{y : lower <= y <= upper}`` with possibly infinite bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        hi = np.array(self.upper, dtype=float).ravel()
        lo, hi = np.broadcast_arrays(lo, hi)
        lo, hi = lo.copy(), hi.copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidParameterError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise InvalidParameterError("box requires lower <= upper componentwise")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise InvalidParameterError("box would be empty")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, dim, lower, upper):
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self):
        return self.lower.size

    @property
    def is_cone(self):
        # only boxes made of {0}, [0, inf), (-inf, 0] and R factors are cones
        lo_ok = np.isin(self.lower, (0.0, -np.inf))
        hi_ok = np.isin(self.upper, (0.0, np.inf))
        return bool(np.all(lo_ok & hi_ok))

    def project(self, y, space=None):
        _require_diagonal(space, "box")
        y = _check_dim(y, self.dim)
        return np.clip(y, self.lower, self.upper)

    def derivative(self, y, space=None):
        # kinks (y exactly on a bound) count as clamped
        y = _check_dim(y, self.dim)
        inside = (y > self.lower) & (y < self.upper)
        return ProjectionDerivative(diag=inside.astype(float))

    def polar(self):
        if not self.is_cone:
            raise UnsupportedError("box is not a cone")
        # componentwise: [0,inf) <-> (-inf,0], {0} <-> R
        lo = np.where(self.lower == 0.0, -np.inf, 0.0)
        hi = np.where(self.upper == 0.0, np.inf, 0.0)
        return Box(lo, hi)

    def recession_directions(self):
        up = np.flatnonzero(self.upper == np.inf)
        down = np.flatnonzero(self.lower == -np.inf)
        idx = np.concatenate([up, down])
        sign = np.concatenate([np.ones(up.size), -np.ones(down.size)])
        return idx, sign

    def sample(self, rng, scale=1.0):
        lo = np.where(np.isfinite(self.lower), self.lower, np.minimum(self.upper, 0.0) - scale)
        hi = np.where(np.isfinite(self.upper), self.upper, np.maximum(self.lower, 0.0) + scale)
        return rng.uniform(lo, hi)


class NonnegativeCone(Box):
    """``{y : y >= 0}``."""

    def __init__(self, dim):
        super().__init__(np.zeros(int(dim)), np.full(int(dim), np.inf))

    def __repr__(self):
        return f"NonnegativeCone({self.dim})"


class NonpositiveCone(Box):
    """``{y : y <= 0}``, the polar of :class:`NonnegativeCone` in diagonal metrics."""

    def __init__(self, dim):
        super().__init__(np.full(int(dim), -np.inf), np.zeros(int(dim)))

    def __repr__(self):
        return f"NonpositiveCone({self.dim})"


class ZeroSet(Box):
    """The singleton ``{0}``; encodes equality constraints."""

    def __init__(self, dim):
        super().__init__(np.zeros(int(dim)), np.zeros(int(dim)))

    def project(self, y, space=None):
        y = _check_dim(y, self.dim)
        return np.zeros_like(y)

    def __repr__(self):
        return f"ZeroSet({self.dim})"


class FullSpace(Box):
    """All of ``R^dim``; used for blocks a safeguard should leave untouched."""

    def __init__(self, dim):
        super().__init__(np.full(int(dim), -np.inf), np.full(int(dim), np.inf))

    def project(self, y, space=None):
        return _check_dim(y, self.dim).copy()

    def __repr__(self):
        return f"FullSpace({self.dim})"


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    """Closed ball ``{y : ||y - center|| <= radius}`` in ``metric``."""

    center: np.ndarray
    radius: float
    metric: DiscreteSpace = field(repr=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).ravel()
        if c.size != self.metric.dim:
            raise DimensionError("ball center", self.metric.dim, c.size)
        if not self.radius > 0:
            raise InvalidParameterError("ball radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @classmethod
    def centered(cls, radius, metric):
        return cls(np.zeros(metric.dim), float(radius), metric)

    @property
    def dim(self):
        return self.center.size

    def project(self, y, space=None):
        y = _check_dim(y, self.dim)
        d = y - self.center
        r = self.metric.norm(d)
        if r <= self.radius:
            return y.copy()
        return self.center + (self.radius / r) * d

    def distance(self, y, space=None):
        y = _check_dim(y, self.dim)
        return max(self.metric.norm(y - self.center) - self.radius, 0.0)

    def derivative(self, y, space=None):
        y = _check_dim(y, self.dim)
        d = y - self.center
        r = self.metric.norm(d)
        if r < self.radius:
            return ProjectionDerivative(diag=np.ones(self.dim))
        s = self.radius / r
        u = d / r
        G = self.metric

        def apply(v):
            return s * (v - u * G.inner(u, v))

        return ProjectionDerivative(apply=apply)

    def sample(self, rng, scale=1.0):
        d = rng.standard_normal(self.dim)
        d *= self.radius * rng.uniform() ** (1.0 / self.dim) / self.metric.norm(d)
        return self.center + d


class Product(ConvexSet):
    """Cartesian product; each factor owns a contiguous index range.

    Parameters
    ----------
    parts : sequence of ConvexSet
        Factors in order; index ranges are laid out contiguously.
    """

    def __init__(self, parts):
        self.parts = tuple(parts)
        if not self.parts:
            raise InvalidParameterError("product needs at least one factor")
        self.slices = []
        start = 0
        for p in self.parts:
            self.slices.append(slice(start, start + p.dim))
            start += p.dim
        self.dim = start

    def __repr__(self):
        return f"Product({list(self.parts)!r})"

    @property
    def is_cone(self):
        return all(p.is_cone for p in self.parts)

    def _subspace(self, space, sl):
        return None if space is None else space.subspace(sl)

    def project(self, y, space=None):
        y = _check_dim(y, self.dim)
        out = np.empty_like(y)
        for p, sl in zip(self.parts, self.slices):
            out[sl] = p.project(y[sl], self._subspace(space, sl))
        return out

    def distance(self, y, space=None):
        y = _check_dim(y, self.dim)
        if space is None:
            space = DiscreteSpace.euclidean(self.dim)
        return space.norm(y - self.project(y, space))

    def polar(self):
        return Product([p.polar() for p in self.parts])

    def derivative(self, y, space=None):
        y = _check_dim(y, self.dim)
        parts = [p.derivative(y[sl], self._subspace(space, sl)) for p, sl in zip(self.parts, self.slices)]
        if all(d.diag is not None for d in parts):
            return ProjectionDerivative(diag=np.concatenate([d.diag for d in parts]))

        def apply(v):
            return np.concatenate([d.apply(v[sl]) for d, sl in zip(parts, self.slices)])

        return ProjectionDerivative(apply=apply)

    def recession_directions(self):
        idx, sign = [], []
        for p, sl in zip(self.parts, self.slices):
            i, s = p.recession_directions()
            idx.append(i + sl.start)
            sign.append(s)
        return np.concatenate(idx).astype(int), np.concatenate(sign)

    def sample(self, rng, scale=1.0):
        return np.concatenate([p.sample(rng, scale) for p in self.parts])


class RecessionProbe:
    """Finite sample of the recession cone ``K_inf = {d : d + K ⊆ K}``.

    Directions are stored as coordinate rays ``sign * e_index``; this covers
    every variant here (boxes with infinite bounds, orthant cones) and keeps
    the probe cheap for large grids.
    """

    def __init__(self, dim, indices, signs):
        self.dim = int(dim)
        self.indices = np.asarray(indices, dtype=int)
        self.signs = np.asarray(signs, dtype=float)
        if self.indices.shape != self.signs.shape:
            raise InvalidParameterError("indices and signs must align")

    @classmethod
    def of(cls, K):
        idx, sign = K.recession_directions()
        return cls(K.dim, idx, sign)

    def __len__(self):
        return self.indices.size

    @property
    def directions(self):
        D = np.zeros((len(self), self.dim))
        D[np.arange(len(self)), self.indices] = self.signs
        return D

    def verify(self, K, rng, n_points=5, tol=1e-10):
        """Check ``d + y in K`` for sampled ``y in K`` and every stored ``d``."""
        for _ in range(n_points):
            y = K.sample(rng)
            for d in self.directions:
                z = y + d
                if np.max(np.abs(z - K.project(z))) > tol:
                    return False
        return True


# -- functional interface -----------------------------------------------------


def project(K, y, space=None):
    return K.project(y, space)


def distance(K, y, space=None):
    return K.distance(y, space)


def polar_residual(K, y, probe=None, space=None):
    """``max_d <y - P_K(y), d>`` over probe directions; ``<= 0`` for every y.

    Returns 0.0 for an empty probe (``K_inf = {0}``).
    """
    if probe is None:
        probe = RecessionProbe.of(K)
    if space is None:
        space = DiscreteSpace.euclidean(K.dim)
    y = _check_dim(y, K.dim)
    if len(probe) == 0:
        return 0.0
    r = space.apply_gram(y - K.project(y, space))
    return float(np.max(r[probe.indices] * probe.signs))


def moreau_check(K, y, space=None):
    """Defect ``||y - P_K(y) - P_{K°}(y)||`` of Moreau's decomposition."""
    if not K.is_cone:
        raise UnsupportedError("Moreau decomposition needs a cone")
    if space is None:
        space = DiscreteSpace.euclidean(K.dim)
    y = _check_dim(y, K.dim)
    return space.norm(y - K.project(y, space) - K.polar().project(y, space))
