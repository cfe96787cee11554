"""Finite-dimensional inner-product spaces.

A :class:`DiscreteSpace` stands in for a Hilbert space such as a discretized
``L^2`` or ``H^1``.  Vectors are plain 1-D numpy arrays of coefficients; the
space only knows how to pair them.  Dual elements are always stored through
their Riesz representatives, so the dual norm of ``F(x)`` is simply
``space.norm(F(x))``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, InvalidParameterError, UnsupportedError

LUMPED_L2 = "lumped-L2"
OPERATOR = "H1-stiffness+mass"


class DiscreteSpace:
    """Coefficient space ``R^dim`` with the inner product ``<u, v> = u^T G v``.

    Parameters
    ----------
    weights : array_like, optional
        Positive quadrature weights; ``G = diag(weights)``.
    gram : sparse or dense matrix, optional
        Symmetric positive definite Gram matrix.  Mutually exclusive with
        ``weights``.  A factorization is built eagerly for Riesz solves.
    blocks : list of DiscreteSpace, optional
        Set by :meth:`product`; remembers the factor spaces so that
        :meth:`subspace` can hand them back.
    """

    def __init__(self, weights=None, gram=None, blocks=None, name=None):
        if (weights is None) == (gram is None):
            raise InvalidParameterError("give exactly one of weights or gram")
        self.name = name
        self.blocks = list(blocks) if blocks else None
        if weights is not None:
            w = np.array(weights, dtype=float).ravel()
            if w.size == 0:
                raise InvalidParameterError("space dimension must be positive")
            if not np.all(w > 0) or not np.all(np.isfinite(w)):
                raise InvalidParameterError("weights must be finite and strictly positive")
            w.setflags(write=False)
            self.weights = w
            self.gram = None
            self.dim = w.size
            self.metric_kind = LUMPED_L2
            self._solve = None
        else:
            G = sp.csc_matrix(gram, dtype=float)
            if G.shape[0] != G.shape[1] or G.shape[0] == 0:
                raise InvalidParameterError("gram must be a nonempty square matrix")
            asym = abs(G - G.T).max() if G.nnz else 0.0
            if asym > 1e-12 * max(abs(G).max(), 1.0):
                raise InvalidParameterError("gram must be symmetric")
            self.weights = None
            self.gram = G
            self.dim = G.shape[0]
            self.metric_kind = OPERATOR
            self._solve = spla.factorized(G)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def euclidean(cls, dim, name=None):
        return cls(weights=np.ones(int(dim)), name=name)

    @classmethod
    def uniform(cls, dim, weight, name=None):
        return cls(weights=np.full(int(dim), float(weight)), name=name)

    @classmethod
    def product(cls, *spaces, name=None):
        """Orthogonal product; stays diagonal if every factor is."""
        if all(s.is_diagonal for s in spaces):
            w = np.concatenate([s.weights for s in spaces])
            return cls(weights=w, blocks=spaces, name=name)
        mats = [sp.diags(s.weights) if s.is_diagonal else s.gram for s in spaces]
        return cls(gram=sp.block_diag(mats, format="csc"), blocks=spaces, name=name)

    # -- properties -----------------------------------------------------------

    @property
    def is_diagonal(self):
        return self.weights is not None

    @property
    def block_slices(self):
        if not self.blocks:
            return [slice(0, self.dim)]
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return out

    def subspace(self, sl):
        """The factor space living on index range ``sl``."""
        start, stop, _ = sl.indices(self.dim)
        if self.blocks:
            for b, bs in zip(self.blocks, self.block_slices):
                if bs.start == start and bs.stop == stop:
                    return b
        if start == 0 and stop == self.dim:
            return self
        if self.is_diagonal:
            return DiscreteSpace(weights=self.weights[start:stop])
        raise UnsupportedError("cannot restrict a non-diagonal metric to an arbitrary index range")

    # -- linear algebra -------------------------------------------------------

    def check(self, u, what="vector"):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise DimensionError(what, self.dim, u.shape)
        return u

    def apply_gram(self, u):
        """Coefficient vector ``G u`` (the functional ``v -> <u, v>``)."""
        if self.is_diagonal:
            return self.weights * u
        return self.gram @ u

    def riesz(self, c):
        """Solve ``G x = c``: Riesz representative of the functional ``c``."""
        if self.is_diagonal:
            return c / self.weights
        return self._solve(np.asarray(c, dtype=float))

    def inner(self, u, v):
        return float(np.dot(self.apply_gram(u), v))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"DiscreteSpace{label}(dim={self.dim}, metric={self.metric_kind})"
