"""Finite-difference grids on the unit square and the unit interval."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InvalidParameterError
from ..spaces import DiscreteSpace


def _second_difference(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csc")


class Grid2D:
    """Uniform grid on ``(0,1)^2`` with ``n`` interior points per axis.

    ``laplacian`` is the five-point discretization of ``-Δ`` with homogeneous
    Dirichlet data; its sparse LU factorization is computed once and backs
    :meth:`solve` (the solution operator ``S``).  Lumped weights ``h^2`` make
    this an approximation of ``L^2(Ω)``; ``weight`` overrides the lumped
    weight (e.g. ``1/n**2`` for the cell-count normalization).
    """

    def __init__(self, n, weight=None):
        if n < 2:
            raise InvalidParameterError("Grid2D needs n >= 2")
        self.n = int(n)
        self.h = 1.0 / (n + 1)
        self.dim = self.n**2
        T = _second_difference(self.n)
        I = sp.identity(self.n, format="csc")
        self.laplacian = ((sp.kron(I, T) + sp.kron(T, I)) / self.h**2).tocsc()
        self._lu = spla.splu(self.laplacian, permc_spec="MMD_AT_PLUS_A")
        t = self.h * np.arange(1, self.n + 1)
        X1, X2 = np.meshgrid(t, t, indexing="ij")
        self.x1 = X1.ravel()
        self.x2 = X2.ravel()
        self.weight = self.h**2 if weight is None else float(weight)
        if not self.weight > 0:
            raise InvalidParameterError("Grid2D weight must be positive")
        self.space = DiscreteSpace.uniform(self.dim, self.weight, name=f"L2(n={n})")

    def solve(self, v):
        """``S v``: discrete solution of ``-Δ y = v``, ``y = 0`` on the boundary."""
        return self._lu.solve(np.asarray(v, dtype=float))

    def sample(self, fun):
        return np.asarray(fun(self.x1, self.x2), dtype=float)


class Grid1D:
    """``n`` equispaced nodes on ``[0, 1]`` (boundary included), forward differences.

    Attributes
    ----------
    D : sparse (n-1, n)
        Forward difference ``(u_{i+1} - u_i) / h``.
    D0 : sparse (n-1, n-2)
        ``D`` restricted to interior nodes (zero boundary values).
    E : sparse (n-1, n)
        Average of the two nodes of each cell; carries coefficients to cells.
    laplacian : sparse (n-2, n-2)
        ``D0^T D0``, the discrete ``-Δ`` on ``H^1_0``.
    """

    def __init__(self, n):
        if n < 4:
            raise InvalidParameterError("Grid1D needs n >= 4")
        self.n = int(n)
        self.h = 1.0 / (n - 1)
        self.x = np.linspace(0.0, 1.0, self.n)
        self.x_int = self.x[1:-1]
        self.D = (sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / self.h).tocsr()
        self.D0 = self.D[:, 1:-1].tocsr()
        self.E = (0.5 * sp.diags([np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))).tocsr()
        self.laplacian = (self.D0.T @ self.D0).tocsc()
        self._lap = spla.factorized(self.laplacian)
        mass = self.h * np.ones(self.n)
        mass[[0, -1]] *= 0.5
        self.mass = mass
        stiff = self.h * (self.D.T @ self.D)
        self.h1 = DiscreteSpace(gram=sp.diags(mass) + stiff, name=f"H1(n={n})")
        self.h10 = DiscreteSpace(gram=self.h * self.laplacian, name=f"H1_0(n={n})")
        self.l2 = DiscreteSpace(weights=mass, name=f"L2(n={n})")
        self.l2_int = DiscreteSpace(weights=self.h * np.ones(self.n - 2), name=f"L2_0(n={n})")

    def solve_laplace(self, v):
        """``(-Δ)^{-1} v`` on interior nodes."""
        return self._lap(np.asarray(v, dtype=float))

    def stiffness(self, q):
        """``A(q) = D0^T diag(E q) D0``, the discrete ``-∇·(q ∇·)``."""
        return (self.D0.T @ sp.diags(self.E @ q) @ self.D0).tocsr()
