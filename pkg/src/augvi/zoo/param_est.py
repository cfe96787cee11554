"""Coefficient identification in ``-(q u')' = f`` on ``(0, 1)``.

Unknowns are the nodal coefficient ``q`` (all ``n`` nodes, space ``H^1``)
and the state ``u`` (interior nodes, space ``H^1_0``).  The tracking problem

    min  1/2 ||u - z||^2_{H^1_0} + beta/2 ||q||^2_{H^1}
    s.t. q >= alpha,   L^{-1}(f - A(q) u) = 0

is posed with ``g(q, u) = (q - alpha, L^{-1}(f - A(q) u))`` and
``K = R^n_+ x {0}``, where ``L = D0^T D0`` discretizes ``-Δ`` and
``A(q) = D0^T diag(E q) D0`` discretizes ``-(q ·')'``.  Only the equation
block is penalized; the bound on ``q`` stays explicit.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidParameterError
from ..sets import Ball, FullSpace, NonnegativeCone, Product, ZeroSet
from ..spaces import DiscreteSpace
from ..vi_core import ExplicitBound, VariationalProblem
from .base import ZooInstance
from .grids import Grid1D

PI = np.pi


def _q0(x):
    return 1.0 + x


def _u0(x):
    return np.sin(PI * x)


def _f(x):
    return (1.0 + x) * PI**2 * np.sin(PI * x) - PI * np.cos(PI * x)


def param_estimation(n, beta=1.0, alpha=0.1, grid=None):
    """Parameter estimation instance with data ``q0 = 1 + x``, ``z = sin(πx)``.

    ``(q0, sin πx)`` solves the problem for ``beta = 0``; it is kept in
    ``extras['reference_q0']`` for comparison only, ``exact_solution`` is
    ``None``.  Solver overrides (looser tolerances, ball safeguard, start
    point ``(1, 0)``) are in ``config`` and ``meta``.
    """
    if n < 8:
        raise InvalidParameterError("param_estimation needs n >= 8")
    if not beta > 0:
        raise InvalidParameterError("beta must be positive")
    grid = grid or Grid1D(n)
    h = grid.h
    nq, nu = grid.n, grid.n - 2
    D0, E = grid.D0, grid.E
    Lsolve = grid.solve_laplace
    Xq, Xu = grid.h1, grid.h10
    X = DiscreteSpace.product(Xq, Xu, name=f"H1xH1_0(n={n})")
    Hq = grid.l2
    H = DiscreteSpace.product(Hq, Xu, name=f"L2xH1_0(n={n})")
    lower = np.full(nq, float(alpha))
    z = _u0(grid.x_int)
    f = _f(grid.x_int)
    mq = grid.mass
    sq, su = slice(0, nq), slice(nq, nq + nu)

    def split(x):
        return x[sq], x[su]

    def F(x):
        q, u = split(x)
        return np.concatenate([beta * q, u - z])

    def Fprime(x, dx):
        dq, du = split(dx)
        return np.concatenate([beta * dq, du])

    def potential(x):
        q, u = split(x)
        return 0.5 * Xu.inner(u - z, u - z) + 0.5 * beta * Xq.inner(q, q)

    def g(x):
        q, u = split(x)
        return np.concatenate([q - alpha, Lsolve(f - grid.stiffness(q) @ u)])

    def gprime(x, dx):
        q, u = split(x)
        dq, du = split(dx)
        rhs = D0.T @ ((D0 @ u) * (E @ dq)) + grid.stiffness(q) @ du
        return np.concatenate([dq, -Lsolve(rhs)])

    def gprime_adjoint(x, lam):
        q, u = split(x)
        mu, lu = lam[sq], lam[su]
        cq = mq * mu - h * (E.T @ ((D0 @ u) * (D0 @ lu)))
        return np.concatenate([Xq.riesz(cq), -Lsolve(grid.stiffness(q) @ lu)])

    def second_order(x, lam, dx):
        dq, du = split(dx)
        lu = lam[su]
        cq = -h * (E.T @ ((D0 @ du) * (D0 @ lu)))
        return np.concatenate([Xq.riesz(cq), -Lsolve(D0.T @ ((E @ dq) * (D0 @ lu)))])

    x0 = np.concatenate([np.ones(nq), np.zeros(nu)])
    P = VariationalProblem(
        x_space=X,
        h_space=H,
        K=Product([NonnegativeCone(nq), ZeroSet(nu)]),
        F=F,
        g=g,
        gprime=gprime,
        gprime_adjoint=gprime_adjoint,
        Fprime=Fprime,
        second_order=second_order,
        potential=potential,
        explicit=ExplicitBound(x_slice=sq, h_slice=sq, lower=lower),
        name="param-estimation",
        meta={"x0": x0, "grid": grid},
    )
    B = Product([FullSpace(nq), Ball.centered(1e6, Xu)])
    return ZooInstance(
        problem=P,
        name="param-estimation",
        params={"n": n, "beta": beta, "alpha": alpha},
        table="estimation-history",
        config={"outer_tol": 1e-4, "inner_tol": 1e-6, "B": B},
        extras={"grid": grid, "reference_q0": _q0(grid.x), "z": z, "f": f},
    )
