"""Distributed optimal control of the Poisson equation (single and two players).

Reduced form: ``S = (-Δ_h)^{-1}`` and the state is ``y_u = S(u + f)``; the
controls are box constrained with ``g = id``.  Data are manufactured so that
the continuous solution is known in closed form; sampled on the grid it is
only a near-solution of the discrete problem (an O(h^2) defect).
"""

from __future__ import annotations

import numpy as np

from ..sets import Box, NonnegativeCone, Product
from ..spaces import DiscreteSpace
from ..vi_core import KKTPair, VariationalProblem
from .base import ZooInstance
from .grids import Grid2D

PI = np.pi


def _ybar(x1, x2):
    return np.sin(PI * x1) * np.sin(PI * x2)


def _sinsin(freq):
    def p(x1, x2):
        return np.sin(freq * PI * x1) * np.sin(freq * PI * x2)

    return p


def _identity_constraint(space, K, F, Fprime, potential, exact, name, meta):
    def ident(x, dx):
        return dx

    return VariationalProblem(
        x_space=space,
        h_space=space,
        K=K,
        F=F,
        g=lambda x: x.copy(),
        gprime=ident,
        gprime_adjoint=ident,
        Fprime=Fprime,
        potential=potential,
        exact_solution=exact,
        name=name,
        meta=meta,
    )


def poisson_control(n, alpha=1.0, ua=-0.5, ub=0.5, grid=None):
    """Box-constrained Poisson control with known solution.

    ``ȳ = sin(πx1)sin(πx2)``, ``p̄ = sin(2πx1)sin(2πx2)``, ``y_d = ȳ + Δp̄``,
    ``ū = P_[ua,ub](-p̄/α)``, ``f = -Δȳ - ū``, ``λ̄ = -p̄ - αū``.
    Infinite ``ua``/``ub`` give the unconstrained problem.
    """
    grid = grid or Grid2D(n)
    S = grid.solve
    ybar = grid.sample(_ybar)
    pbar = grid.sample(_sinsin(2))
    yd = ybar - 8 * PI**2 * pbar
    ubar = np.clip(-pbar / alpha, ua, ub)
    f = 2 * PI**2 * ybar - ubar
    lbar = -pbar - alpha * ubar
    X = grid.space

    def F(u):
        return S(S(u + f) - yd) + alpha * u

    def Fprime(u, du):
        return S(S(du)) + alpha * du

    def potential(u):
        r = S(u + f) - yd
        return 0.5 * X.inner(r, r) + 0.5 * alpha * X.inner(u, u)

    K = Box.uniform(grid.dim, ua, ub)
    P = _identity_constraint(
        X, K, F, Fprime, potential, KKTPair(ubar, lbar), "poisson-control", {"grid": grid}
    )
    return ZooInstance(
        problem=P,
        name="poisson-control",
        params={"n": n, "alpha": alpha, "ua": ua, "ub": ub},
        table="control-history",
        extras={"grid": grid, "ybar": ybar, "pbar": pbar, "yd": yd, "f": f},
    )


def nash_control(n, alpha=(1.0, 1.0), bounds=(-0.5, 0.5), p1=None, p2=None, grid=None):
    """Two-player Nash game sharing one Poisson state.

    Player i minimizes ``½||y - y_d^i||² + α_i/2 ||u_i||²`` with
    ``y = S(u1 + u2 + f)``.  Defaults: ``p̄1 = -sin(2πx1)sin(2πx2)``,
    ``p̄2 = -sin(3πx1)sin(3πx2)``.  Custom ``p1``/``p2`` must be
    ``(callable, laplacian_callable)`` pairs.
    """
    grid = grid or Grid2D(n)
    S = grid.solve
    a1, a2 = alpha
    lo, hi = bounds
    m = grid.dim
    if p1 is None:
        p1 = (lambda x, y: -_sinsin(2)(x, y), lambda x, y: 8 * PI**2 * _sinsin(2)(x, y))
    if p2 is None:
        p2 = (lambda x, y: -_sinsin(3)(x, y), lambda x, y: 18 * PI**2 * _sinsin(3)(x, y))
    ybar = grid.sample(_ybar)
    pb1, pb2 = grid.sample(p1[0]), grid.sample(p2[0])
    yd1 = ybar + grid.sample(p1[1])
    yd2 = ybar + grid.sample(p2[1])
    u1 = np.clip(-pb1 / a1, lo, hi)
    u2 = np.clip(-pb2 / a2, lo, hi)
    f = 2 * PI**2 * ybar - u1 - u2
    lbar = np.concatenate([-pb1 - a1 * u1, -pb2 - a2 * u2])
    X = DiscreteSpace.product(grid.space, grid.space, name=f"L2^2(n={n})")

    def F(u):
        y = S(u[:m] + u[m:] + f)
        return np.concatenate([S(y - yd1) + a1 * u[:m], S(y - yd2) + a2 * u[m:]])

    def Fprime(u, du):
        c = S(S(du[:m] + du[m:]))
        return np.concatenate([c + a1 * du[:m], c + a2 * du[m:]])

    K = Product([Box.uniform(m, lo, hi), Box.uniform(m, lo, hi)])
    P = _identity_constraint(
        X, K, F, Fprime, None, KKTPair(np.concatenate([u1, u2]), lbar), "nash-control", {"grid": grid}
    )
    return ZooInstance(
        problem=P,
        name="nash-control",
        params={"n": n, "alpha1": a1, "alpha2": a2, "a": lo, "b": hi},
        table="nash-history",
        extras={"grid": grid, "f": f, "yd": (yd1, yd2), "alpha": alpha, "bounds": bounds},
    )


def nash_player_problem(inst, player, other):
    """Player ``player``'s own box-constrained control problem, rival fixed at ``other``."""
    grid = inst.extras["grid"]
    S = grid.solve
    a = inst.extras["alpha"][player]
    yd = inst.extras["yd"][player]
    lo, hi = inst.extras["bounds"]
    shift = inst.extras["f"] + other
    X = grid.space

    def F(u):
        return S(S(u + shift) - yd) + a * u

    def Fprime(u, du):
        return S(S(du)) + a * du

    K = Box.uniform(grid.dim, lo, hi)
    return _identity_constraint(X, K, F, Fprime, None, None, f"nash-player-{player + 1}", {})


def split_box_control(n, alpha=1.0, ua=-0.5, ub=0.5, collapse=None):
    """Poisson control with the bounds written as ``(u - ua, ub - u) >= 0``.

    Diagnostic only (not a supported solve path).  ``collapse`` is a boolean
    mask of grid points where the upper bound is moved onto the lower one;
    there the multiplier pair is determined only up to a common shift, so the
    multiplier set is unbounded.
    """
    base = poisson_control(n, alpha, ua, ub)
    grid = base.extras["grid"]
    m = grid.dim
    lo = np.full(m, float(ua))
    hi = np.full(m, float(ub))
    if collapse is not None:
        hi = np.where(collapse, lo, hi)
    F = base.problem.F
    X = grid.space
    H = DiscreteSpace.product(X, X)
    ubar = np.clip(base.exact_solution.x, lo, hi)
    lam = base.exact_solution.lam
    # lam = l1 - l2 with l1, l2 <= 0: lower-bound part and upper-bound part
    lbar = np.concatenate([np.minimum(lam, 0.0), np.minimum(-lam, 0.0)])

    P = VariationalProblem(
        x_space=X,
        h_space=H,
        K=Product([NonnegativeCone(m), NonnegativeCone(m)]),
        F=F,
        g=lambda u: np.concatenate([u - lo, hi - u]),
        gprime=lambda u, du: np.concatenate([du, -du]),
        gprime_adjoint=lambda u, l: l[:m] - l[m:],
        Fprime=base.problem.Fprime,
        exact_solution=KKTPair(ubar, lbar),
        name="split-box-control",
    )
    return ZooInstance(
        problem=P,
        name="split-box-control",
        params={"n": n, "alpha": alpha, "ua": ua, "ub": ub},
        extras={"grid": grid, "lo": lo, "hi": hi},
    )
