"""Semismooth Newton solvers for the augmented subproblems.

Two entry points:

* :func:`solve_unconstrained` finds an approximate zero of
  ``x -> L_rho(x, w)`` (every constraint penalized).
* :func:`solve_box_constrained` handles partial penalization: a lower bound
  on a block of ``x`` stays explicit, the subproblem becomes a VI over that
  box, and the bound multiplier is recovered from the final iterate.

The Newton operator is ``F'(x) + rho g'(x)^* (I - D P_K) g'(x) + (g''(x)[.])^* lam``
where ``D P_K`` is a generalized derivative of the projection (components
sitting exactly on a bound are treated as clamped) and ``lam`` the current
bracket multiplier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CGBreakdown, InnerSolverError, InvalidParameterError
from .vi_core import aug_lagrangian, bound_multiplier_term, multiplier_update, shifted_constraint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubproblemSolver:
    """Settings of the inner Newton iteration.

    ``linear_solver`` is ``"cg"`` (matrix-free, in the metric of ``x_space``)
    or ``"direct"`` (dense assembly through operator actions; small problems
    only).  ``cg_maxit=None`` means ``10 * dim``.  ``globalization`` is
    ``"backtracking"`` (Armijo on the residual norm), ``"none"`` or, for the
    box-constrained solver only, ``"merit"``: projected Newton with Armijo
    on the augmented Lagrangian function (needs ``P.potential``).
    """

    linear_solver: str = "cg"
    cg_tol: float = 1e-12
    cg_maxit: int | None = None
    globalization: str = "backtracking"
    theta_bt: float = 0.5
    c_armijo: float = 1e-4
    min_step: float = 2.0**-30
    gauss_newton: bool = False
    max_iter: int = 200

    def __post_init__(self):
        if self.linear_solver not in ("cg", "direct"):
            raise InvalidParameterError(f"unknown linear solver {self.linear_solver!r}")
        if self.globalization not in ("none", "backtracking", "merit"):
            raise InvalidParameterError(f"unknown globalization {self.globalization!r}")
        if not 0 < self.cg_tol < 1:
            raise InvalidParameterError("cg_tol must lie in (0, 1)")
        if self.cg_maxit is not None and self.cg_maxit < 1:
            raise InvalidParameterError("cg_maxit must be >= 1")
        if not 0 < self.theta_bt < 1:
            raise InvalidParameterError("theta_bt must lie in (0, 1)")
        if self.max_iter < 0:
            raise InvalidParameterError("max_iter must be nonnegative")


@dataclass
class NewtonStepReport:
    residuals: list = field(default_factory=list)
    cg_iters: list = field(default_factory=list)
    active_sizes: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    gauss_newton_steps: int = 0

    @property
    def iterations(self):
        return len(self.steps)

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else np.inf


# -- linear algebra -----------------------------------------------------------


def cg(apply_A, b, space, tol_rel=1e-12, maxit=None, x0=None):
    """Conjugate gradients for an operator self-adjoint in ``space``'s metric.

    Returns ``(x, iterations)``.  Raises :class:`CGBreakdown` on a direction
    of nonpositive curvature.
    """
    maxit = 10 * b.size if maxit is None else maxit
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_A(x) if x0 is not None else b.copy()
    rr = space.inner(r, r)
    stop = (tol_rel * space.norm(b)) ** 2
    if rr <= stop:
        return x, 0
    p = r.copy()
    for it in range(1, maxit + 1):
        Ap = apply_A(p)
        curv = space.inner(p, Ap)
        if curv <= 0:
            raise CGBreakdown("nonpositive curvature in CG; increase rho or use Gauss-Newton", x=x)
        a = rr / curv
        x += a * p
        r -= a * Ap
        rr_new = space.inner(r, r)
        if rr_new <= stop:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, maxit


def assemble(apply_A, dim):
    """Dense matrix of a linear map given by its action."""
    A = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        A[:, j] = apply_A(e)
        e[j] = 0.0
    return A


def newton_operator(P, x, w, rho, gauss_newton=False):
    """Return ``(apply, clamped)`` for the generalized Jacobian of ``L_rho(., w)``."""
    mask = P.penalty_mask
    _, y, _ = shifted_constraint(P, x, w, rho)
    D = P.K.derivative(y, P.h_space)
    lam = multiplier_update(P, x, w, rho)
    second = None
    if P.second_order is not None and not gauss_newton:
        second = P.second_order

    def apply(dx):
        gd = P.gprime(x, dx)
        out = P.Fprime(x, dx) + rho * P.gprime_adjoint(x, mask * (gd - D.apply(gd)))
        if second is not None:
            out = out + second(x, lam, dx)
        return out

    clamped = D.clamped if D.diag is None else int(np.count_nonzero(mask * (1 - D.diag)))
    return apply, clamped


# -- unconstrained subproblem -------------------------------------------------


def solve_unconstrained(P, w, rho, x_start, eps, solver=None):
    """Inexact zero of ``L_rho(., w)`` with ``||L_rho(x, w)||_{X*} <= eps``.

    Raises :class:`InnerSolverError` (best iterate attached) when the
    iteration budget or the line search is exhausted.
    """
    solver = solver or SubproblemSolver()
    if P.Fprime is None:
        raise InvalidParameterError("Newton solver needs Fprime")
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    if solver.globalization == "merit":
        raise InvalidParameterError("merit globalization is only available for the box-constrained solver")
    X = P.x_space
    x = P.check_x(x_start).copy()
    r = aug_lagrangian(P, x, w, rho)
    nr = X.norm(r)
    rep = NewtonStepReport(residuals=[nr])
    for _ in range(solver.max_iter):
        if nr <= eps:
            return x, rep
        gn = solver.gauss_newton
        apply, clamped = newton_operator(P, x, w, rho, gn)
        rep.active_sizes.append(clamped)
        try:
            d, its = _linear_solve(apply, -r, X, solver)
        except CGBreakdown:
            if P.second_order is None or gn:
                raise
            # indefinite second-order term: fall back to Gauss-Newton for this step
            apply, _ = newton_operator(P, x, w, rho, True)
            d, its = _linear_solve(apply, -r, X, solver)
            rep.gauss_newton_steps += 1
        rep.cg_iters.append(its)
        t = 1.0
        while True:
            x_new = x + t * d
            r_new = aug_lagrangian(P, x_new, w, rho)
            nr_new = X.norm(r_new)
            if solver.globalization == "none" or nr_new <= (1 - solver.c_armijo * t) * nr:
                break
            t *= solver.theta_bt
            if t < solver.min_step:
                raise InnerSolverError("line search failed", x=x, residual=nr, report=rep)
        x, r, nr = x_new, r_new, nr_new
        rep.steps.append(t)
        rep.residuals.append(nr)
    if nr <= eps:
        return x, rep
    raise InnerSolverError(f"no convergence in {solver.max_iter} Newton steps", x=x, residual=nr, report=rep)


def _linear_solve(apply, b, space, solver):
    if solver.linear_solver == "direct":
        A = assemble(apply, b.size)
        return np.linalg.solve(A, b), 0
    return cg(apply, b, space, solver.cg_tol, solver.cg_maxit)


# -- box-constrained subproblem -----------------------------------------------


@dataclass
class _BoxState:
    x: np.ndarray
    r: np.ndarray
    grad: np.ndarray
    mu: np.ndarray
    active: np.ndarray
    stationarity: float
    natural: float

    @property
    def residual(self):
        return self.stationarity + self.natural


def _box_state(P, x, w, rho, bound, m):
    xs = bound.x_slice
    r = aug_lagrangian(P, x, w, rho)
    grad = P.x_space.apply_gram(r)
    gap = x[xs] - bound.lower
    shifted = gap - grad[xs] / m
    active = shifted <= 0.0
    mu = np.where(active, np.minimum(-grad[xs] / m, 0.0), 0.0)
    total = r + bound_multiplier_term(P, x, mu)
    nat = gap - np.maximum(shifted, 0.0)
    return _BoxState(x, r, grad, mu, active, P.x_space.norm(total), float(np.sqrt(np.sum(m * nat**2))))


def solve_box_constrained(P, w, rho, x_start, eps, bound=None, solver=None):
    """Solve the VI of ``L_rho(., w)`` over ``{x : x[x_slice] >= lower}``.

    Returns ``(x, mu, report)`` where ``mu`` is the bound multiplier (in the
    metric of the explicit constraint block) and the exit test is

        ||L_rho(x, w) + g'(x)^* mu||_{X*} + ||natural box residual|| <= eps.

    Each step is a primal-dual active-set Newton step: components predicted
    active are moved onto the bound, the rest solve the reduced Newton system.
    """
    solver = solver or SubproblemSolver(linear_solver="direct")
    bound = bound or P.explicit
    if bound is None:
        raise InvalidParameterError("no explicit bound given")
    if P.Fprime is None:
        raise InvalidParameterError("Newton solver needs Fprime")
    xs = bound.x_slice
    m = P.h_space.subspace(bound.h_slice).weights
    if m is None:
        raise InvalidParameterError("explicit bound block needs a diagonal metric")
    x = P.check_x(x_start).copy()
    x[xs] = np.maximum(x[xs], bound.lower)
    if solver.globalization == "merit":
        if P.potential is None:
            raise InvalidParameterError("merit globalization needs P.potential")
        return _box_projected_newton(P, w, rho, x, eps, bound, m, solver)
    st = _box_state(P, x, w, rho, bound, m)
    rep = NewtonStepReport(residuals=[st.residual])
    dim = x.size
    for _ in range(solver.max_iter):
        if st.residual <= eps:
            return st.x, st.mu, rep
        idx_q = np.arange(xs.start, xs.stop)
        act = idx_q[st.active]
        free = np.setdiff1d(np.arange(dim), act)
        rep.active_sizes.append(act.size)
        gn = solver.gauss_newton
        d = _box_newton_direction(P, st, w, rho, bound, act, free, gn)
        if d is None and P.second_order is not None and not gn:
            d = _box_newton_direction(P, st, w, rho, bound, act, free, True)
            rep.gauss_newton_steps += 1
        if d is None:
            raise InnerSolverError("singular reduced Newton system", x=st.x, residual=st.residual, report=rep)
        rep.cg_iters.append(0)
        t = 1.0
        while True:
            x_new = st.x + t * d
            x_new[xs] = np.maximum(x_new[xs], bound.lower)
            new = _box_state(P, x_new, w, rho, bound, m)
            if solver.globalization == "none" or new.residual <= (1 - solver.c_armijo * t) * st.residual:
                break
            t *= solver.theta_bt
            if t < solver.min_step:
                raise InnerSolverError("line search failed", x=st.x, residual=st.residual, report=rep)
        st = new
        rep.steps.append(t)
        rep.residuals.append(st.residual)
    if st.residual <= eps:
        return st.x, st.mu, rep
    raise InnerSolverError(f"no convergence in {solver.max_iter} steps", x=st.x, residual=st.residual, report=rep)


def augmented_merit(P, x, w, rho):
    """``potential(x) + rho/2 ||y - P_K(y)||^2`` over the penalized blocks.

    Up to a constant this is the augmented Lagrangian function whose
    gradient (Riesz representative) is ``L_rho(x, w)``.
    """
    _, y, py = shifted_constraint(P, x, w, rho)
    v = (y - py) * P.penalty_mask
    return P.potential(x) + 0.5 * rho * P.h_space.inner(v, v)


def _box_projected_newton(P, w, rho, x, eps, bound, m, solver):
    """Projected Newton with Armijo on :func:`augmented_merit` along the projection arc."""
    xs = bound.x_slice
    idx_q = np.arange(xs.start, xs.stop)
    dim = x.size
    st = _box_state(P, x, w, rho, bound, m)
    phi = augmented_merit(P, st.x, w, rho)
    rep = NewtonStepReport(residuals=[st.residual])
    for _ in range(solver.max_iter):
        if st.residual <= eps:
            return st.x, st.mu, rep
        gq = st.grad[xs]
        gap = st.x[xs] - bound.lower
        # nearly binding components pushing outward are held at the bound
        width = min(1e-3, st.natural)
        binding = (gap <= width) & (gq > 0)
        act = idx_q[binding]
        free = np.setdiff1d(np.arange(dim), act)
        rep.active_sizes.append(act.size)
        d = np.zeros(dim)
        d[act] = -gq[binding] / m[binding]
        d[free] = _descent_on_free(P, st, w, rho, free, solver, rep)
        rep.cg_iters.append(0)
        t = 1.0
        while True:
            x_new = st.x + t * d
            x_new[xs] = np.maximum(x_new[xs], bound.lower)
            new = _box_state(P, x_new, w, rho, bound, m)
            phi_new = augmented_merit(P, x_new, w, rho)
            decrease = float(np.dot(st.grad, x_new - st.x))
            if phi_new <= phi + solver.c_armijo * decrease or new.residual <= (1 - solver.c_armijo * t) * st.residual:
                break
            t *= solver.theta_bt
            if t < solver.min_step:
                raise InnerSolverError("line search failed", x=st.x, residual=st.residual, report=rep)
        st, phi = new, phi_new
        rep.steps.append(t)
        rep.residuals.append(st.residual)
    if st.residual <= eps:
        return st.x, st.mu, rep
    raise InnerSolverError(f"no convergence in {solver.max_iter} steps", x=st.x, residual=st.residual, report=rep)


def _descent_on_free(P, st, w, rho, free, solver, rep):
    """Reduced Newton direction on ``free``; Gauss-Newton, then steepest descent, if not a descent direction."""
    X = P.x_space
    g = st.grad[free]
    modes = [solver.gauss_newton] if solver.gauss_newton or P.second_order is None else [False, True]
    for gn in modes:
        apply, _ = newton_operator(P, st.x, w, rho, gn)
        H = assemble(lambda v: X.apply_gram(apply(v)), st.x.size)[np.ix_(free, free)]
        try:
            d = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            d = None
        if d is not None and np.all(np.isfinite(d)) and np.dot(g, d) < 0:
            if gn and not solver.gauss_newton:
                rep.gauss_newton_steps += 1
            return d
    return -g


def _box_newton_direction(P, st, w, rho, bound, act, free, gauss_newton):
    X = P.x_space
    apply, _ = newton_operator(P, st.x, w, rho, gauss_newton)
    # coefficient-form Hessian is symmetric: G * J
    H = assemble(lambda v: X.apply_gram(apply(v)), st.x.size)
    d = np.zeros_like(st.x)
    d[act] = bound.lower[act - bound.x_slice.start] - st.x[act]
    rhs = -st.grad[free] - H[np.ix_(free, act)] @ d[act]
    try:
        d[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)):
        return None
    return d
