"""Small finite-dimensional instances with hand-checkable solutions."""

from __future__ import annotations

import numpy as np

from ..errors import AugviError, InvalidParameterError
from ..sets import Box, NonnegativeCone, NonpositiveCone
from ..spaces import DiscreteSpace
from ..vi_core import KKTPair, VariationalProblem
from .base import ZooInstance


def _linear_identity_problem(A, b, K, space, exact, name, meta=None):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))

    def ident(x, dx):
        return dx

    return VariationalProblem(
        x_space=space,
        h_space=space,
        K=K,
        F=lambda x: A @ x - b,
        g=lambda x: x.copy(),
        gprime=ident,
        gprime_adjoint=ident,
        Fprime=lambda x, dx: A @ dx,
        potential=lambda x: 0.5 * x @ (A @ x) - b @ x,
        exact_solution=exact,
        name=name,
        meta=meta or {},
    )


def scalar_qp():
    """``F(x) = x - 1``, ``g(x) = x``, ``K = (-inf, 0]``; KKT point ``(0, 1)``."""
    P = _linear_identity_problem(
        [[1.0]], [1.0], NonpositiveCone(1), DiscreteSpace.euclidean(1), KKTPair(np.zeros(1), np.ones(1)), "scalar-qp"
    )
    return ZooInstance(problem=P, name="scalar-qp")


def l2_counterexample(m):
    """Truncation to ``R^m`` of the sequence-space example without an error bound.

    ``F(x) = x``, ``g(x)_i = x_i / i``, ``K = R^m_+``, unit weights; the only
    KKT point is ``(0, 0)``.  See :func:`l2_family` for the two test families;
    the second one is stored as ``extras['probe_family']``.
    """
    m = int(m)
    if m < 2:
        raise InvalidParameterError("l2_counterexample needs m >= 2")
    s = 1.0 / np.arange(1, m + 1)
    X = DiscreteSpace.euclidean(m, name=f"l2_{m}")
    P = VariationalProblem(
        x_space=X,
        h_space=X,
        K=NonnegativeCone(m),
        F=lambda x: x.copy(),
        g=lambda x: s * x,
        gprime=lambda x, dx: s * dx,
        gprime_adjoint=lambda x, lam: s * lam,
        Fprime=lambda x, dx: dx.copy(),
        potential=lambda x: 0.5 * float(x @ x),
        exact_solution=KKTPair(np.zeros(m), np.zeros(m)),
        name="l2-counterexample",
    )
    family = [l2_family(m, k, 2) for k in range(1, m + 1)]
    return ZooInstance(
        problem=P, name="l2-counterexample", params={"m": m}, extras={"scales": s, "probe_family": family}
    )


def l2_family(m, k, family):
    """Pair ``(x, lam)`` of the first (``(e_k/k, -e_k)``) or second (``(e_k/k^2, -e_k/k)``) family."""
    if not 1 <= k <= m:
        raise InvalidParameterError(f"k must lie in [1, {m}]")
    e = np.zeros(m)
    e[k - 1] = 1.0
    if family == 1:
        return e / k, -e
    if family == 2:
        return e / k**2, -e / k
    raise InvalidParameterError("family must be 1 or 2")


def _spd_matrix(rng, dim, lo=1.0, hi=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    ev = rng.uniform(lo, hi, dim)
    ev[0], ev[-1] = lo, hi
    A = (Q * ev) @ Q.T
    return 0.5 * (A + A.T)


def box_qp_solution(A, b, lower, upper, tol=1e-13, max_iter=100000):
    """Exact solution of ``min 1/2 x'Ax - b'x`` over a box, with its multiplier.

    Projected gradient identifies the active set; the free block is then
    solved exactly and the set is corrected until the KKT signs hold.
    """
    A = np.atleast_2d(A)
    step = 1.0 / np.linalg.eigvalsh(A).max()
    x = np.clip(np.zeros_like(b), lower, upper)
    for _ in range(max_iter):
        x_new = np.clip(x - step * (A @ x - b), lower, upper)
        if np.max(np.abs(x_new - x)) <= 1e-10:
            x = x_new
            break
        x = x_new
    for _ in range(2 * b.size + 2):
        at_lo = np.isclose(x, lower, atol=1e-9, rtol=0)
        at_hi = np.isclose(x, upper, atol=1e-9, rtol=0)
        fixed = at_lo | at_hi
        x = np.where(at_lo, lower, np.where(at_hi, upper, x))
        free = ~fixed
        if free.any():
            rhs = b[free] - A[np.ix_(free, fixed)] @ x[fixed]
            x[free] = np.linalg.solve(A[np.ix_(free, free)], rhs)
        lam = b - A @ x
        # lam in N_box(x): >= 0 at the upper bound, <= 0 at the lower, 0 inside
        bad_lo = at_lo & (lam > tol)
        bad_hi = at_hi & (lam < -tol)
        outside = free & ((x < lower - tol) | (x > upper + tol))
        if not (bad_lo.any() or bad_hi.any() or outside.any()):
            lam = np.where(free, 0.0, lam)
            return x, lam
        x = np.clip(x, lower, upper)
        x[bad_lo | bad_hi] += np.where(bad_lo, 1e-6, -1e-6)[bad_lo | bad_hi]
    raise AugviError("box QP oracle did not settle")


def box_qp(dim, seed=0, b=None):
    """``F(x) = Ax - b`` over ``K = [-1, 1]^dim`` with random SPD ``A`` (spectrum in [1, 10]).

    ``dim = 1`` is the canonical instance ``A = 2``, ``b = 4`` (solution
    ``x = 1``, ``lam = 2``) for every seed.  ``b`` overrides the random
    right-hand side.
    """
    dim = int(dim)
    if not 1 <= dim <= 50:
        raise InvalidParameterError("box_qp supports 1 <= dim <= 50")
    rng = np.random.default_rng(seed)
    if dim == 1:
        A = np.array([[2.0]])
        bb = np.array([4.0])
    else:
        A = _spd_matrix(rng, dim)
        bb = rng.uniform(-6.0, 6.0, dim)
    if b is not None:
        bb = np.broadcast_to(np.asarray(b, dtype=float), (dim,)).copy()
    lo, hi = -np.ones(dim), np.ones(dim)
    x, lam = box_qp_solution(A, bb, lo, hi)
    P = _linear_identity_problem(
        A, bb, Box(lo, hi), DiscreteSpace.euclidean(dim), KKTPair(x, lam), "box-qp"
    )
    return ZooInstance(
        problem=P, name="box-qp", params={"dim": dim, "seed": seed}, extras={"A": A, "b": bb}
    )
