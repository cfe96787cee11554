"""Safeguarded augmented Lagrangian method with V-based penalty control.

The outer loop:

1. stop if ``sigma(x^k, lam^k) <= outer_tol``;
2. take ``w^k = P_B(lam^k)`` and compute ``x^{k+1}`` with
   ``||L_{rho_k}(x^{k+1}, w^k)|| <= eps_{k+1}``;
3. ``lam^{k+1} = rho_k [g + w^k/rho_k - P_K(g + w^k/rho_k)]`` at ``x^{k+1}``;
4. keep ``rho`` if ``k == 0`` or ``V_{k+1} <= tau V_k``, else multiply by ``gamma``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InnerSolverError, InsufficientDataError, InvalidParameterError
from .newton import SubproblemSolver, solve_box_constrained, solve_unconstrained
from .sets import Box, ConvexSet
from .vi_core import kkt_distance, multiplier_update, sigma, utility_V

log = logging.getLogger(__name__)

CONVERGED = "Converged"
MAX_OUTER = "MaxOuterReached"
INNER_FAILURE = "InnerFailure"


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop parameters.

    ``inner_tol_mode`` is ``"fixed"`` (every subproblem solved to
    ``inner_tol``) or ``"forcing"`` (``eps_{k+1} = min(inner_tol, z_k sigma_k)``
    with ``z_k = z0 * theta**k``).  ``B=None`` means the box ``[-1e6, 1e6]``
    in every multiplier component.  ``penalty_test_start`` is the first
    outer index at which the V test may raise ``rho`` (the rule as stated
    uses 1, i.e. only ``k = 0`` is exempt).
    """

    rho0: float = 1.0
    gamma: float = 10.0
    tau: float = 0.5
    B: Optional[ConvexSet] = None
    outer_tol: float = 1e-8
    inner_tol_mode: str = "fixed"
    inner_tol: float = 1e-10
    z0: float = 0.1
    theta: float = 0.9
    max_outer: int = 100
    max_inner: int = 200
    safeguard: bool = True
    penalty_test_start: int = 1

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidParameterError("rho0 must be positive")
        if not self.gamma > 1:
            raise InvalidParameterError("gamma must exceed 1")
        if not 0 < self.tau < 1:
            raise InvalidParameterError("tau must lie in (0, 1)")
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise InvalidParameterError("tolerances must be positive")
        if self.inner_tol_mode not in ("fixed", "forcing"):
            raise InvalidParameterError(f"unknown inner_tol_mode {self.inner_tol_mode!r}")
        if not (self.z0 > 0 and 0 < self.theta < 1):
            raise InvalidParameterError("forcing needs z0 > 0 and theta in (0, 1)")
        if self.max_outer < 0 or self.max_inner < 1:
            raise InvalidParameterError("iteration limits must be nonnegative / positive")
        if self.penalty_test_start < 1:
            raise InvalidParameterError("penalty_test_start must be >= 1")

    def forcing_factor(self, k):
        return self.z0 * self.theta**k

    def inner_tolerance(self, k, sigma_k):
        if self.inner_tol_mode == "fixed":
            return self.inner_tol
        return min(self.inner_tol, self.forcing_factor(k) * sigma_k)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    rho: float
    sigma: float
    V: float = math.nan
    eps: float = math.nan
    inner_iters: int = 0
    dist: Optional[float] = None
    stationarity: float = math.nan
    complementarity: float = math.nan
    feasibility: float = math.nan
    normality: float = math.nan
    normality_bound: float = math.nan
    inner_retry: bool = False


@dataclass
class IterationHistory:
    records: list
    status: str
    x: np.ndarray
    lam: np.ndarray
    cfg: SolverConfig
    problem_name: str = ""
    message: str = ""
    reports: list = field(default_factory=list, repr=False)

    @property
    def rhos(self):
        return [r.rho for r in self.records]

    @property
    def sigmas(self):
        return [r.sigma for r in self.records]

    @property
    def dists(self):
        return [r.dist for r in self.records]

    @property
    def final_sigma(self):
        return self.records[-1].sigma

    @property
    def penalty_increases(self):
        return sum(1 for a, b in zip(self.records, self.records[1:]) if b.rho > a.rho)


def penalty_decision(V_new, V_old, k, rho, cfg):
    """Return ``rho_{k+1}``: unchanged if ``k == 0`` or ``V_new <= tau * V_old``."""
    if k < cfg.penalty_test_start or V_new <= cfg.tau * V_old:
        return rho
    return cfg.gamma * rho


def default_safeguard(P):
    return Box.uniform(P.h_space.dim, -1e6, 1e6)


def _normality_points(P, n=4):
    rng = np.random.default_rng(12345)
    return [P.K.sample(rng) for _ in range(n)]


def _normality(P, x, lam, points, sig):
    """``max_y <lam, y - g(x)>`` over sample points and its KKT-residual bound.

    For y in K, ``<lam, y - g> <= sigma (||lam|| + ||y - g|| + 3 sigma)``.
    """
    gx = P.g(x)
    H = P.h_space
    val = max(H.inner(lam, y - gx) for y in points)
    spread = max(H.norm(y - gx) for y in points)
    return val, sig * (H.norm(lam) + spread + 3 * sig)


def solve(P, cfg=None, inner=None, x0=None, lam0=None):
    """Run the outer loop and return the full :class:`IterationHistory`.

    ``inner`` is a :class:`~augvi.newton.SubproblemSolver`; problems with an
    explicit bound block are routed to the box-constrained solver (projected
    Newton on the augmented Lagrangian function by default).  Starting
    points default to ``P.meta['x0']`` / ``P.meta['lam0']`` or zero.
    """
    cfg = cfg or SolverConfig()
    partial = P.explicit is not None
    if inner is None:
        if partial:
            glob = "merit" if P.potential is not None else "backtracking"
            inner = SubproblemSolver(linear_solver="direct", globalization=glob)
        else:
            inner = SubproblemSolver(linear_solver="cg")
    inner = replace(inner, max_iter=cfg.max_inner)
    B = cfg.B if cfg.B is not None else default_safeguard(P)
    x = P.check_x(x0 if x0 is not None else P.meta.get("x0", np.zeros(P.x_space.dim))).copy()
    lam = P.check_lam(lam0 if lam0 is not None else P.meta.get("lam0", np.zeros(P.h_space.dim))).copy()
    has_exact = P.exact_solution is not None
    points = _normality_points(P)

    def record(k, rho, x, lam, **kw):
        res = sigma(P, x, lam)
        gx = P.g(x)
        nval, nbound = _normality(P, x, lam, points, res.sigma)
        return IterationRecord(
            k=k,
            rho=rho,
            sigma=res.sigma,
            stationarity=res.stationarity,
            complementarity=res.complementarity,
            dist=kkt_distance(P, x, lam) if has_exact else None,
            feasibility=P.K.distance(gx, P.h_space),
            normality=nval,
            normality_bound=nbound,
            **kw,
        )

    rho = cfg.rho0
    records = [record(0, rho, x, lam)]
    reports = []
    V_old = math.nan
    status, message = MAX_OUTER, ""
    k = 0
    while True:
        sig_k = records[-1].sigma
        if sig_k <= cfg.outer_tol:
            status = CONVERGED
            break
        if k >= cfg.max_outer:
            status = MAX_OUTER
            break
        w = B.project(lam, P.h_space) if cfg.safeguard else lam
        eps = cfg.inner_tolerance(k, sig_k)
        retry = False
        try:
            x_new, mu, rep = _inner_solve(P, w, rho, x, eps, inner, partial)
        except InnerSolverError as err:
            log.info("inner solve failed at k=%d (rho=%g): %s; retrying with gamma*rho", k, rho, err)
            rho = cfg.gamma * rho
            retry = True
            records[-1] = replace(records[-1], rho=rho, inner_retry=True)
            try:
                x_new, mu, rep = _inner_solve(P, w, rho, x, eps, inner, partial)
            except InnerSolverError as err2:
                status, message = INNER_FAILURE, str(err2)
                break
        reports.append(rep)
        lam_new = multiplier_update(P, x_new, w, rho)
        if partial:
            lam_new[P.explicit.h_slice] = mu
        V_new = utility_V(P, x_new, w, rho, mu)
        rho_next = penalty_decision(V_new, V_old, k, rho, cfg)
        x, lam = x_new, lam_new
        k += 1
        records.append(
            record(k, rho_next, x, lam, V=V_new, eps=eps, inner_iters=rep.iterations, inner_retry=False)
        )
        log.debug("k=%d rho=%g sigma=%.3e V=%.3e retry=%s", k, rho_next, records[-1].sigma, V_new, retry)
        V_old = V_new
        rho = rho_next
    return IterationHistory(
        records=records,
        status=status,
        x=x,
        lam=lam,
        cfg=cfg,
        problem_name=P.name,
        message=message,
        reports=reports,
    )


def _inner_solve(P, w, rho, x, eps, inner, partial):
    if partial:
        return solve_box_constrained(P, w, rho, x, eps, solver=inner)
    x_new, rep = solve_unconstrained(P, w, rho, x, eps, solver=inner)
    return x_new, None, rep


# -- history analysis -----------------------------------------------------------


@dataclass(frozen=True)
class RateEstimate:
    q: float
    rho: float
    ks: tuple
    c1: float

    def __iter__(self):
        yield self.q
        yield self.c1


def estimate_rate(history, min_points=3):
    """Geometric mean of ``sigma_{k+1}/sigma_k`` over the final constant-rho run.

    Only records with ``sigma > 10 * outer_tol`` are used.  ``c1`` fits the
    model ``q = c1 / (rho - c1)``.
    """
    recs = history.records if hasattr(history, "records") else list(history)
    tol = history.cfg.outer_tol if hasattr(history, "cfg") else 0.0
    if len(recs) < 2:
        raise InsufficientDataError("need at least two records")
    # last index whose step used the final rho (ratio k -> k+1 uses rho_k)
    rho_tail = recs[-2].rho
    start = len(recs) - 2
    while start > 0 and recs[start - 1].rho == rho_tail:
        start -= 1
    seg = [r for r in recs[start:] if r.sigma > 10 * tol]
    if len(seg) < min_points:
        raise InsufficientDataError(f"only {len(seg)} usable records in the tail segment")
    q = (seg[-1].sigma / seg[0].sigma) ** (1.0 / (len(seg) - 1))
    return RateEstimate(q=q, rho=rho_tail, ks=tuple(r.k for r in seg), c1=q * rho_tail / (1 + q))


@dataclass
class LawReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, law, k, detail):
        self.violations.append((law, k, detail))

    def __str__(self):
        if self.ok:
            return "all history laws hold"
        return "\n".join(f"law {law} violated at k={k}: {d}" for law, k, d in self.violations)


def check_history_laws(history, cfg=None, feas_tol=None):
    """Check the structural laws every run of the method must obey.

    (i)   rho nondecreasing, every jump exactly by gamma;
    (ii)  for k >= 1, rho kept  <=>  V_{k+1} <= tau V_k;
    (iii) a converged run ends (nearly) feasible: d_K(g(x)) <= feas_tol;
    (iv)  approximate normality of the final pair, bounded by its residual.
    """
    cfg = cfg or history.cfg
    recs = history.records
    rep = LawReport()
    for a, b in zip(recs, recs[1:]):
        if b.inner_retry:
            continue
        if b.rho < a.rho:
            rep.add("i", b.k, f"rho decreased {a.rho} -> {b.rho}")
        elif b.rho != a.rho and not math.isclose(b.rho, cfg.gamma * a.rho, rel_tol=1e-12):
            rep.add("i", b.k, f"jump factor {b.rho / a.rho} != gamma={cfg.gamma}")
    # record j carries V_j and rho_j decided from V_j vs V_{j-1}
    for j in range(cfg.penalty_test_start + 1, len(recs)):
        prev, cur = recs[j - 1], recs[j]
        if cur.inner_retry or prev.inner_retry:
            continue
        kept = cur.rho == prev.rho
        passed = cur.V <= cfg.tau * prev.V
        if kept != passed:
            rep.add("ii", cur.k, f"kept={kept} but V ratio {cur.V / prev.V:.3g} vs tau={cfg.tau}")
    final = recs[-1]
    if history.status == CONVERGED:
        tol = cfg.outer_tol if feas_tol is None else feas_tol
        if final.feasibility > tol:
            rep.add("iii", final.k, f"d_K(g(x)) = {final.feasibility:.3e} > {tol:.1e}")
        if final.normality > final.normality_bound + 1e-12:
            rep.add("iv", final.k, f"normality {final.normality:.3e} > bound {final.normality_bound:.3e}")
    return rep

