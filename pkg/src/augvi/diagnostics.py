"""Empirical checks of the error-bound theory.

* :func:`probe_error_bound` samples pairs near a KKT point and reports the
  spread of ``dist / sigma``;
* :func:`perturbed_kkt_roundtrip` solves the perturbed KKT system of a box
  QP exactly and records how far its solution moves;
* :func:`sosc_probe` gives heuristic evidence for the second-order condition;
* :func:`split_multiplier_ray` shows the unbounded multiplier set of the
  split box formulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AugviError, InvalidParameterError, MissingSolutionError, UnsupportedError
from .sets import Box, Product
from .vi_core import KKTPair, kkt_distance, lagrangian, sigma

SIGMA_FLOOR = 1e-14
UNBOUNDED = "UNBOUNDED"
BOUNDED = "bounded"


# -- two-sided error bound ------------------------------------------------------


@dataclass
class ErrorBoundReport:
    """Spread of ``dist / sigma`` over sampled pairs.

    ``c1_hat <= dist/sigma <= c2_hat`` on every sample; ``flag`` is
    :data:`UNBOUNDED` when the ratio grows systematically as ``sigma -> 0``
    (fitted slope of ``log ratio`` against ``log sigma`` below
    ``-slope_tol`` and at least a tenfold spread).
    """

    samples: int
    ratio_min: float
    ratio_max: float
    radius: float
    dual_scale: float
    slope: float = 0.0
    flag: str = BOUNDED
    ratios: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    sigmas: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def c1_hat(self):
        return self.ratio_min

    @property
    def c2_hat(self):
        return self.ratio_max

    @property
    def unbounded(self):
        return self.flag == UNBOUNDED


def _fit_slope(sig, ratio):
    if sig.size < 3 or np.ptp(np.log(sig)) < 1e-8:
        return 0.0
    return float(np.polyfit(np.log(sig), np.log(ratio), 1)[0])


def reference_solution(inst, tol=1e-10, outer_tol=1e-13):
    """A KKT pair of the discrete problem to measure distances from.

    The stored exact solution is used when its residual is below ``tol``;
    sampled continuous solutions of the PDE problems are only near-exact, so
    for them the discrete problem is solved to ``outer_tol`` instead.
    """
    from .alm import SolverConfig, solve

    P = inst.problem
    sol = P.exact_solution
    if sol is None:
        raise MissingSolutionError(f"{inst.name} has no exact solution")
    if sigma(P, sol.x, sol.lam).sigma <= tol:
        return sol
    cfg = SolverConfig(**{**inst.config, "outer_tol": outer_tol, "inner_tol": min(1e-12, outer_tol)})
    hist = solve(P, cfg, x0=sol.x, lam0=sol.lam)
    if hist.final_sigma > 10 * outer_tol:
        raise AugviError(f"reference solve stopped at sigma={hist.final_sigma:.2e} ({hist.status})")
    return KKTPair(hist.x, hist.lam)


def error_bound_report(pairs, P, ref=None, radius=math.nan, dual_scale=math.nan, slope_tol=0.25):
    """Build an :class:`ErrorBoundReport` from explicit ``(x, lam)`` pairs.

    Distances are measured to ``ref`` (default: the stored exact solution).
    """
    ref = ref or P.exact_solution
    if ref is None:
        raise MissingSolutionError("error bound probing needs an exact solution")
    sig, dist = [], []
    for x, lam in pairs:
        s = sigma(P, x, lam).sigma
        if s > SIGMA_FLOOR:
            sig.append(s)
            dist.append(P.x_space.norm(x - ref.x) + P.h_space.norm(lam - ref.lam))
    sig, dist = np.array(sig), np.array(dist)
    if sig.size == 0:
        return ErrorBoundReport(0, math.nan, math.nan, radius, dual_scale)
    ratio = dist / sig
    slope = _fit_slope(sig, ratio)
    flag = UNBOUNDED if slope < -slope_tol and ratio.max() > 10 * ratio.min() else BOUNDED
    return ErrorBoundReport(
        samples=int(sig.size),
        ratio_min=float(ratio.min()),
        ratio_max=float(ratio.max()),
        radius=radius,
        dual_scale=dual_scale,
        slope=slope,
        flag=flag,
        ratios=ratio,
        sigmas=sig,
    )


def probe_error_bound(inst, radius=1e-2, n_samples=200, seed=0, dual_scale=None, decades=3, ref=None):
    """Sample ``(x, lam)`` around a KKT pair and report ``dist / sigma``.

    The pair is ``ref`` or :func:`reference_solution`.
    Primal offsets have norm log-uniform in ``[radius 10^-decades, radius]``;
    multiplier offsets use the same law scaled by ``dual_scale`` (default
    ``radius``).  When the instance carries a ``probe_family`` (a list of
    pairs approaching the solution) the flag is computed from that family,
    otherwise from the random samples.
    """
    P = inst.problem
    if not radius > 0:
        raise InvalidParameterError("radius must be positive")
    sol = ref or reference_solution(inst)
    dual_scale = radius if dual_scale is None else float(dual_scale)
    rng = np.random.default_rng(seed)
    X, H = P.x_space, P.h_space
    pairs = []
    for _ in range(n_samples):
        dx = rng.standard_normal(X.dim)
        dl = rng.standard_normal(H.dim)
        tx = radius * 10.0 ** (-decades * rng.uniform())
        tl = dual_scale * 10.0 ** (-decades * rng.uniform())
        pairs.append((sol.x + tx * dx / X.norm(dx), sol.lam + tl * dl / H.norm(dl)))
    family = inst.extras.get("probe_family")
    if family is None:
        return error_bound_report(pairs, P, sol, radius, dual_scale)
    rep = error_bound_report(list(family), P, sol, radius, dual_scale)
    rnd = error_bound_report(pairs, P, sol, radius, dual_scale)
    rep.ratio_min = min(rep.ratio_min, rnd.ratio_min)
    rep.ratio_max = max(rep.ratio_max, rnd.ratio_max)
    rep.samples += rnd.samples
    return rep


# -- perturbed KKT system -------------------------------------------------------


@dataclass
class PerturbationSample:
    """Solution ``(x_p, lam_p)`` of ``L(x, lam) = alpha``, ``lam in N_K(g(x) - beta)``."""

    alpha: np.ndarray
    beta: np.ndarray
    x_p: Optional[np.ndarray]
    lam_p: Optional[np.ndarray]
    norm: float
    dist: float = math.nan
    sigma: float = math.nan
    defect: float = math.nan
    rejected: Optional[str] = None

    @property
    def ok(self):
        return self.rejected is None

    @property
    def ratio(self):
        return self.dist / self.norm if self.norm > 0 else math.nan


def perturbed_kkt_roundtrip(inst, alpha, beta, tol=1e-10):
    """Solve the perturbed KKT system of a box QP exactly.

    With ``z = x - beta`` the system ``Ax - b + lam = alpha``,
    ``lam in N_box(x - beta)`` is the box QP with right-hand side
    ``b + alpha - A beta``, handed to the active-set oracle.
    """
    from .zoo.toys import box_qp_solution

    if inst.name != "box-qp":
        raise UnsupportedError("perturbed_kkt_roundtrip supports box_qp instances only")
    P = inst.problem
    A, b = inst.extras["A"], inst.extras["b"]
    alpha = P.x_space.check(alpha, "alpha")
    beta = P.h_space.check(beta, "beta")
    norm = P.x_space.norm(alpha) + P.h_space.norm(beta)
    K = P.K
    try:
        z, lam = box_qp_solution(A, b + alpha - A @ beta, K.lower, K.upper)
    except (AugviError, np.linalg.LinAlgError) as err:
        return PerturbationSample(alpha, beta, None, None, norm, rejected=f"oracle failed: {err}")
    x = z + beta
    gmb = P.g(x) - beta
    defect = P.x_space.norm(lagrangian(P, x, lam) - alpha) + P.h_space.norm(
        gmb - K.project(gmb + lam, P.h_space)
    )
    sample = PerturbationSample(
        alpha, beta, x, lam, norm, dist=kkt_distance(P, x, lam), sigma=sigma(P, x, lam).sigma, defect=defect
    )
    if defect > tol:
        sample.rejected = f"perturbed system residual {defect:.2e} > {tol:.0e}"
    return sample


def perturbation_sweep(inst, scale, n_samples=200, seed=0):
    """Random perturbations with ``||p|| = scale``, split randomly between alpha and beta."""
    P = inst.problem
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        a = rng.standard_normal(P.x_space.dim)
        bvec = rng.standard_normal(P.h_space.dim)
        s = rng.uniform()
        a *= s * scale / P.x_space.norm(a)
        bvec *= (1 - s) * scale / P.h_space.norm(bvec)
        out.append(perturbed_kkt_roundtrip(inst, a, bvec))
    return out


# -- second-order condition -----------------------------------------------------


@dataclass
class SOSCReport:
    min_quotient: float
    eta: float
    accepted: int
    rejected: int


def _box_parts(K):
    if isinstance(K, Box):
        return K.lower, K.upper
    if isinstance(K, Product) and all(isinstance(p, Box) for p in K.parts):
        return np.concatenate([p.lower for p in K.parts]), np.concatenate([p.upper for p in K.parts])
    raise UnsupportedError("sosc_probe supports box-type constraint sets only")


def sosc_probe(inst, n_dirs=200, seed=0, tol=1e-9):
    """Smallest ``<D_x L(x̄, λ̄) d, d> / ||d||^2`` over sampled critical directions.

    Directions are drawn at random, clipped to the tangent cone of ``K`` at
    ``g(x̄)`` (``g`` must be the identity) and kept when
    ``<F(x̄), d> <= eta ||d||`` with ``eta = 1e-6 ||F(x̄)||``.  Every second
    draw also zeroes the strictly active components, which keeps the
    acceptance rate usable in high dimension.  A positive value is evidence,
    not proof.
    """
    P = inst.problem
    sol = P.exact_solution
    if sol is None:
        raise MissingSolutionError(f"{inst.name} has no exact solution")
    if P.Fprime is None:
        raise InvalidParameterError("sosc_probe needs Fprime")
    lo, hi = _box_parts(P.K)
    X = P.x_space
    rng = np.random.default_rng(seed)
    probe = rng.standard_normal(X.dim)
    if P.h_space.dim != X.dim or not np.allclose(P.gprime(sol.x, probe), probe):
        raise UnsupportedError("sosc_probe needs g = identity")
    gx = P.g(sol.x)
    Fx = P.F(sol.x)
    eta = 1e-6 * X.norm(Fx)
    at_lo = gx <= lo + tol
    at_hi = gx >= hi - tol
    strict = np.abs(X.apply_gram(sol.lam)) > tol * max(1.0, np.abs(X.apply_gram(sol.lam)).max())

    def hess(d):
        out = P.Fprime(sol.x, d)
        if P.second_order is not None:
            out = out + P.second_order(sol.x, sol.lam, d)
        return out

    best, acc, rej = math.inf, 0, 0
    for i in range(n_dirs):
        d = rng.standard_normal(X.dim)
        d = np.where(at_lo, np.maximum(d, 0.0), d)
        d = np.where(at_hi, np.minimum(d, 0.0), d)
        if i % 2:
            d = np.where(strict, 0.0, d)
        nd = X.norm(d)
        if nd == 0.0 or X.inner(Fx, d) > eta * nd:
            rej += 1
            continue
        acc += 1
        best = min(best, X.inner(hess(d), d) / nd**2)
    return SOSCReport(min_quotient=best, eta=eta, accepted=acc, rejected=rej)


# -- split box formulation --------------------------------------------------------


@dataclass
class RayReport:
    t: np.ndarray
    sigma: np.ndarray
    multiplier_norm: np.ndarray


def split_multiplier_ray(inst, ts=(0.0, 1.0, 10.0, 100.0, 1000.0)):
    """``sigma`` along ``lam + t r`` for the split formulation with collapsed bounds.

    ``r`` is ``-1`` in both bound components on the collapsed points.  There
    ``g'(u)^* r = 0`` and both constraints are active, so the residual does
    not change while the multiplier norm grows without bound.
    """
    if inst.name != "split-box-control":
        raise UnsupportedError("split_multiplier_ray needs a split_box_control instance")
    P = inst.problem
    lo, hi = inst.extras["lo"], inst.extras["hi"]
    collapsed = lo == hi
    if not collapsed.any():
        raise InvalidParameterError("no collapsed points: pass a nonempty collapse mask")
    x = P.exact_solution.x
    lam = P.exact_solution.lam
    r = -np.concatenate([collapsed, collapsed]).astype(float)
    ts = np.asarray(ts, dtype=float)
    sig = np.array([sigma(P, x, lam + t * r).sigma for t in ts])
    nrm = np.array([P.h_space.norm(lam + t * r) for t in ts])
    return RayReport(ts, sig, nrm)


__all__ = [
    "BOUNDED",
    "ErrorBoundReport",
    "PerturbationSample",
    "RayReport",
    "SOSCReport",
    "UNBOUNDED",
    "error_bound_report",
    "perturbation_sweep",
    "perturbed_kkt_roundtrip",
    "probe_error_bound",
    "reference_solution",
    "sosc_probe",
    "split_multiplier_ray",
]
