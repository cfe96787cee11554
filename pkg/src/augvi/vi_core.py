"""Problem abstraction and the formula-level objects of the multiplier method.

A :class:`VariationalProblem` describes

    find x with g(x) in K and <F(x), v> >= 0 for all tangent directions v,

through evaluators for ``F``, ``g`` and the actions of ``g'(x)`` and its
adjoint.  Everything living in ``X*`` is returned as a Riesz representative
in ``x_space``; dual norms are therefore primal norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .sets import ConvexSet
from .spaces import DiscreteSpace


@dataclass(frozen=True)
class KKTPair:
    x: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class ExplicitBound:
    """A lower bound ``x[x_slice] >= lower`` kept out of the penalty.

    The matching constraint block is ``g(x)[h_slice] = x[x_slice] - lower``
    in a nonnegative cone.  The inner solver enforces the bound directly and
    returns its multiplier, so only the remaining blocks are augmented.
    """

    x_slice: slice
    h_slice: slice
    lower: np.ndarray


@dataclass
class VariationalProblem:
    """Evaluators of a constrained variational problem.

    ``F``, ``g``, ``gprime(x, dx)`` and ``gprime_adjoint(x, lam)`` are
    required.  ``Fprime(x, dx)`` is needed by the Newton solvers;
    ``second_order(x, lam, dx)`` returns ``(g''(x)[dx])^* lam`` and may be
    omitted when ``g`` is affine.  ``potential`` is the scalar function whose
    gradient is ``F`` when the problem comes from a minimization.
    """

    x_space: DiscreteSpace
    h_space: DiscreteSpace
    K: ConvexSet
    F: Callable
    g: Callable
    gprime: Callable
    gprime_adjoint: Callable
    Fprime: Optional[Callable] = None
    second_order: Optional[Callable] = None
    potential: Optional[Callable] = None
    exact_solution: Optional[KKTPair] = None
    explicit: Optional[ExplicitBound] = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.K.dim != self.h_space.dim:
            raise DimensionError("K", self.h_space.dim, self.K.dim)

    @property
    def penalty_mask(self):
        """1.0 on augmented constraint components, 0.0 on the explicit block."""
        m = np.ones(self.h_space.dim)
        if self.explicit is not None:
            m[self.explicit.h_slice] = 0.0
        return m

    def check_x(self, x):
        return self.x_space.check(x, "x")

    def check_lam(self, lam):
        return self.h_space.check(lam, "lambda")


@dataclass(frozen=True)
class ResidualReport:
    stationarity: float
    complementarity: float

    @property
    def sigma(self):
        return self.stationarity + self.complementarity


def _check_rho(rho):
    if not rho > 0:
        raise InvalidParameterError(f"penalty parameter must be positive, got {rho}")


def lagrangian(P, x, lam):
    """``F(x) + g'(x)^* lam``."""
    x = P.check_x(x)
    lam = P.check_lam(lam)
    return P.F(x) + P.gprime_adjoint(x, lam)


def sigma(P, x, lam):
    """KKT residual ``||L(x, lam)|| + ||g(x) - P_K(g(x) + lam)||``."""
    x = P.check_x(x)
    lam = P.check_lam(lam)
    gx = P.g(x)
    stat = P.x_space.norm(lagrangian(P, x, lam))
    comp = P.h_space.norm(gx - P.K.project(gx + lam, P.h_space))
    return ResidualReport(stat, comp)


def shifted_constraint(P, x, w, rho):
    """``(g(x), y, P_K(y))`` with ``y = g(x) + w / rho``."""
    gx = P.g(x)
    y = gx + w / rho
    return gx, y, P.K.project(y, P.h_space)


def multiplier_update(P, x, w, rho):
    """``rho * (y - P_K(y))`` with ``y = g(x) + w / rho``.

    On a problem with an explicit bound block those components are returned
    as zero; the solver fills them with the inner solver's bound multiplier.
    """
    _check_rho(rho)
    x = P.check_x(x)
    w = P.check_lam(w)
    _, y, py = shifted_constraint(P, x, w, rho)
    return rho * (y - py) * P.penalty_mask


def aug_lagrangian(P, x, w, rho):
    """``F(x) + rho g'(x)^* [y - P_K(y)]``, ``y = g(x) + w / rho``."""
    lam_plus = multiplier_update(P, x, w, rho)
    return P.F(x) + P.gprime_adjoint(x, lam_plus)


def bound_multiplier_term(P, x, mu):
    """``g'(x)^* mu`` for a multiplier supported on the explicit block."""
    lam = np.zeros(P.h_space.dim)
    lam[P.explicit.h_slice] = mu
    return P.gprime_adjoint(x, lam)


def utility_V(P, x, w, rho, mu=None):
    """Subproblem residual plus the feasibility-complementarity measure.

    With an explicit bound block, ``mu`` is that block's multiplier; it enters
    the stationarity term and the block's own complementarity residual.
    """
    _check_rho(rho)
    x = P.check_x(x)
    w = P.check_lam(w)
    mask = P.penalty_mask
    gx, y, py = shifted_constraint(P, x, w, rho)
    lam_plus = rho * (y - py) * mask
    r = P.F(x) + P.gprime_adjoint(x, lam_plus)
    feas = (gx - py) * mask
    if P.explicit is not None:
        mu = np.zeros(P.explicit.h_slice.stop - P.explicit.h_slice.start) if mu is None else mu
        r = r + bound_multiplier_term(P, x, mu)
        full = np.zeros(P.h_space.dim)
        full[P.explicit.h_slice] = mu
        z = gx + full
        feas = feas + (1.0 - mask) * (gx - P.K.project(z, P.h_space))
    return P.x_space.norm(r) + P.h_space.norm(feas)


def moreau_aug_lagrangian(P, x, w, rho):
    """Cone form ``F(x) + g'(x)^* P_{K°}(w + rho g(x))`` (K must be a cone)."""
    _check_rho(rho)
    return P.F(x) + P.gprime_adjoint(x, P.K.polar().project(w + rho * P.g(x), P.h_space))


def kkt_distance(P, x, lam):
    """``||x - x̄||_X + ||lam - λ̄||_H`` to the stored exact solution."""
    sol = P.exact_solution
    return P.x_space.norm(x - sol.x) + P.h_space.norm(lam - sol.lam)


def _random_unit(rng, space):
    v = rng.standard_normal(space.dim)
    return v / space.norm(v)


def adjoint_defect(P, x, rng, trials=5):
    """Largest relative mismatch of ``<g'(x)dx, l>_H`` and ``<dx, g'(x)^* l>_X``."""
    worst = 0.0
    for _ in range(trials):
        dx = _random_unit(rng, P.x_space)
        lam = _random_unit(rng, P.h_space)
        a = P.h_space.inner(P.gprime(x, dx), lam)
        b = P.x_space.inner(dx, P.gprime_adjoint(x, lam))
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return worst


def fprime_fd_defect(P, x, rng, trials=3):
    """Relative mismatch of ``F'(x)dx`` against central differences of ``F``."""
    worst = 0.0
    h = 1e-5 * (1.0 + P.x_space.norm(x))
    for _ in range(trials):
        dx = _random_unit(rng, P.x_space)
        fd = (P.F(x + h * dx) - P.F(x - h * dx)) / (2 * h)
        an = P.Fprime(x, dx)
        worst = max(worst, P.x_space.norm(fd - an) / max(P.x_space.norm(an), 1e-300))
    return worst


def gprime_fd_defect(P, x, rng, trials=3):
    worst = 0.0
    h = 1e-5 * (1.0 + P.x_space.norm(x))
    for _ in range(trials):
        dx = _random_unit(rng, P.x_space)
        fd = (P.g(x + h * dx) - P.g(x - h * dx)) / (2 * h)
        an = P.gprime(x, dx)
        worst = max(worst, P.h_space.norm(fd - an) / max(P.h_space.norm(an), 1e-300))
    return worst


def potential_fd_defect(P, x, rng, trials=3):
    """Relative mismatch of ``<F(x), dx>`` against differences of the potential."""
    worst = 0.0
    h = 1e-5 * (1.0 + P.x_space.norm(x))
    Fx = P.F(x)
    for _ in range(trials):
        dx = _random_unit(rng, P.x_space)
        fd = (P.potential(x + h * dx) - P.potential(x - h * dx)) / (2 * h)
        an = P.x_space.inner(Fx, dx)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return worst


def second_order_fd_defect(P, x, lam, rng, trials=3):
    """Mismatch of ``second_order`` against differences of ``x -> g'(x)^* lam``."""
    worst = 0.0
    h = 1e-5 * (1.0 + P.x_space.norm(x))
    for _ in range(trials):
        dx = _random_unit(rng, P.x_space)
        fd = (P.gprime_adjoint(x + h * dx, lam) - P.gprime_adjoint(x - h * dx, lam)) / (2 * h)
        an = P.second_order(x, lam, dx)
        worst = max(worst, P.x_space.norm(fd - an) / max(P.x_space.norm(an), 1e-12))
    return worst


__all__ = [
    "ExplicitBound",
    "KKTPair",
    "ResidualReport",
    "VariationalProblem",
    "adjoint_defect",
    "aug_lagrangian",
    "bound_multiplier_term",
    "fprime_fd_defect",
    "gprime_fd_defect",
    "kkt_distance",
    "lagrangian",
    "moreau_aug_lagrangian",
    "multiplier_update",
    "potential_fd_defect",
    "second_order_fd_defect",
    "shifted_constraint",
    "sigma",
    "utility_V",
]
