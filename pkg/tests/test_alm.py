import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from augvi.alm import (
    CONVERGED,
    INNER_FAILURE,
    MAX_OUTER,
    IterationHistory,
    IterationRecord,
    SolverConfig,
    check_history_laws,
    estimate_rate,
    penalty_decision,
    solve,
)
from augvi.errors import InsufficientDataError, InvalidParameterError
from augvi.sets import Box
from augvi.vi_core import multiplier_update
from augvi.zoo import box_qp, nash_control, param_estimation, poisson_control, scalar_qp

CFG = SolverConfig()


def fake_history(rhos, sigmas, Vs=None, cfg=CFG, status=CONVERGED):
    Vs = Vs or [math.nan] * len(rhos)
    recs = [IterationRecord(k=k, rho=r, sigma=s, V=v) for k, (r, s, v) in enumerate(zip(rhos, sigmas, Vs))]
    return IterationHistory(records=recs, status=status, x=np.zeros(1), lam=np.zeros(1), cfg=cfg)


@pytest.fixture(scope="module")
def poisson32():
    inst = poisson_control(32)
    return inst, solve(inst.problem)


class TestSolverConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"rho0": 0.0},
            {"gamma": 1.0},
            {"tau": 0.0},
            {"tau": 1.0},
            {"outer_tol": 0.0},
            {"inner_tol": -1.0},
            {"inner_tol_mode": "adaptive"},
            {"max_outer": -1},
            {"penalty_test_start": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            SolverConfig(**kw)

    def test_defaults(self):
        assert (CFG.rho0, CFG.gamma, CFG.tau, CFG.outer_tol, CFG.inner_tol) == (1.0, 10.0, 0.5, 1e-8, 1e-10)
        assert (CFG.max_outer, CFG.max_inner, CFG.penalty_test_start) == (100, 200, 1)

    def test_forcing_tolerance(self):
        cfg = SolverConfig(inner_tol_mode="forcing", inner_tol=1e-3, z0=0.1, theta=0.9)
        np.testing.assert_allclose(cfg.inner_tolerance(2, 1e-2), 0.1 * 0.81 * 1e-2)
        assert cfg.inner_tolerance(0, 1.0) == 1e-3


class TestPenaltyDecision:
    def test_first_iteration_always_keeps(self):
        assert penalty_decision(100.0, 1.0, 0, 3.0, CFG) == 3.0

    def test_sufficient_decrease_keeps(self):
        assert penalty_decision(0.4, 1.0, 1, 2.0, CFG) == 2.0

    def test_insufficient_decrease_raises(self):
        assert penalty_decision(0.6, 1.0, 1, 2.0, CFG) == 20.0

    def test_boundary_keeps(self):
        assert penalty_decision(0.5, 1.0, 5, 1.0, CFG) == 1.0

    def test_delayed_test_start(self):
        cfg = SolverConfig(penalty_test_start=2)
        assert penalty_decision(0.6, 1.0, 1, 1.0, cfg) == 1.0
        assert penalty_decision(0.6, 1.0, 2, 1.0, cfg) == 10.0

    @given(st.floats(0, 1e6), st.floats(1e-12, 1e6), st.integers(1, 50), st.floats(1e-3, 1e3))
    def test_result_is_rho_or_gamma_rho(self, Vn, Vo, k, rho):
        out = penalty_decision(Vn, Vo, k, rho, CFG)
        assert out == (rho if Vn <= 0.5 * Vo else 10.0 * rho)


class TestSolveSmall:
    def test_scalar_qp(self):
        inst = scalar_qp()
        h = solve(inst.problem, x0=np.zeros(1), lam0=np.zeros(1))
        assert h.status == CONVERGED
        np.testing.assert_allclose(h.x, [0.0], atol=1e-8)
        np.testing.assert_allclose(h.lam, [1.0], atol=1e-8)
        assert h.final_sigma <= 1e-8

    def test_exact_start_terminates_at_zero(self):
        inst = box_qp(10, seed=7)
        sol = inst.exact_solution
        h = solve(inst.problem, x0=sol.x, lam0=sol.lam)
        assert h.status == CONVERGED and len(h.records) == 1
        assert h.records[0].k == 0 and h.records[0].sigma <= CFG.outer_tol

    @pytest.mark.parametrize("dim, seed", [(1, 0), (5, 1), (10, 7), (30, 2)])
    def test_box_qp_reaches_oracle(self, dim, seed):
        inst = box_qp(dim, seed=seed)
        h = solve(inst.problem)
        assert h.status == CONVERGED
        np.testing.assert_allclose(h.x, inst.exact_solution.x, atol=1e-7)
        assert check_history_laws(h).ok

    def test_multipliers_follow_update(self):
        inst = box_qp(6, seed=4)
        P = inst.problem
        cfg = SolverConfig()
        h = solve(P, cfg)
        # replay the last step from x^k, lam^{k-1}
        B = Box.uniform(6, -1e6, 1e6)
        prev = solve(P, SolverConfig(max_outer=len(h.records) - 2))
        w = B.project(prev.lam)
        np.testing.assert_allclose(h.lam, multiplier_update(P, h.x, w, h.records[-2].rho), atol=1e-14)

    def test_max_outer(self):
        h = solve(poisson_control(16).problem, SolverConfig(max_outer=2))
        assert h.status == MAX_OUTER and len(h.records) == 3

    def test_inner_failure_after_retry(self):
        h = solve(poisson_control(16).problem, SolverConfig(max_inner=1))
        assert h.status == INNER_FAILURE
        assert h.records[-1].inner_retry
        assert h.records[-1].rho == 10.0
        assert h.message

    def test_V_plus_eps_dominates_sigma(self, poisson32):
        _, h = poisson32
        for r in h.records[1:]:
            assert r.V + r.eps >= r.sigma


class TestSolveProperties:
    def test_runs_are_deterministic(self, poisson32):
        inst, h = poisson32
        h2 = solve(inst.problem)
        assert [(r.rho, r.sigma, r.V, r.dist) for r in h.records] == [
            (r.rho, r.sigma, r.V, r.dist) for r in h2.records
        ]
        np.testing.assert_array_equal(h.x, h2.x)

    def test_safeguard_inactive_changes_nothing(self, poisson32):
        inst, h = poisson32
        h2 = solve(inst.problem, SolverConfig(safeguard=False))
        assert [r.sigma for r in h.records] == [r.sigma for r in h2.records]

    def test_laws_hold(self, poisson32):
        _, h = poisson32
        rep = check_history_laws(h)
        assert rep.ok, str(rep)
        assert h.records[-1].feasibility <= 1e-8

    def test_penalty_rule_in_record(self, poisson32):
        _, h = poisson32
        rhos = h.rhos
        assert rhos[0] == rhos[1]
        for a, b in zip(rhos, rhos[1:]):
            assert b in (a, 10.0 * a)

    @pytest.mark.parametrize("make", [lambda: poisson_control(16), lambda: nash_control(16), lambda: box_qp(12, seed=5)])
    def test_forcing_mode(self, make):
        inst = make()
        cfg = SolverConfig(inner_tol_mode="forcing", z0=0.1, theta=0.9)
        h = solve(inst.problem, cfg)
        assert h.status == CONVERGED
        for prev, cur in zip(h.records, h.records[1:]):
            assert cur.eps <= cfg.forcing_factor(prev.k) * prev.sigma * (1 + 1e-15)
        assert check_history_laws(h).ok

    def test_partial_penalization_run(self):
        inst = param_estimation(64)
        h = solve(inst.problem, SolverConfig(**inst.config))
        assert h.status == CONVERGED
        q = h.x[inst.problem.explicit.x_slice]
        assert np.all(q >= 0.1)
        assert check_history_laws(h).ok


class TestEstimateRate:
    def test_geometric(self):
        h = fake_history([1.0] * 10, [0.5**k for k in range(10)], cfg=SolverConfig(outer_tol=1e-12))
        est = estimate_rate(h)
        np.testing.assert_allclose(est.q, 0.5, rtol=1e-12)
        assert est.rho == 1.0

    def test_uses_final_constant_segment(self):
        sig = [1.0, 0.5, 0.25, 0.1, 0.01, 1e-3, 1e-4, 1e-5]
        h = fake_history([1, 1, 1, 10, 10, 10, 10, 10], sig, cfg=SolverConfig(outer_tol=1e-12))
        est = estimate_rate(h)
        np.testing.assert_allclose(est.q, 0.1, rtol=1e-12)
        assert est.rho == 10 and est.ks[0] == 3

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            estimate_rate(fake_history([1.0, 10.0], [1.0, 0.1]))

    def test_poisson_tail(self, poisson32):
        _, h = poisson32
        q, c1 = estimate_rate(h)
        assert 0.05 <= q <= 0.2 and c1 > 0


class TestHistoryLaws:
    def test_wrong_jump_factor(self):
        h = fake_history([1.0, 1.0, 2.0], [1.0, 0.5, 0.1], Vs=[math.nan, 1.0, 0.9])
        rep = check_history_laws(h)
        assert any(law == "i" for law, _, _ in rep.violations)
        assert "law i" in str(rep)

    def test_decrease_flagged(self):
        rep = check_history_laws(fake_history([10.0, 1.0], [1.0, 0.5]))
        assert [law for law, _, _ in rep.violations] == ["i"]

    def test_kept_despite_failed_test(self):
        h = fake_history([1.0, 1.0, 1.0], [1.0, 0.5, 0.4], Vs=[math.nan, 1.0, 0.9])
        rep = check_history_laws(h)
        assert ("ii", 2) in [(law, k) for law, k, _ in rep.violations]

    def test_consistent_history(self):
        h = fake_history([1.0, 1.0, 1.0, 10.0], [1.0, 0.5, 0.2, 0.01], Vs=[math.nan, 1.0, 0.4, 0.3])
        rep = check_history_laws(h)
        assert rep.ok, str(rep)
