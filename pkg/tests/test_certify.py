import math

import numpy as np
import pytest

from helpers import pair_within, simplex_vertices
from qdp.certify import (
    REASON_NO_NOISE,
    REASON_SLACK,
    REASON_ZERO_RUNNER_UP,
    binary_ratio_certify_exact,
    binary_ratio_radius_bounds,
    certify_finite,
    certify_infinite,
    dp_ratio_check,
    epsilon_budget,
    max_certified_radius,
    max_trace_radius,
)
from qdp.circuits import build_qnn_ansatz, with_noise
from qdp.classify import ScoreVector, ShotEstimate, predict
from qdp.qcore import Povm, computational_povm


def proj(i):
    p = np.zeros((2, 2), dtype=complex)
    p[i, i] = 1.0
    return p


class TestEpsilonBudget:
    def test_reported_budget_constants(self):
        # e^eps for (p, tau, d): 1.04, 1.36, 1.40 and squared thresholds
        cases = [
            (0.5, 0.02, 1.04, 1.0816),
            (0.1, 0.02, 1.36, 1.8496),
            (0.5, 0.2, 1.40, 1.96),
        ]
        for p, tau, exp_eps, threshold in cases:
            b = epsilon_budget(p, tau, 2)
            assert b.exp_epsilon == pytest.approx(exp_eps, abs=1e-12)
            assert b.exp_epsilon**2 == pytest.approx(threshold, abs=1e-12)
            assert b.epsilon == pytest.approx(math.log(exp_eps), abs=1e-12)

    def test_zero_radius_means_zero_budget(self):
        assert epsilon_budget(0.3, 0.0, 4).epsilon == 0.0

    def test_rejects_p_zero(self):
        with pytest.raises(ValueError, match="p = 0"):
            epsilon_budget(0.0, 0.1, 2)

    def test_rejects_p_one_and_small_dim(self):
        with pytest.raises(ValueError):
            epsilon_budget(1.0, 0.1, 2)
        with pytest.raises(ValueError):
            epsilon_budget(0.5, 0.1, 1)

    def test_threshold_monotonicity(self):
        # noise helps; radius and measured dimension hurt
        taus = np.linspace(0.01, 0.5, 8)
        ps = np.linspace(0.05, 0.95, 8)
        for tau in taus:
            eps = [epsilon_budget(p, tau, 2).exp_epsilon for p in ps]
            assert all(a > b for a, b in zip(eps, eps[1:]))
        for p in ps:
            eps = [epsilon_budget(p, tau, 2).exp_epsilon for tau in taus]
            assert all(a < b for a, b in zip(eps, eps[1:]))
            assert epsilon_budget(p, 0.1, 4).epsilon > epsilon_budget(p, 0.1, 2).epsilon


class TestMaxTraceRadius:
    def test_inverts_the_reported_budget(self):
        assert max_trace_radius(0.5, math.log(1.04), 2) == pytest.approx(
            0.02, abs=1e-12
        )

    def test_zero_budget_zero_radius(self):
        assert max_trace_radius(0.3, 0.0, 2) == 0.0

    def test_round_trip(self):
        for p in (0.1, 0.5, 0.9):
            for tau in (0.0, 0.02, 0.3, 1.0):
                for d in (2, 4):
                    eps = epsilon_budget(p, tau, d).epsilon
                    assert max_trace_radius(p, eps, d) == pytest.approx(
                        tau, abs=1e-12
                    )

    def test_monotone_in_p(self):
        radii = [max_trace_radius(p, 0.3, 2) for p in np.linspace(0.05, 0.95, 10)]
        assert all(a < b for a, b in zip(radii, radii[1:]))


class TestCertifyInfinite:
    def test_reported_decisions(self):
        cases = [(1.20, 0.5, 0.02, True), (1.38, 0.1, 0.02, False),
                 (1.20, 0.5, 0.2, False)]
        for ratio, p, tau, expected in cases:
            scores = ScoreVector([ratio / (1 + ratio), 1 / (1 + ratio)])
            cert = certify_infinite(scores, 0, p, tau, 2)
            assert cert.certified is expected
            assert cert.confidence == 1.0

    def test_zero_runner_up_is_flagged_certified(self):
        cert = certify_infinite(ScoreVector([1.0, 0.0]), 0, 0.5, 0.02, 2)
        assert cert.certified and cert.reason == REASON_ZERO_RUNNER_UP

    def test_p_zero_not_certifiable(self):
        cert = certify_infinite(ScoreVector([0.9, 0.1]), 0, 0.0, 0.02, 2)
        assert not cert.certified and cert.reason == REASON_NO_NOISE

    def test_serialises_with_spec_fields(self):
        doc = certify_infinite(ScoreVector([0.6, 0.4]), 0, 0.5, 0.02, 2).to_dict()
        assert {"mode", "certified", "tau_d", "B", "threshold", "epsilon",
                "exp_epsilon", "p", "d_meas", "confidence"} <= set(doc)


class TestCertifyFinite:
    def test_worked_example(self):
        est = ShotEstimate([2760, 2240], 5000)  # estimates 0.552 / 0.448
        cert = certify_finite(est, 0, 0.01, 0.5, 0.02, 2)
        assert cert.score_ratio == pytest.approx(1.1834061135371179, abs=1e-12)
        assert cert.certified
        assert cert.confidence == pytest.approx(0.26424111765711536, abs=1e-12)

    def test_slack_swallowing_estimate_gets_status(self):
        est = ShotEstimate([30, 70], 100)
        cert = certify_finite(est, 0, 0.4, 0.5, 0.02, 2)
        assert not cert.certified and cert.reason == REASON_SLACK

    def test_extreme_estimate_certifies_when_threshold_allows(self):
        est = ShotEstimate([100, 0], 100)
        slack = 0.05
        cert = certify_finite(est, 0, slack, 0.5, 0.02, 2)
        assert cert.score_ratio == pytest.approx((1 - slack) / slack)
        assert cert.certified  # threshold 1.0816 < 19

    def test_rejects_bad_slack(self):
        est = ShotEstimate([60, 40], 100)
        for zeta in (0.0, 0.5, -0.1):
            with pytest.raises(ValueError):
                certify_finite(est, 0, zeta, 0.5, 0.02, 2)


class TestMaxCertifiedRadius:
    def test_no_gap_no_radius(self):
        assert max_certified_radius(ScoreVector([0.5, 0.5]), 0.5, 2) == 0.0

    def test_worked_example(self):
        r = max_certified_radius(ScoreVector([0.6, 0.4]), 0.5, 2)
        assert r == pytest.approx(0.11237243569579452, abs=1e-12)

    def test_boundary_consistency_with_certifier(self):
        rng = np.random.default_rng(61)
        for _ in range(30):
            y = rng.dirichlet(np.ones(2))
            if abs(y[0] - y[1]) < 1e-3:
                continue
            scores = ScoreVector(y)
            p = float(rng.uniform(0.05, 0.95))
            r = max_certified_radius(scores, p, 2)
            if r == 0.0 or r > 1.0:
                continue
            label = predict(scores)
            assert certify_infinite(scores, label, p, r * (1 - 1e-9), 2).certified
            if r * (1 + 1e-9) <= 1.0:
                assert not certify_infinite(
                    scores, label, p, r * (1 + 1e-9), 2
                ).certified

    def test_monotone_in_p(self):
        scores = ScoreVector([0.7, 0.3])
        radii = [max_certified_radius(scores, p, 2) for p in np.linspace(0.1, 0.9, 9)]
        assert all(a < b for a, b in zip(radii, radii[1:]))


class TestBinaryRatioBounds:
    def test_exact_inequality_worked_example(self):
        # LHS = 0.2222..., RHS = 0.0816 at (B=1.5, p=0.5, tau=0.02)
        assert binary_ratio_certify_exact(1.5, 0.5, 0.02)

    def test_zero_radius_always_true(self):
        for b in (1.001, 2.0, 50.0):
            assert binary_ratio_certify_exact(b, 0.3, 0.0)

    def test_vanishing_gap_fails(self):
        assert not binary_ratio_certify_exact(1.0001, 0.5, 0.01)

    def test_closed_form_values(self):
        bounds = binary_ratio_radius_bounds(1.5, 0.8)
        assert bounds["linear_bound"] == pytest.approx(1 / 24, abs=1e-12)
        bounds = binary_ratio_radius_bounds(1.5, 0.4)
        assert bounds["quadratic_bound"] == pytest.approx(
            0.12309149097933273, abs=1e-12
        )

    def test_unit_ratio_gives_zero_bounds(self):
        bounds = binary_ratio_radius_bounds(1.0, 0.5)
        assert bounds["linear_bound"] == 0.0
        assert bounds["quadratic_bound"] == 0.0

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            binary_ratio_certify_exact(0.9, 0.5, 0.1)
        with pytest.raises(ValueError):
            binary_ratio_radius_bounds(1.5, 0.0)


class TestDpRatioCheck:
    def test_identical_states_pass(self):
        rng = np.random.default_rng(67)
        circ = with_noise(build_qnn_ansatz(2, 1), [(2, 0.4)])
        theta = rng.uniform(0, 2 * np.pi, circ.param_count)
        rho, _ = pair_within(rng, 4, 0.1)
        budget = epsilon_budget(0.4, 0.05, 2)
        povm = Povm((proj(0), proj(1)), 2, 0)
        assert dp_ratio_check(circ, theta, povm, rho, rho, budget)

    def test_randomized_soundness(self):
        rng = np.random.default_rng(71)
        povm = Povm((proj(0), proj(1)), 2, 0)
        for p in (0.1, 0.5, 0.9):
            circ = with_noise(build_qnn_ansatz(2, 1), [(1, p)])
            tau = 0.1
            budget = epsilon_budget(p, tau, 2)
            for _ in range(40):
                theta = rng.uniform(0, 2 * np.pi, circ.param_count)
                sigma, rho = pair_within(rng, 4, tau)
                assert dp_ratio_check(circ, theta, povm, sigma, rho, budget)


class TestPolytopeSoundness:
    def test_certified_scores_never_flip_inside_dp_polytope(self):
        """Direct optimization over the DP-feasible score polytope.

        For certified instances, maximize (max_{k != C} y'_k - y'_C) over
        {e^-eps y_k <= y'_k <= e^eps y_k, sum y' = 1} by vertex
        enumeration; the maximum must stay negative.
        """
        rng = np.random.default_rng(73)
        checked = 0
        while checked < 60:
            k = int(rng.integers(2, 4))
            y = rng.dirichlet(np.ones(k))
            p = float(rng.uniform(0.1, 0.9))
            tau = float(rng.uniform(0.0, 0.3))
            noisy = y * (1 - p) + p / k
            scores = ScoreVector(noisy)
            label = predict(scores)
            cert = certify_infinite(scores, label, p, tau, max(2, k))
            if not cert.certified or cert.reason:
                continue
            checked += 1
            eps = cert.epsilon
            lower = noisy * math.exp(-eps)
            upper = noisy * math.exp(eps)
            worst = -np.inf
            for v in simplex_vertices(lower, upper):
                worst = max(worst, np.max(np.delete(v, label)) - v[label])
            assert worst < 0.0, (noisy, p, tau)
