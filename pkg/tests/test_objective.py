"""Objective evaluation: exact, factorized, and surrogate forms."""

import math

import numpy as np
import pytest

from topw.geometry import UniformMetric
from topw.objective import (
    ObjectiveError,
    ObjectiveParams,
    combined_scores,
    eval_F_exact,
    eval_F_expanded,
    eval_G,
    surrogate_constant,
)
from topw.simplex import Dist, entropy
from topw.transport import w1_exact

from conftest import (
    mixture_potential,
    random_dist,
    random_metric,
    random_subset,
    scaled_metric,
)


class TestParams:
    def test_rejects_negative(self):
        with pytest.raises(ObjectiveError):
            ObjectiveParams(lam=-0.1, beta=1.0)
        with pytest.raises(ObjectiveError):
            ObjectiveParams(lam=0.1, beta=-1.0)
        with pytest.raises(ObjectiveError):
            ObjectiveParams(lam=np.inf, beta=1.0)

    def test_c(self):
        assert ObjectiveParams(lam=2.2, beta=2.8).c == pytest.approx(0.6, abs=1e-15)


class TestCombinedScores:
    def test_lambda_zero_is_potential(self, rng):
        p = random_dist(rng, 6)
        f = rng.normal(size=6)
        scored = combined_scores(p, np.arange(6), f, 0.0)
        np.testing.assert_array_equal(scored.phi, f)

    def test_zero_potential_orders_by_probability(self, rng):
        p = random_dist(rng, 8)
        scored = combined_scores(p, np.arange(8), np.zeros(8), 1.5)
        assert np.array_equal(np.argsort(-scored.phi), np.argsort(-scored.probs))

    def test_scalar_oracle_values(self):
        # scalar arithmetic: phi_i = f_i + 2.2 * ln(p_i)
        p = Dist.from_probs([0.5, 0.3, 0.2])
        f = np.array([-0.2, 0.0, -1.5])
        scored = combined_scores(p, np.arange(3), f, 2.2)
        oracle = [
            -0.2 + 2.2 * math.log(0.5),  # -1.7249237972318796
            0.0 + 2.2 * math.log(0.3),   # -2.6487401695170596
            -1.5 + 2.2 * math.log(0.2),  # -5.040763407355021
        ]
        np.testing.assert_allclose(scored.phi, oracle, rtol=1e-14)
        np.testing.assert_allclose(
            scored.phi, [-1.7249237972318796, -2.6487401695170596, -5.040763407355021],
            rtol=1e-12,
        )

    def test_zero_prob_tokens_dropped_with_count(self):
        p = Dist.from_probs([0.6, 0.0, 0.4, 0.0])
        scored = combined_scores(p, np.arange(4), np.zeros(4), 1.0)
        assert scored.dropped == 2
        np.testing.assert_array_equal(scored.tokens, [0, 2])
        assert np.isfinite(scored.phi).all()

    def test_length_mismatch_rejected(self, rng):
        p = random_dist(rng, 4)
        with pytest.raises(ObjectiveError):
            combined_scores(p, np.arange(4), np.zeros(3), 1.0)


class TestEvalF:
    def test_full_vocab_is_lambda_entropy(self, rng):
        p = random_dist(rng, 6)
        metric = random_metric(rng, 6)
        params = ObjectiveParams(lam=2.2, beta=2.8)
        F = eval_F_exact(p, np.arange(6), params, metric)
        assert F == pytest.approx(2.2 * entropy(p), rel=1e-12)

    def test_singleton_form(self, rng):
        p = random_dist(rng, 5)
        metric = random_metric(rng, 5)
        params = ObjectiveParams(lam=1.3, beta=0.8)
        i = 2
        F = eval_F_exact(p, [i], params, metric)
        onehot = np.zeros(5)
        onehot[i] = 1.0
        w1, _ = w1_exact(p, Dist.from_probs(onehot), metric)
        assert F == pytest.approx(w1 - 0.8 * math.log(p.probs[i]), rel=1e-12)

    def test_exact_vs_expanded_mutual_oracle(self, rng):
        params_pool = [
            ObjectiveParams(0.0, 0.0),
            ObjectiveParams(2.2, 2.8),
            ObjectiveParams(1.0, 0.3),
        ]
        for _ in range(50):
            n = int(rng.integers(2, 7))
            p = random_dist(rng, n)
            S = random_subset(rng, n)
            metric = random_metric(rng, n)
            params = params_pool[int(rng.integers(len(params_pool)))]
            a = eval_F_exact(p, S, params, metric)
            b = eval_F_expanded(p, S, params, metric)
            assert abs(a - b) <= 1e-9

    def test_expanded_gamma_one(self, rng):
        p = random_dist(rng, 6)
        metric = random_metric(rng, 6)
        params = ObjectiveParams(lam=1.7, beta=0.4)
        F = eval_F_expanded(p, np.arange(6), params, metric)
        assert F == pytest.approx(1.7 * entropy(p), rel=1e-12)

    def test_uniform_metric_closed_form(self, rng):
        # geometry disappears under the 0-1 metric:
        # F = (1 - G) + (lam - beta) log G - (lam / G) sum_S p log p
        p = random_dist(rng, 7)
        um = UniformMetric(7)
        params = ObjectiveParams(lam=1.1, beta=0.5)
        for _ in range(10):
            S = random_subset(rng, 7)
            gamma = p.probs[S].sum()
            plogp = float((p.probs[S] * p.logprobs[S]).sum())
            closed = (1 - gamma) + (params.lam - params.beta) * math.log(gamma) \
                - params.lam / gamma * plogp
            assert eval_F_exact(p, S, params, um) == pytest.approx(closed, abs=1e-12)
            assert eval_F_expanded(p, S, params, um) == pytest.approx(closed, abs=1e-12)

    def test_scale_invariance_absorption(self, rng):
        # F under alpha*d with params (alpha*lam, alpha*beta) equals
        # alpha * F under d with (lam, beta)
        alpha = 3.0
        for _ in range(10):
            n = int(rng.integers(2, 7))
            p = random_dist(rng, n)
            S = random_subset(rng, n)
            metric = random_metric(rng, n)
            params = ObjectiveParams(lam=1.2, beta=0.7)
            scaled_params = ObjectiveParams(lam=alpha * 1.2, beta=alpha * 0.7)
            F1 = eval_F_exact(p, S, params, metric)
            F2 = eval_F_exact(p, S, scaled_params, scaled_metric(metric, alpha))
            assert F2 == pytest.approx(alpha * F1, rel=1e-9, abs=1e-9)


class TestEvalG:
    def test_singleton_matches_collapse_formula(self, rng):
        p = random_dist(rng, 6)
        metric = random_metric(rng, 6)
        f = mixture_potential(rng, metric, np.arange(6))
        params = ObjectiveParams(lam=1.4, beta=0.9)
        scored = combined_scores(p, np.arange(6), f, params.lam)
        for i in range(scored.size):
            got = eval_G(scored, [i], params)
            want = scored.phi[i] + params.c * math.log(scored.probs[i])
            assert got == pytest.approx(want, rel=1e-12)

    def test_beta_equals_lambda_weighted_mean(self, rng):
        p = random_dist(rng, 6)
        f = rng.normal(size=6)
        params = ObjectiveParams(lam=1.0, beta=1.0)
        scored = combined_scores(p, np.arange(6), f, 1.0)
        idx = [0, 2, 4]
        got = eval_G(scored, idx, params)
        ps = scored.probs[idx]
        want = float(np.dot(ps, scored.phi[idx]) / ps.sum())
        assert got == pytest.approx(want, rel=1e-12)

    def test_surrogate_lower_bound(self, rng):
        # C_f - G_f(S) <= F(S) for every feasible potential
        for _ in range(30):
            n = int(rng.integers(2, 7))
            p = random_dist(rng, n)
            S = random_subset(rng, n)
            metric = random_metric(rng, n)
            params = ObjectiveParams(lam=float(rng.uniform(0, 3)), beta=float(rng.uniform(0, 3)))
            f = mixture_potential(rng, metric, np.arange(n))
            scored = combined_scores(p, np.arange(n), f, params.lam)
            pos_map = {int(t): k for k, t in enumerate(scored.tokens)}
            S_in_pool = [pos_map[int(t)] for t in S if int(t) in pos_map]
            if not S_in_pool:
                continue
            F = eval_F_exact(p, S, params, metric)
            bound = surrogate_constant(scored) - eval_G(scored, S_in_pool, params)
            assert bound <= F + 1e-9

    def test_empty_subset_rejected(self, rng):
        p = random_dist(rng, 4)
        scored = combined_scores(p, np.arange(4), np.zeros(4), 1.0)
        with pytest.raises(ObjectiveError):
            eval_G(scored, [], ObjectiveParams(1.0, 1.0))
