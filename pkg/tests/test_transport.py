"""Exact transport oracle, dual feasibility, and the factorization."""

import numpy as np
import pytest

from topw.geometry import UniformMetric, build_metric
from topw.simplex import Dist, crop
from topw.transport import (
    TransportError,
    check_lipschitz,
    factorization_residual,
    kr_dual_gap,
    kr_optimal_potential,
    w1_exact,
    w1_uniform_metric,
)

from conftest import mixture_potential, random_dist, random_metric, random_subset, scaled_metric


def two_point_plan_oracle(pa, pb, qa, qb, d):
    """Exact 2x2 transport by endpoint enumeration.

    One free variable t = flow(a -> a) in [max(0, pa - qb), min(pa, qa)];
    the cost is linear in t, so the optimum sits at an endpoint.
    """
    lo, hi = max(0.0, pa - qb), min(pa, qa)

    def cost(t):
        return (pa - t) * d + (qa - t) * d  # off-diagonal flows pay d, diagonal pays 0

    return min(cost(lo), cost(hi))


class TestW1Exact:
    def test_identical_distributions(self, rng):
        p = random_dist(rng, 6)
        metric = random_metric(rng, 6)
        value, plan = w1_exact(p, p, metric)
        assert value == 0.0
        np.testing.assert_allclose(
            plan.flows, np.diag(p.probs[plan.source_tokens]), atol=1e-12
        )

    def test_two_point_hand_lp(self, rng):
        metric = random_metric(rng, 5)
        d = metric.distance(1, 3)
        a = 0.35
        P = np.zeros(5)
        P[1], P[3] = a, 1 - a
        Q = np.zeros(5)
        Q[1] = 1.0
        value, _ = w1_exact(Dist.from_probs(P), Dist.from_probs(Q), metric)
        assert value == pytest.approx((1 - a) * d, rel=1e-10)

    def test_two_by_two_against_endpoint_oracle(self, rng):
        for _ in range(25):
            metric = random_metric(rng, 4)
            pa = float(rng.uniform(0.05, 0.95))
            qa = float(rng.uniform(0.05, 0.95))
            P = np.zeros(4)
            P[0], P[2] = pa, 1 - pa
            Q = np.zeros(4)
            Q[0], Q[2] = qa, 1 - qa
            d = metric.distance(0, 2)
            value, _ = w1_exact(Dist.from_probs(P), Dist.from_probs(Q), metric)
            assert value == pytest.approx(
                two_point_plan_oracle(pa, 1 - pa, qa, 1 - qa, d), rel=1e-9, abs=1e-12
            )

    def test_uniform_metric_equals_closed_form(self, rng):
        p = random_dist(rng, 7)
        um = UniformMetric(7)
        for _ in range(10):
            S = random_subset(rng, 7)
            _, q = crop(p, S)
            value, _ = w1_exact(p, q, um)
            assert value == pytest.approx(w1_uniform_metric(p, S), abs=1e-9)

    def test_plan_marginals_and_cost(self, rng):
        p, q = random_dist(rng, 8), random_dist(rng, 8)
        metric = random_metric(rng, 8)
        value, plan = w1_exact(p, q, metric)
        assert plan.marginal_error(p.probs[plan.source_tokens], q.probs[plan.target_tokens]) <= 1e-9
        d = metric.pairwise(plan.source_tokens, plan.target_tokens)
        assert abs((plan.flows * d).sum() - value) <= 1e-9
        assert (plan.flows >= -1e-12).all()

    def test_oversized_support_rejected(self, rng):
        n = 70
        p, q = random_dist(rng, n), random_dist(rng, n)
        metric = random_metric(rng, n)
        with pytest.raises(TransportError, match="surrogate"):
            w1_exact(p, q, metric)

    def test_metric_scaling(self, rng):
        p, q = random_dist(rng, 6), random_dist(rng, 6)
        metric = random_metric(rng, 6)
        alpha = 2.5
        v1, _ = w1_exact(p, q, metric)
        v2, _ = w1_exact(p, q, scaled_metric(metric, alpha))
        assert v2 == pytest.approx(alpha * v1, rel=1e-9)


class TestUniformClosedForm:
    def test_full_vocab_zero(self, rng):
        p = random_dist(rng, 5)
        assert w1_uniform_metric(p, np.arange(5)) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        p = Dist.from_probs([0.5, 0.3, 0.2])
        assert w1_uniform_metric(p, [0]) == pytest.approx(0.5, abs=1e-15)

    def test_empty_rejected(self, rng):
        p = random_dist(rng, 4)
        with pytest.raises(TransportError):
            w1_uniform_metric(p, [])


class TestCheckLipschitz:
    def test_constant_is_feasible(self, rng):
        metric = random_metric(rng, 8)
        report = check_lipschitz(np.full(8, 3.3), metric, np.arange(8))
        assert report.ok and report.worst_pair is None

    def test_neg_dist_to_set_is_feasible(self, rng):
        metric = random_metric(rng, 12)
        for _ in range(5):
            S = random_subset(rng, 12)
            f = -np.array([metric.dist_to_set(i, S) for i in range(12)])
            assert check_lipschitz(f, metric, np.arange(12)).ok

    def test_doubled_distance_violates(self):
        # three collinear-ish points under the 0-1 metric: f = 2*d(., 0)
        # gives |f(1) - f(2)| = 0 but |f(1) - f(0)| = 2 > d = 1
        um = UniformMetric(3)
        f = 2.0 * np.array([um.distance(i, 0) for i in range(3)])
        report = check_lipschitz(f, um, np.arange(3))
        assert not report.ok
        assert 0 in report.worst_pair
        assert report.worst_excess == pytest.approx(1.0, abs=1e-8)

    def test_doubled_distance_violates_embedding_metric(self):
        # collinear embeddings: 0 at the origin-side, 1 in the middle, 2 far;
        # d(1,2) < d(1,0) + d(0,2) strictly, and 2*d(., 0) breaks the pair (1, 2)
        emb = np.array([[1.0, 0.02], [1.0, 0.5], [1.0, 1.0]])
        metric = build_metric(emb)
        f = 2.0 * np.array([metric.distance(i, 0) for i in range(3)])
        assert not check_lipschitz(f, metric, np.arange(3)).ok


class TestKRDualGap:
    def test_equal_distributions_zero_gap(self, rng):
        p = random_dist(rng, 6)
        metric = random_metric(rng, 6)
        f = mixture_potential(rng, metric, np.arange(6))
        assert kr_dual_gap(p, p, f, metric) == pytest.approx(0.0, abs=1e-9)

    def test_lp_dual_is_optimal(self, rng):
        for _ in range(10):
            p, q = random_dist(rng, 7), random_dist(rng, 7)
            metric = random_metric(rng, 7)
            tokens, f_sup = kr_optimal_potential(p, q, metric)
            f = np.zeros(7)
            f[tokens] = f_sup
            assert kr_dual_gap(p, q, f, metric) == pytest.approx(0.0, abs=1e-8)

    def test_constant_potential_gap_is_w1(self, rng):
        p, q = random_dist(rng, 6), random_dist(rng, 6)
        metric = random_metric(rng, 6)
        value, _ = w1_exact(p, q, metric)
        gap = kr_dual_gap(p, q, np.full(6, -2.0), metric)
        assert gap == pytest.approx(value, rel=1e-12)

    def test_infeasible_rejected_with_pair(self, rng):
        p, q = random_dist(rng, 5), random_dist(rng, 5)
        metric = random_metric(rng, 5)
        f = np.zeros(5)
        f[0] = 100.0
        with pytest.raises(TransportError, match="Lipschitz"):
            kr_dual_gap(p, q, f, metric)

    def test_weak_duality_property(self, rng):
        for _ in range(40):
            n = int(rng.integers(3, 10))
            p, q = random_dist(rng, n), random_dist(rng, n)
            metric = random_metric(rng, n)
            f = mixture_potential(rng, metric, np.arange(n))
            assert kr_dual_gap(p, q, f, metric) >= -1e-9


class TestFactorization:
    def test_one_hot_conditionals(self, rng):
        # p supported on two tokens, S keeps one: both conditionals are
        # one-hot and both sides equal (1 - Gamma) * d(i, j)
        metric = random_metric(rng, 6)
        P = np.zeros(6)
        P[1], P[4] = 0.6, 0.4
        p = Dist.from_probs(P)
        assert factorization_residual(p, [4], metric) <= 1e-10
        _, q = crop(p, [4])
        lhs, _ = w1_exact(p, q, metric)
        assert lhs == pytest.approx(0.6 * metric.distance(1, 4), rel=1e-9)

    def test_random_instances(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 9))
            p = random_dist(rng, n)
            S = random_subset(rng, n, max_size=n - 1)
            metric = random_metric(rng, n)
            assert factorization_residual(p, S, metric) <= 1e-8

    def test_uniform_metric_reduces_to_mass(self, rng):
        p = random_dist(rng, 8)
        S = random_subset(rng, 8, max_size=7)
        assert factorization_residual(p, S, UniformMetric(8)) <= 1e-10

    def test_gamma_one_rejected(self, rng):
        p = random_dist(rng, 5)
        metric = random_metric(rng, 5)
        with pytest.raises(TransportError, match="0 < Gamma < 1"):
            factorization_residual(p, np.arange(5), metric)

    def test_gamma_zero_rejected(self):
        p = Dist.from_probs([1.0, 0.0, 0.0])
        metric = UniformMetric(3)
        with pytest.raises(TransportError):
            factorization_residual(p, [1], metric)
