"""Shared builders for random metrics, distributions, and feasible potentials."""

import numpy as np
import pytest

from topw.geometry import TokenMetric, build_metric
from topw.simplex import Dist


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_metric(rng, n, m=4, scale=1.0):
    emb = rng.normal(size=(n, m)) * scale
    return build_metric(emb)


def random_dist(rng, n, alpha=1.0, with_zeros=False):
    probs = rng.dirichlet(np.full(n, alpha))
    if with_zeros and n > 2:
        kill = rng.choice(n, size=max(1, n // 4), replace=False)
        probs[kill] = 0.0
        probs /= probs.sum()
    return Dist.from_probs(probs)


def random_subset(rng, n, min_size=1, max_size=None):
    max_size = n if max_size is None else max_size
    k = int(rng.integers(min_size, max_size + 1))
    return np.sort(rng.choice(n, size=k, replace=False))


def mixture_potential(rng, metric, tokens, n_anchors=3):
    """A random 1-Lipschitz potential: convex-style mixture of +/- distance
    to random anchor sets, with coefficient magnitudes summing to <= 1."""
    tokens = np.asarray(tokens)
    coefs = rng.uniform(-1.0, 1.0, size=n_anchors)
    total = np.abs(coefs).sum()
    if total > 1.0:
        coefs /= total
    f = np.zeros(tokens.size)
    from topw.geometry import batched_dist_to_set

    for c in coefs:
        anchors = rng.choice(tokens, size=int(rng.integers(1, tokens.size + 1)), replace=False)
        f += c * batched_dist_to_set(metric, tokens, anchors)
    return f


def anchored_mixture_potential(rng, metric, pool, S):
    """Anchored feasible potential: t * dist(., S) with |t| <= 1."""
    from topw.geometry import batched_dist_to_set

    t = float(rng.uniform(-1.0, 1.0))
    return t * batched_dist_to_set(metric, np.asarray(pool), np.asarray(S))


def scaled_metric(metric: TokenMetric, alpha: float) -> TokenMetric:
    """A metric whose distances are exactly alpha times the original's."""
    return TokenMetric(
        whitened=metric.whitened * alpha,
        scale=metric.scale,
        mean=metric.mean,
        epsilon=metric.epsilon,
    )
