"""The Wasserstein-entropy-mass crop objective and its fixed-potential surrogate.

Two deliberately independent evaluations of the exact objective exist:
eval_F_exact computes W1(p, q_S) directly, eval_F_expanded routes through
the factorization into conditional distributions. Each is the other's
oracle. Both are test-scale only (they call the exact transport solver).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import Dist, _member_array, conditional, crop, entropy
from .transport import w1_exact


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveParams:
    """Entropy weight and log-mass weight, both in nats."""

    lam: float
    beta: float

    def __post_init__(self):
        for name, v in (("lam", self.lam), ("beta", self.beta)):
            if not (np.isfinite(v) and v >= 0.0):
                raise ObjectiveError(f"{name} must be finite and >= 0, got {v!r}")

    @property
    def c(self) -> float:
        """The mass-bonus coefficient beta - lam."""
        return self.beta - self.lam


@dataclass(frozen=True)
class ScoredPool:
    """Pool tokens with combined scores phi_i = f_i + lam * log p_i.

    Zero-probability tokens are excluded up front (their phi is -inf and
    they can never be selected); dropped counts how many were removed.
    """

    tokens: np.ndarray     # (k,) token ids
    probs: np.ndarray      # (k,) p_i > 0
    phi: np.ndarray        # (k,) combined scores
    potential: np.ndarray  # (k,) the f used
    lam: float
    dropped: int = 0

    def __post_init__(self):
        k = self.tokens.size
        if not (self.probs.size == k and self.phi.size == k and self.potential.size == k):
            raise ObjectiveError("scored pool arrays must share a length")
        if k == 0:
            raise ObjectiveError("scored pool is empty")
        if not np.isfinite(self.phi).all():
            raise ObjectiveError("phi must be finite on the pool")

    @property
    def size(self) -> int:
        return self.tokens.size


def combined_scores(p: Dist, pool, f, lam: float) -> ScoredPool:
    """Score pool tokens: phi_i = f_i + lam * log p_i.

    f[k] is the potential value of pool[k]. Tokens with p_i = 0 are dropped;
    carrying -inf through sorts would poison tie-breaking.
    """
    pool = np.asarray(pool, dtype=np.intp)
    f = np.asarray(f, dtype=np.float64)
    if f.shape != pool.shape:
        raise ObjectiveError(f"potential has {f.size} values for {pool.size} pool tokens")
    if not (np.isfinite(lam) and lam >= 0.0):
        raise ObjectiveError(f"lam must be finite and >= 0, got {lam!r}")
    probs = p.probs[pool]
    keep = probs > 0.0
    dropped = int((~keep).sum())
    pool, probs, f = pool[keep], probs[keep], f[keep]
    phi = f + lam * p.logprobs[pool]
    return ScoredPool(tokens=pool, probs=probs, phi=phi, potential=f, lam=lam, dropped=dropped)


def surrogate_constant(scored: ScoredPool) -> float:
    """C_f = sum_i p_i f_i, the S-independent offset of the surrogate bound.

    Equals the true constant when the pool covers the support of p
    (zero-probability tokens contribute nothing either way).
    """
    return float(np.dot(scored.probs, scored.potential))


def eval_G(scored: ScoredPool, S_indices, params: ObjectiveParams) -> float:
    """G_f(S) = (1/Gamma) sum_S p_i phi_i + (beta - lam) log Gamma.

    S_indices are positions into the pool. The surrogate lower bound is
    F >= surrogate_constant(scored) - eval_G(scored, S, params).
    """
    idx = np.asarray(S_indices, dtype=np.intp)
    if idx.size == 0:
        raise ObjectiveError("eval_G: empty subset")
    ps = scored.probs[idx]
    gamma = float(ps.sum())
    return float(np.dot(ps, scored.phi[idx]) / gamma + params.c * np.log(gamma))


def eval_F_exact(p: Dist, S, params: ObjectiveParams, metric) -> float:
    """F(S) = W1(p, q_S) + lam * H(q_S) - beta * log Gamma_S, exact W1."""
    S = _member_array(S)
    crop_rec, q = crop(p, S)
    w1, _ = w1_exact(p, q, metric)
    return float(w1 + params.lam * entropy(q) - params.beta * np.log(crop_rec.gamma))


def eval_F_expanded(p: Dist, S, params: ObjectiveParams, metric) -> float:
    """The factorized form of F(S).

    (1 - Gamma) * W1(p|S^c, p|S) + (lam - beta) log Gamma
    - (lam / Gamma) sum_S p_i log p_i.

    At Gamma = 1 the transport factor multiplies an empty complement and is
    defined as 0 (consistent with q_S = p there).
    """
    S = _member_array(S)
    if S.size == 0:
        raise ObjectiveError("eval_F_expanded: empty token set")
    gamma = float(p.probs[S].sum())
    if gamma <= 0.0:
        raise ObjectiveError("eval_F_expanded: crop has zero mass")
    comp = np.setdiff1d(np.arange(p.n), S)
    comp_mass = float(p.probs[comp].sum()) if comp.size else 0.0
    if comp.size == 0 or comp_mass <= 0.0:
        transport_term = 0.0
    else:
        inner, _ = w1_exact(conditional(p, comp), conditional(p, S), metric)
        transport_term = (1.0 - gamma) * inner
    pos = S[p.probs[S] > 0.0]
    plogp = float((p.probs[pos] * p.logprobs[pos]).sum())
    return float(transport_term + (params.lam - params.beta) * np.log(gamma)
                 - params.lam / gamma * plogp)
