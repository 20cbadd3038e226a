"""Probability vectors, crops, and the cropped-entropy identity.

All entropies and log-probabilities use the natural logarithm; the crop
objective mixes log-mass and entropy terms, so a single base everywhere is
required for the algebra to close. Zero-probability tokens carry logprob
-inf, and every 0*log(0) is taken as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SimplexError(ValueError):
    """Invalid distribution or crop request."""


_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Dist:
    """A probability vector with log-domain access."""

    probs: np.ndarray     # (n,) nonnegative, sums to 1
    logprobs: np.ndarray  # (n,) log(probs), -inf where probs == 0

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def from_probs(cls, probs) -> "Dist":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise SimplexError("probs must be a nonempty 1-D vector")
        if not np.isfinite(probs).all() or (probs < 0).any():
            raise SimplexError("probs must be finite and nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > _SUM_TOL:
            raise SimplexError(f"probs sum to {total!r}, outside 1 +/- {_SUM_TOL}")
        with np.errstate(divide="ignore"):
            logprobs = np.log(probs)
        return cls(probs=probs, logprobs=logprobs)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0.0)


@dataclass(frozen=True)
class Crop:
    """An ordered token subset with its retained mass.

    Member order is the order the selection rule produced (probability- or
    score-descending), kept so downstream sampling and golden tests are
    deterministic.
    """

    members: np.ndarray  # (k,) token ids, no duplicates
    gamma: float         # retained mass under the source distribution

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.intp)
        if members.ndim != 1 or members.size == 0:
            raise SimplexError("crop must contain at least one token")
        if np.unique(members).size != members.size:
            raise SimplexError("crop contains duplicate tokens")
        object.__setattr__(self, "members", members)
        if not (0.0 < self.gamma <= 1.0 + _SUM_TOL):
            raise SimplexError(f"retained mass {self.gamma!r} outside (0, 1]")

    @property
    def size(self) -> int:
        return self.members.size


def from_logits(logits, temperature: float = 1.0) -> Dist:
    """Softmax at the given temperature via max-shifted log-sum-exp.

    -inf logits are allowed (zero probability); at least one logit must be
    finite. NaN or +inf logits are rejected.
    """
    if not (np.isscalar(temperature) and np.isfinite(temperature) and temperature > 0):
        raise SimplexError(f"temperature must be a positive finite real, got {temperature!r}")
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size == 0:
        raise SimplexError("logits must be a nonempty 1-D vector")
    if np.isnan(logits).any() or (logits == np.inf).any():
        raise SimplexError("logits must not contain NaN or +inf")
    finite = np.isfinite(logits)
    if not finite.any():
        raise SimplexError("all logits are -inf")
    z = logits / temperature
    m = z[finite].max()
    shifted = z - m
    with np.errstate(over="ignore"):
        ex = np.exp(shifted)
    total = ex.sum()
    logz = np.log(total)
    probs = ex / total
    logprobs = shifted - logz
    return Dist(probs=probs, logprobs=logprobs)


def _member_array(S) -> np.ndarray:
    S = np.asarray(sorted(set(int(i) for i in np.asarray(S).reshape(-1))), dtype=np.intp)
    return S


def crop(p: Dist, S) -> tuple[Crop, Dist]:
    """Restrict p to S and renormalize.

    Returns the crop record (members ordered by probability descending, then
    token id) and the renormalized distribution over the full vocabulary.
    """
    S = _member_array(S)
    if S.size == 0:
        raise SimplexError("crop: empty token set")
    if S.min() < 0 or S.max() >= p.n:
        raise SimplexError("crop: token index out of range")
    gamma = float(p.probs[S].sum())
    if gamma <= 0.0:
        raise SimplexError("crop: selected tokens carry zero probability mass")
    order = np.lexsort((S, -p.probs[S]))
    members = S[order]
    q_probs = np.zeros(p.n)
    q_probs[S] = p.probs[S] / gamma
    q_log = np.full(p.n, -np.inf)
    pos = p.probs[S] > 0.0
    q_log[S[pos]] = p.logprobs[S[pos]] - np.log(gamma)
    q = Dist(probs=q_probs, logprobs=q_log)
    return Crop(members=members, gamma=gamma), q


def conditional(p: Dist, S) -> Dist:
    """The conditional distribution of p restricted to S."""
    _, q = crop(p, S)
    return q


def entropy(q: Dist) -> float:
    """Shannon entropy in nats, with 0*log(0) = 0."""
    pos = q.probs > 0.0
    return max(0.0, float(-(q.probs[pos] * q.logprobs[pos]).sum()))


def cropped_entropy_identity(p: Dist, S) -> tuple[float, float]:
    """Both sides of H(q_S) = -(1/Gamma) sum_S p_i log p_i + log Gamma.

    The left side goes through crop+entropy, the right side is computed
    directly from p; the two are each other's oracle in tests.
    """
    S = _member_array(S)
    lhs_crop, q = crop(p, S)
    lhs = entropy(q)
    gamma = float(p.probs[S].sum())
    pos = S[p.probs[S] > 0.0]
    rhs = float(-(p.probs[pos] * p.logprobs[pos]).sum() / gamma + np.log(gamma))
    return lhs, rhs
