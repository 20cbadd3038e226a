"""The exact fixed-potential subset step.

For a fixed potential the optimal crop is either a prefix of the pool
sorted by combined score (mass bonus c = beta - lam >= 0) or a single
token (c <= 0). The prefix case is a linear scan over cumulative sums; the
singleton case is an argmax. brute_force_s_step enumerates all subsets and
is the oracle both regimes are verified against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .objective import ObjectiveParams, ScoredPool
from .simplex import Crop


class SelectionError(ValueError):
    pass


class TieBreak(enum.Enum):
    """Total order for equal combined scores.

    Higher probability wins, then the smaller token id; keeps the prefix
    mass-greedy and runs reproducible.
    """

    PROB_DESC_TOKEN_ASC = "by-probability-desc-then-token-id-asc"


def _phi_order(scored: ScoredPool, tiebreak: TieBreak) -> np.ndarray:
    """Pool positions sorted by phi descending under the tie-break rule."""
    if not isinstance(tiebreak, TieBreak):
        raise SelectionError(f"unknown tie-break rule: {tiebreak!r}")
    return np.lexsort((scored.tokens, -scored.probs, -scored.phi))


@dataclass(frozen=True)
class PrefixScan:
    """Prefix statistics of the phi-sorted pool."""

    order: np.ndarray            # (k,) pool positions, phi descending
    gamma_prefix: np.ndarray     # (k,) cumulative mass
    phi_mass_prefix: np.ndarray  # (k,) cumulative p*phi
    J: np.ndarray                # (k,) objective per prefix length

    @property
    def k_star(self) -> int:
        """Smallest maximizing prefix length (1-based)."""
        return int(np.argmax(self.J)) + 1


@dataclass(frozen=True)
class SStepResult:
    crop: Crop
    value: float
    regime: str  # "prefix" or "singleton"
    scan: PrefixScan | None = None


def prefix_scan(scored: ScoredPool, params: ObjectiveParams, tiebreak: TieBreak) -> PrefixScan:
    order = _phi_order(scored, tiebreak)
    ps = scored.probs[order]
    gamma = np.cumsum(ps)
    phi_mass = np.cumsum(ps * scored.phi[order])
    J = phi_mass / gamma + params.c * np.log(gamma)
    return PrefixScan(order=order, gamma_prefix=gamma, phi_mass_prefix=phi_mass, J=J)


def s_step(
    scored: ScoredPool,
    params: ObjectiveParams,
    tiebreak: TieBreak = TieBreak.PROB_DESC_TOKEN_ASC,
) -> SStepResult:
    """Exactly maximize G over nonempty subsets of the pool.

    c > 0: smallest maximizing prefix of the phi-sorted pool. c <= 0: best
    singleton by phi_i + c log p_i (at c = 0 both branches coincide; the
    singleton formula is cheaper).
    """
    if scored.size == 0:
        raise SelectionError("s_step: empty pool")
    if (scored.probs <= 0.0).any():
        raise SelectionError("s_step: pool contains zero-probability tokens")
    if not isinstance(tiebreak, TieBreak):
        raise SelectionError(f"unknown tie-break rule: {tiebreak!r}")
    c = params.c
    if c <= 0.0:
        logp = np.log(scored.probs)
        score = scored.phi + c * logp
        order = np.lexsort((scored.tokens, -scored.probs, -score))
        best = order[0]
        members = scored.tokens[best : best + 1]
        gamma = float(scored.probs[best])
        return SStepResult(
            crop=Crop(members=members, gamma=gamma),
            value=float(score[best]),
            regime="singleton",
        )
    scan = prefix_scan(scored, params, tiebreak)
    k = scan.k_star
    sel = scan.order[:k]
    members = scored.tokens[sel]
    gamma = float(scan.gamma_prefix[k - 1])
    return SStepResult(
        crop=Crop(members=members, gamma=gamma),
        value=float(scan.J[k - 1]),
        regime="prefix",
        scan=scan,
    )


def brute_force_s_step(scored: ScoredPool, params: ObjectiveParams) -> tuple[np.ndarray, float]:
    """Exhaustive maximizer of G over all nonempty subsets (pool <= 14).

    Subset sums are built by mask doubling rather than prefix sums, so this
    stays an independent check of the scan. Value ties resolve to the
    lexicographically smallest member set.
    """
    k = scored.size
    if k > 14:
        raise SelectionError(f"brute force capped at pool size 14, got {k}")
    total = 1 << k
    gamma = np.zeros(total)
    phi_mass = np.zeros(total)
    for b in range(k):
        step = 1 << b
        gamma[step : 2 * step] = gamma[:step] + scored.probs[b]
        phi_mass[step : 2 * step] = phi_mass[:step] + scored.probs[b] * scored.phi[b]
    with np.errstate(divide="ignore", invalid="ignore"):
        G = phi_mass / gamma + params.c * np.log(gamma)
    G[0] = -np.inf
    best = G.max()
    candidates = np.flatnonzero(G == best)

    def members_of(mask: int) -> tuple:
        return tuple(sorted(int(scored.tokens[b]) for b in range(k) if mask >> b & 1))

    winner = min((int(m) for m in candidates), key=members_of)
    return np.asarray(members_of(winner), dtype=np.intp), float(best)


def beta_sweep_gammas(
    scored: ScoredPool,
    lam: float,
    betas,
    tiebreak: TieBreak = TieBreak.PROB_DESC_TOKEN_ASC,
) -> list[float]:
    """Retained mass of the exact S-step along an ascending beta grid.

    Every beta must be >= lam (the monotonicity statement's hypothesis);
    callers assert the returned list is nondecreasing.
    """
    betas = [float(b) for b in betas]
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise SelectionError("betas must be ascending")
    if any(b < lam for b in betas):
        raise SelectionError("beta sweep requires beta >= lam throughout")
    out = []
    for b in betas:
        res = s_step(scored, ObjectiveParams(lam=lam, beta=b), tiebreak)
        out.append(res.crop.gamma)
    return out


def shift_check(
    scored: ScoredPool,
    params: ObjectiveParams,
    tiebreak: TieBreak,
    c: float,
) -> bool:
    """True iff shifting the potential by a constant keeps the selected set
    and moves the achieved value by exactly that constant (within 1e-9)."""
    base = s_step(scored, params, tiebreak)
    shifted_pool = ScoredPool(
        tokens=scored.tokens,
        probs=scored.probs,
        phi=scored.phi + c,
        potential=scored.potential + c,
        lam=scored.lam,
        dropped=scored.dropped,
    )
    shifted = s_step(shifted_pool, params, tiebreak)
    same_set = np.array_equal(np.sort(base.crop.members), np.sort(shifted.crop.members))
    return bool(same_set and abs((shifted.value - base.value) - c) <= 1e-9)
