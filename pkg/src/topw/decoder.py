"""The alternating crop update as a logits-processor entry point.

Per step: softmax at the selection temperature, restrict to the top_m most
probable tokens, warm-start the crop with a probability-only rule, then
alternate (rebuild the attraction potential from the current crop; exactly
re-optimize the crop for that potential) until the crop repeats or the
iteration budget runs out. Logits outside the final crop are masked to
-inf; values inside are passed through untouched.

Distance work is the per-step cost center: squared-distance columns are
computed once per pool token on first entry into the crop and cached for
later iterations, matching the pool-by-crop product cost model.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .objective import ObjectiveParams, ScoredPool, combined_scores
from .selection import SStepResult, TieBreak, prefix_scan, s_step
from .simplex import Crop, from_logits

log = logging.getLogger(__name__)


class DecoderError(ValueError):
    pass


@dataclass(frozen=True)
class WarmStart:
    """Probability-only rule producing the initial crop within the pool."""

    rule: str                  # "nucleus" | "top_k"
    threshold: float | None = None
    k: int | None = None

    def __post_init__(self):
        if self.rule == "nucleus":
            if self.threshold is None or not 0.0 < self.threshold <= 1.0:
                raise DecoderError(f"nucleus threshold must be in (0, 1], got {self.threshold!r}")
        elif self.rule == "top_k":
            if self.k is None or self.k < 1:
                raise DecoderError(f"top_k warm start needs k >= 1, got {self.k!r}")
        else:
            raise DecoderError(f"unknown warm start rule {self.rule!r}")

    @classmethod
    def nucleus(cls, threshold: float = 0.9) -> "WarmStart":
        return cls(rule="nucleus", threshold=float(threshold))

    @classmethod
    def top_k(cls, k: int) -> "WarmStart":
        return cls(rule="top_k", k=int(k))


@dataclass(frozen=True)
class TopWConfig:
    lam: float = 2.2
    beta: float = 2.8
    sel_temperature: float = 1.0
    top_m: int = 1200
    alt_iters: int = 3
    warm_start: WarmStart = WarmStart.nucleus(0.9)
    epsilon_whiten: float = 1e-5
    tiebreak: TieBreak = TieBreak.PROB_DESC_TOKEN_ASC

    def __post_init__(self):
        params = ObjectiveParams(lam=self.lam, beta=self.beta)  # validates ranges
        if not (np.isfinite(self.sel_temperature) and self.sel_temperature > 0):
            raise DecoderError(f"sel_temperature must be positive, got {self.sel_temperature!r}")
        if self.top_m < 1:
            raise DecoderError(f"top_m must be >= 1, got {self.top_m!r}")
        if self.alt_iters < 1:
            raise DecoderError(f"alt_iters must be >= 1, got {self.alt_iters!r}")
        if not (np.isfinite(self.epsilon_whiten) and self.epsilon_whiten > 0):
            raise DecoderError(f"epsilon_whiten must be positive, got {self.epsilon_whiten!r}")
        if self.beta <= self.lam:
            warnings.warn(
                f"beta={self.beta} <= lam={self.lam}: the exact subset step collapses "
                "to a single token in this regime",
                stacklevel=2,
            )

    @property
    def params(self) -> ObjectiveParams:
        return ObjectiveParams(lam=self.lam, beta=self.beta)


@dataclass(frozen=True)
class StepReport:
    crop: Crop
    iterations_used: int
    converged_early: bool
    regime_per_iter: tuple[str, ...]
    gamma: float
    crop_entropy: float
    elapsed: float  # seconds


def _warm_start_size(rule: WarmStart, pool_probs: np.ndarray) -> int:
    """Initial crop size within the probability-sorted pool."""
    if rule.rule == "top_k":
        return min(rule.k, pool_probs.size)
    cum = np.cumsum(pool_probs)
    k = int(np.searchsorted(cum, rule.threshold, side="left")) + 1
    return min(k, pool_probs.size)


class _DistCache:
    """Per-call cache of squared-distance columns pool x (crop so far).

    The pool rows of the whitened matrix are gathered once per step; columns
    are keyed by pool position and computed lazily the first time a token
    enters the crop, then reused by later iterations.
    """

    def __init__(self, metric, pool_tokens: np.ndarray):
        self.wp = metric.whitened[pool_tokens]
        self.nrm = metric.sqnorms[pool_tokens]
        m = pool_tokens.size
        # transposed storage, grown on demand: buffer row r holds the squared
        # distances from every pool token to the r-th crop entrant, so both
        # writes and the min-reduction stay contiguous
        self.rows = np.empty((min(64, m), m), dtype=np.float64)
        self.row_of = np.full(m, -1, dtype=np.intp)
        self.used = 0

    def min_dist(self, S_pos: np.ndarray) -> np.ndarray:
        new = S_pos[self.row_of[S_pos] < 0]
        if new.size:
            need = self.used + new.size
            if need > self.rows.shape[0]:
                grown = np.empty((max(need, 2 * self.rows.shape[0]), self.rows.shape[1]))
                grown[: self.used] = self.rows[: self.used]
                self.rows = grown
            g = self.wp[new] @ self.wp.T
            self.rows[self.used : need] = self.nrm[new][:, None] + self.nrm[None, :] - 2.0 * g
            self.row_of[new] = np.arange(self.used, need)
            self.used = need
        d2 = self.rows[self.row_of[S_pos]].min(axis=0)
        np.maximum(d2, 0.0, out=d2)
        d2[S_pos] = 0.0  # crop members are at distance 0 exactly
        return np.sqrt(d2)


def process_logits(
    logits,
    metric,
    config: TopWConfig,
    verify_convergence: bool = False,
) -> tuple[np.ndarray, StepReport]:
    """One decode step: returns (masked logits, report).

    Reentrant: all scratch state is call-local; a single metric may serve
    many concurrent streams. verify_convergence runs one extra alternation
    after an early break and asserts the crop is a fixed point (debug only).
    """
    t0 = time.perf_counter()
    logits = np.asarray(logits, dtype=np.float64)
    n = metric.n
    if logits.shape != (n,):
        raise DecoderError(f"logits length {logits.shape} does not match vocabulary {n}")
    p = from_logits(logits, config.sel_temperature)

    top_m = min(config.top_m, n)
    if top_m == n:
        pool = np.arange(n)
    else:
        # partition on the raw logits: same order as the probabilities but
        # free of the duplicate-zero plateau that degrades introselect
        pool = np.argpartition(logits, n - top_m)[n - top_m :]
    pool_probs = p.probs[pool]
    keep = pool_probs > 0.0
    pool, pool_probs = pool[keep], pool_probs[keep]
    order = np.lexsort((pool, -pool_probs))
    pool, pool_probs = pool[order], pool_probs[order]

    k0 = _warm_start_size(config.warm_start, pool_probs)
    S_pos = np.arange(k0)

    params = config.params
    cache = _DistCache(metric, pool)
    # token id -> pool position lookup (pool is ordered by probability, not id)
    id_sort = np.argsort(pool, kind="stable")
    pool_sorted_ids = pool[id_sort]

    def one_iteration(S_pos: np.ndarray) -> tuple[SStepResult, np.ndarray]:
        f = -cache.min_dist(S_pos)
        scored = combined_scores(p, pool, f, config.lam)
        result = s_step(scored, params, config.tiebreak)
        # map selected token ids back to pool positions (selection order kept)
        new_pos = id_sort[np.searchsorted(pool_sorted_ids, result.crop.members)]
        return result, new_pos

    regimes: list[str] = []
    converged = False
    result: SStepResult | None = None
    iterations = 0
    for _ in range(config.alt_iters):
        result, new_pos = one_iteration(S_pos)
        regimes.append(result.regime)
        if result.regime == "singleton":
            log.info("subset step collapsed to a singleton (beta <= lam regime)")
        iterations += 1
        same = new_pos.size == S_pos.size and np.array_equal(
            np.sort(new_pos), np.sort(S_pos)
        )
        S_pos = new_pos
        if same:
            converged = True
            break

    if verify_convergence and converged:
        extra, extra_pos = one_iteration(S_pos)
        if not np.array_equal(np.sort(extra_pos), np.sort(S_pos)):
            raise AssertionError("crop was reported converged but moved on an extra iteration")

    crop = result.crop
    members = crop.members
    masked = np.full(n, -np.inf)
    masked[members] = logits[members]

    sel_probs = p.probs[members]
    gamma = crop.gamma
    q = sel_probs / gamma
    crop_entropy = max(0.0, float(-(q * (np.log(sel_probs) - np.log(gamma))).sum()))
    report = StepReport(
        crop=crop,
        iterations_used=iterations,
        converged_early=converged and iterations < config.alt_iters,
        regime_per_iter=tuple(regimes),
        gamma=gamma,
        crop_entropy=crop_entropy,
        elapsed=time.perf_counter() - t0,
    )
    return masked, report


def sample_from_masked(masked_logits, sel_temperature: float, rng_seed: int) -> int:
    """Categorical draw from the renormalized crop; deterministic per seed."""
    dist = from_logits(masked_logits, sel_temperature)
    rng = np.random.default_rng(rng_seed)
    return int(rng.choice(dist.n, p=dist.probs))


@dataclass(frozen=True)
class PoolProbeResult:
    identical: bool
    hypothesis_held: bool
    k_star_full: int
    k_star_pool: int

    def __bool__(self) -> bool:
        return self.identical


def pool_exactness_probe(
    scored: ScoredPool,
    top_m: int,
    params: ObjectiveParams,
    tiebreak: TieBreak = TieBreak.PROB_DESC_TOKEN_ASC,
) -> PoolProbeResult:
    """Compare the score-ordered pooled prefix scan against the full scan.

    When the pool contains the top-L tokens in combined-score order with
    L >= k*, the restriction is exact; the probe reports whether that
    hypothesis held and whether the two scans agreed. Full-vocabulary scans
    are capped at 4096 tokens.
    """
    if scored.size > 4096:
        raise DecoderError("pool_exactness_probe is capped at 4096 tokens")
    if params.c < 0.0:
        raise DecoderError("the pooled-scan exactness statement assumes beta >= lam")
    full = prefix_scan(scored, params, tiebreak)
    k_full = full.k_star
    top_m = min(int(top_m), scored.size)
    hypothesis = k_full <= top_m
    sel = full.order[:top_m]
    pooled_scored = ScoredPool(
        tokens=scored.tokens[sel],
        probs=scored.probs[sel],
        phi=scored.phi[sel],
        potential=scored.potential[sel],
        lam=scored.lam,
    )
    pooled = prefix_scan(pooled_scored, params, tiebreak)
    k_pool = pooled.k_star
    full_set = np.sort(scored.tokens[full.order[:k_full]])
    pool_set = np.sort(pooled_scored.tokens[pooled.order[:k_pool]])
    identical = k_full == k_pool and np.array_equal(full_set, pool_set)
    return PoolProbeResult(
        identical=identical,
        hypothesis_held=hypothesis,
        k_star_full=k_full,
        k_star_pool=k_pool,
    )
