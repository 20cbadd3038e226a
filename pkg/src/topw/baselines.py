"""Reference truncators under the same logits-processor interface.

top_k / top_p / min_p are the standard probability-only rules; top_h keeps
the largest probability-descending prefix the bounded-entropy constraint
admits (greedy insertion, stop at the first violation, never below the
top-1 token). The reduction checks verify that, with geometry switched off
(the 0-1 metric), the crop objective recovers these rules: a cardinality
budget at lam = beta = 0 yields top-k, and the beta = 0 objective is the
Lagrangian form of entropy-constrained mass maximization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import Crop, Dist, from_logits


class BaselineError(ValueError):
    pass


RULES = ("top_k", "top_p", "min_p", "top_h")


@dataclass(frozen=True)
class BaselineConfig:
    rule: str
    k: int | None = None           # top_k
    threshold: float | None = None  # top_p cumulative-mass threshold
    ratio: float | None = None      # min_p fraction of the max probability
    alpha: float | None = None      # top_h entropy budget fraction
    sel_temperature: float = 1.0

    def __post_init__(self):
        if self.rule not in RULES:
            raise BaselineError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if not (np.isfinite(self.sel_temperature) and self.sel_temperature > 0):
            raise BaselineError(f"sel_temperature must be positive, got {self.sel_temperature!r}")
        if self.rule == "top_k" and (self.k is None or self.k < 1):
            raise BaselineError(f"top_k needs k >= 1, got {self.k!r}")
        if self.rule == "top_p" and (self.threshold is None or not 0.0 < self.threshold <= 1.0):
            raise BaselineError(f"top_p needs threshold in (0, 1], got {self.threshold!r}")
        if self.rule == "min_p" and (self.ratio is None or not 0.0 < self.ratio <= 1.0):
            raise BaselineError(f"min_p needs ratio in (0, 1], got {self.ratio!r}")
        if self.rule == "top_h" and (self.alpha is None or not 0.0 < self.alpha <= 1.0):
            raise BaselineError(f"top_h needs alpha in (0, 1], got {self.alpha!r}")

    def label(self) -> str:
        value = {"top_k": self.k, "top_p": self.threshold,
                 "min_p": self.ratio, "top_h": self.alpha}[self.rule]
        return f"{self.rule}:{value}"


def _prob_desc_order(p: Dist) -> np.ndarray:
    # stable sort on descending probability keeps ascending token id on ties
    return np.argsort(-p.probs, kind="stable")


def apply_baseline(logits, config: BaselineConfig) -> tuple[np.ndarray, Crop]:
    """Mask logits under the configured rule; kept values pass through."""
    logits = np.asarray(logits, dtype=np.float64)
    p = from_logits(logits, config.sel_temperature)
    order = _prob_desc_order(p)
    sorted_probs = p.probs[order]
    n_pos = int((sorted_probs > 0.0).sum())

    if config.rule == "top_k":
        k = min(config.k, n_pos)
    elif config.rule == "top_p":
        cum = np.cumsum(sorted_probs)
        k = int(np.searchsorted(cum, config.threshold, side="left")) + 1
        k = min(k, n_pos)
    elif config.rule == "min_p":
        k = int((sorted_probs >= config.ratio * sorted_probs[0]).sum())
    else:  # top_h
        pos = sorted_probs[:n_pos]
        logp = np.log(pos)
        cap = config.alpha * float(-(pos * logp).sum())
        gam = np.cumsum(pos)
        plogp = np.cumsum(pos * logp)
        ent = -plogp / gam + np.log(gam)
        viol = np.flatnonzero(ent > cap + 1e-12)
        viol = viol[viol >= 1]  # top-1 is always kept
        k = int(viol[0]) if viol.size else n_pos

    members = order[:k]
    gamma = float(p.probs[members].sum())
    crop = Crop(members=members, gamma=gamma)
    masked = np.full(logits.size, -np.inf)
    masked[members] = logits[members]
    return masked, crop


def subset_mass_tables(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-subset Gamma, sum p log p, and cardinality for all 2^n masks.

    Doubling construction; n is capped at 20 to bound memory. Zero
    probabilities contribute 0 to both sums (the 0 log 0 convention).
    """
    n = probs.size
    if n > 20:
        raise BaselineError(f"subset tables capped at n = 20, got {n}")
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp_tok = np.where(probs > 0.0, probs * np.log(np.maximum(probs, 1e-300)), 0.0)
    total = 1 << n
    gamma = np.zeros(total)
    plogp = np.zeros(total)
    size = np.zeros(total, dtype=np.int64)
    for b in range(n):
        step = 1 << b
        gamma[step : 2 * step] = gamma[:step] + probs[b]
        plogp[step : 2 * step] = plogp[:step] + plogp_tok[b]
        size[step : 2 * step] = size[:step] + 1
    return gamma, plogp, size


def _subset_entropy(gamma: np.ndarray, plogp: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -plogp / gamma + np.log(gamma)
    return ent


def topk_reduction_check(p: Dist, k: int) -> bool:
    """Exhaustively minimize the 0-1-metric objective at lam = beta = 0
    under |S| <= k and verify the minimizer is the top-k set.

    Uses the uniform-metric closed form F = 1 - Gamma, so minimization is
    retained-mass maximization; equality is checked at the mass level
    (probability ties make the set itself non-unique).
    """
    n = p.n
    if n > 14:
        raise BaselineError("exhaustive reduction check capped at n = 14")
    if not 1 <= k <= n:
        raise BaselineError(f"k must be in [1, {n}], got {k}")
    gamma, _, size = subset_mass_tables(p.probs)
    feasible = (size >= 1) & (size <= k)
    best_gamma = gamma[feasible].max()
    top_k_mass = float(np.sort(p.probs)[::-1][:k].sum())
    return bool(abs(best_gamma - top_k_mass) <= 1e-12)


@dataclass(frozen=True)
class LagrangianReport:
    minimizer_mask: int
    gamma: float
    entropy: float
    objective: float
    pareto_undominated: bool


def toph_lagrangian_check(p: Dist, lam: float) -> LagrangianReport:
    """Exhaustively minimize F_{lam, 0} under the 0-1 metric and check the
    minimizer is Pareto-undominated in (retained mass, -entropy).

    F_{lam,0}(S) = (1 - Gamma_S) + lam * H(q_S): the Lagrangian form of
    maximizing mass under an entropy cap. Any subset with strictly more
    mass and strictly less entropy would contradict optimality, which is
    the assertable content of that correspondence.
    """
    n = p.n
    if n > 14:
        raise BaselineError("exhaustive reduction check capped at n = 14")
    gamma, plogp, size = subset_mass_tables(p.probs)
    ent = _subset_entropy(gamma, plogp)
    with np.errstate(invalid="ignore"):
        F = (1.0 - gamma) + lam * ent
    valid = (size >= 1) & (gamma > 0.0)
    F = np.where(valid, F, np.inf)
    best = int(np.argmin(F))
    g_star, h_star = float(gamma[best]), float(ent[best])
    tol = 1e-12
    dominated = valid & (gamma > g_star + tol) & (ent < h_star - tol)
    return LagrangianReport(
        minimizer_mask=best,
        gamma=g_star,
        entropy=h_star,
        objective=float(F[best]),
        pareto_undominated=bool(not dominated.any()),
    )
