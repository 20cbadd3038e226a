"""Per-step statistics, parameter sweeps, and the latency bench.

All rules run through one dispatch so the harness treats the geometry-aware
crop and the probability-only baselines uniformly. run and sweep may
process steps independently; bench is strictly sequential so latency
numbers stay clean. Metric construction is amortized once per trace and
excluded from all timings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, apply_baseline
from .decoder import TopWConfig, process_logits
from .geometry import TokenMetric, build_metric
from .simplex import from_logits
from .trace import TraceBundle


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class StepStatsRow:
    step: int
    rule: str
    crop_size: int
    gamma: float
    crop_entropy: float
    regime: str
    iterations_used: int
    elapsed_us: float


STATS_HEADER = "step,rule,crop_size,gamma,crop_entropy,regime,iterations_used,elapsed_us"


def parse_rule(text: str, topw_config: TopWConfig, sel_temperature: float | None = None):
    """Parse a rule string like "topw", "top_p:0.9", "top_k:50".

    Returns (label, config) where config is a TopWConfig or BaselineConfig.
    """
    text = text.strip()
    temperature = (
        topw_config.sel_temperature if sel_temperature is None else sel_temperature
    )
    if text == "topw":
        return text, topw_config
    if ":" not in text:
        raise HarnessError(f"rule {text!r} needs a parameter, e.g. top_p:0.9")
    name, _, raw = text.partition(":")
    name = name.strip()
    try:
        if name == "top_k":
            cfg = BaselineConfig(rule="top_k", k=int(raw), sel_temperature=temperature)
        elif name == "top_p":
            cfg = BaselineConfig(rule="top_p", threshold=float(raw), sel_temperature=temperature)
        elif name == "min_p":
            cfg = BaselineConfig(rule="min_p", ratio=float(raw), sel_temperature=temperature)
        elif name == "top_h":
            cfg = BaselineConfig(rule="top_h", alpha=float(raw), sel_temperature=temperature)
        else:
            raise HarnessError(f"unknown rule {name!r}")
    except ValueError as err:
        raise HarnessError(f"bad parameter for rule {text!r}: {err}") from err
    return text, cfg


def _metric_for(trace: TraceBundle, epsilon: float, cache: dict) -> TokenMetric:
    if epsilon not in cache:
        cache[epsilon] = build_metric(trace.embeddings, epsilon)
    return cache[epsilon]


def _crop_entropy(probs: np.ndarray, members: np.ndarray) -> float:
    sel = probs[members]
    gamma = sel.sum()
    q = sel / gamma
    pos = q > 0.0
    return max(0.0, float(-(q[pos] * np.log(q[pos])).sum()))


def _apply_rule(label: str, config, logits: np.ndarray, metric: TokenMetric | None):
    """Uniform logits-processor dispatch.

    Returns (masked, crop, regime, iterations, elapsed_seconds).
    """
    if isinstance(config, TopWConfig):
        masked, rep = process_logits(logits, metric, config)
        regime = rep.regime_per_iter[-1] if rep.regime_per_iter else "-"
        return masked, rep.crop, regime, rep.iterations_used, rep.elapsed
    t0 = time.perf_counter()
    masked, crop = apply_baseline(logits, config)
    elapsed = time.perf_counter() - t0
    return masked, crop, "-", 1, elapsed


def run(
    trace: TraceBundle,
    rules,
    out=None,
    golden: bool = False,
) -> list[StepStatsRow]:
    """One row of crop statistics per (step, rule).

    golden zeroes the elapsed column so fixture CSVs are byte-stable.
    """
    if not rules:
        raise HarnessError("run needs at least one rule")
    metric_cache: dict = {}
    rows: list[StepStatsRow] = []
    for step in range(trace.steps):
        logits = np.asarray(trace.logits[step], dtype=np.float64)
        for label, config in rules:
            metric = None
            if isinstance(config, TopWConfig):
                metric = _metric_for(trace, config.epsilon_whiten, metric_cache)
            masked, crop, regime, iters, elapsed = _apply_rule(label, config, logits, metric)
            p = from_logits(logits, config.sel_temperature)
            rows.append(
                StepStatsRow(
                    step=step,
                    rule=label,
                    crop_size=crop.size,
                    gamma=crop.gamma,
                    crop_entropy=_crop_entropy(p.probs, crop.members),
                    regime=regime,
                    iterations_used=iters,
                    elapsed_us=0.0 if golden else elapsed * 1e6,
                )
            )
    if out is not None:
        write_stats_csv(rows, out)
    return rows


def write_stats_csv(rows: list[StepStatsRow], out) -> None:
    lines = [STATS_HEADER]
    for r in rows:
        lines.append(
            f"{r.step},{r.rule},{r.crop_size},{r.gamma!r},{r.crop_entropy!r},"
            f"{r.regime},{r.iterations_used},{r.elapsed_us!r}"
        )
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class SweepRow:
    lam: float
    beta: float
    mean_gamma: float
    mean_crop_size: float
    mean_crop_entropy: float


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    fixed_potential: bool            # alt_iters == 1: monotonicity is asserted
    gamma_monotone_violations: int   # reported (not asserted) when alternating


SWEEP_HEADER = "lam,beta,mean_gamma,mean_crop_size,mean_crop_entropy"


def sweep(
    trace: TraceBundle,
    lam_grid,
    beta_grid,
    base: TopWConfig,
    out=None,
) -> SweepResult:
    """Aggregate crop statistics over a (lam, beta) grid.

    With alt_iters = 1 and a shared warm start the potential is fixed
    across the beta axis, so per-step retained mass must be nondecreasing
    in beta at every lam — that case is asserted. With alternation the
    guarantee does not carry across iterations; violations are counted and
    reported instead.
    """
    lam_grid = [float(x) for x in lam_grid]
    beta_grid = sorted(float(x) for x in beta_grid)
    if not lam_grid or not beta_grid:
        raise HarnessError("sweep needs nonempty grids")
    metric_cache: dict = {}
    metric = _metric_for(trace, base.epsilon_whiten, metric_cache)
    rows: list[SweepRow] = []
    violations = 0
    for lam in lam_grid:
        # per-step gamma along the beta axis, for the monotonicity check
        gamma_by_beta: list[list[float]] = []
        for beta in beta_grid:
            config = replace(base, lam=lam, beta=beta)
            gammas, sizes, ents = [], [], []
            for step in range(trace.steps):
                logits = np.asarray(trace.logits[step], dtype=np.float64)
                _, rep = process_logits(logits, metric, config)
                gammas.append(rep.gamma)
                sizes.append(rep.crop.size)
                ents.append(rep.crop_entropy)
            gamma_by_beta.append(gammas)
            rows.append(
                SweepRow(
                    lam=lam,
                    beta=beta,
                    mean_gamma=float(np.mean(gammas)),
                    mean_crop_size=float(np.mean(sizes)),
                    mean_crop_entropy=float(np.mean(ents)),
                )
            )
        eligible = [i for i, b in enumerate(beta_grid) if b >= lam]
        for prev, nxt in zip(eligible, eligible[1:]):
            for step in range(trace.steps):
                if gamma_by_beta[nxt][step] < gamma_by_beta[prev][step]:
                    violations += 1
    if base.alt_iters == 1 and violations:
        raise HarnessError(
            f"retained mass decreased along ascending beta in {violations} fixed-potential "
            "cases; this contradicts a proved property and indicates a selection bug"
        )
    if out is not None:
        lines = [SWEEP_HEADER]
        for r in rows:
            lines.append(
                f"{r.lam!r},{r.beta!r},{r.mean_gamma!r},{r.mean_crop_size!r},"
                f"{r.mean_crop_entropy!r}"
            )
        Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return SweepResult(
        rows=rows,
        fixed_potential=base.alt_iters == 1,
        gamma_monotone_violations=violations,
    )


@dataclass(frozen=True)
class BenchRow:
    rule: str
    steps: int
    repeats: int
    mean_us: float
    median_us: float
    p99_us: float


BENCH_HEADER = "rule,steps,repeats,mean_us,median_us,p99_us"


def bench(
    trace: TraceBundle,
    rules,
    repeats: int,
    warmup: int = 1,
    out=None,
) -> list[BenchRow]:
    """Per-rule step latency: mean/median/p99 microseconds per call.

    repeats timed calls per step after warmup calls; metric construction
    happens before any clock starts. Strictly single-threaded.
    """
    if repeats < 3:
        raise HarnessError(f"bench needs repeats >= 3, got {repeats}")
    metric_cache: dict = {}
    rows: list[BenchRow] = []
    for label, config in rules:
        metric = None
        if isinstance(config, TopWConfig):
            metric = _metric_for(trace, config.epsilon_whiten, metric_cache)
        samples: list[float] = []
        for step in range(trace.steps):
            logits = np.asarray(trace.logits[step], dtype=np.float64)
            for _ in range(warmup):
                _apply_rule(label, config, logits, metric)
            for _ in range(repeats):
                t0 = time.perf_counter()
                _apply_rule(label, config, logits, metric)
                samples.append(time.perf_counter() - t0)
        us = np.asarray(samples) * 1e6
        rows.append(
            BenchRow(
                rule=label,
                steps=trace.steps,
                repeats=repeats,
                mean_us=float(us.mean()),
                median_us=float(np.median(us)),
                p99_us=float(np.percentile(us, 99)),
            )
        )
    if out is not None:
        lines = [BENCH_HEADER]
        for r in rows:
            lines.append(
                f"{r.rule},{r.steps},{r.repeats},{r.mean_us!r},{r.median_us!r},{r.p99_us!r}"
            )
        Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return rows
