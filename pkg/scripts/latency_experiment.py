#!/usr/bin/env python3
"""Standalone step-latency experiment at production scale.

Synthesizes a peaked 32000-token trace with 1024-dim embeddings, benches the
geometry-aware rule against the probability-only baselines, and prints the
per-rule medians plus the overhead ratio against top_p. This is the
measurement behind the latency acceptance criterion; run it directly to see
where the current machine lands.

    python3 scripts/latency_experiment.py [--steps 12] [--repeats 5]
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from topw.decoder import TopWConfig  # noqa: E402
from topw.harness import bench, parse_rule  # noqa: E402
from topw.trace import synth_trace  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=32000)
    parser.add_argument("--dim", type=int, default=1024)
    parser.add_argument("--steps", type=int, default=12)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--top-m", type=int, default=1200)
    parser.add_argument("--alpha-total", type=float, default=5.0,
                        help="total Dirichlet concentration n*alpha of the step logits")
    args = parser.parse_args()

    print(f"synthesizing trace n={args.n} dim={args.dim} steps={args.steps} ...")
    trace = synth_trace(n=args.n, m=args.dim, steps=args.steps, seed=1012,
                        generator="gaussian", alpha=args.alpha_total / args.n)
    config = TopWConfig(top_m=args.top_m, alt_iters=3)
    rules = [parse_rule(r, config)
             for r in ("topw", "top_p:0.9", "top_k:50", "min_p:0.1", "top_h:0.8")]
    print("benchmarking (metric construction excluded from timings) ...")
    rows = bench(trace, rules, repeats=args.repeats, warmup=1)

    print(f"\n{'rule':<12} {'median ms':>10} {'mean ms':>10} {'p99 ms':>10}")
    for r in rows:
        print(f"{r.rule:<12} {r.median_us / 1000:>10.3f} {r.mean_us / 1000:>10.3f} "
              f"{r.p99_us / 1000:>10.3f}")
    by_rule = {r.rule: r.median_us for r in rows}
    ratio = by_rule["topw"] / by_rule["top_p:0.9"]
    print(f"\ntopw overhead vs top_p: {(ratio - 1) * 100:+.1f}%")


if __name__ == "__main__":
    main()
