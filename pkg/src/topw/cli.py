"""Command-line surface: synth, validate-trace, run, sweep, bench.

Exit codes: 0 success, 1 usage error, 2 data validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys

from .baselines import BaselineError
from .decoder import DecoderError, TopWConfig, WarmStart
from .geometry import GeometryError
from .harness import HarnessError, bench, parse_rule, run, sweep
from .selection import TieBreak
from .simplex import SimplexError
from .trace import TraceError, load_trace, save_trace, synth_trace

USAGE_EXIT = 1
DATA_EXIT = 2

_DATA_ERRORS = (
    TraceError,
    GeometryError,
    SimplexError,
    DecoderError,
    BaselineError,
    HarnessError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _parse_warm_start(text: str) -> WarmStart:
    name, _, raw = text.partition(":")
    if name == "nucleus":
        return WarmStart.nucleus(float(raw) if raw else 0.9)
    if name == "top_k":
        if not raw:
            raise argparse.ArgumentTypeError("top_k warm start needs a size, e.g. top_k:40")
        return WarmStart.top_k(int(raw))
    raise argparse.ArgumentTypeError(f"unknown warm start {text!r}")


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    defaults = TopWConfig()
    sub.add_argument("--lam", "--lambda", dest="lam", type=float, default=defaults.lam,
                     help="entropy weight (nats)")
    sub.add_argument("--beta", type=float, default=defaults.beta, help="log-mass weight (nats)")
    sub.add_argument("--sel-temperature", type=float, default=defaults.sel_temperature)
    sub.add_argument("--top-m", type=int, default=defaults.top_m, help="candidate pool size")
    sub.add_argument("--alt-iters", type=int, default=defaults.alt_iters,
                     help="alternating refinement iterations")
    sub.add_argument("--warm-start", type=_parse_warm_start,
                     default=defaults.warm_start, metavar="RULE",
                     help="nucleus:<threshold> or top_k:<k> (default nucleus:0.9)")
    sub.add_argument("--epsilon-whiten", type=float, default=defaults.epsilon_whiten)


def _config_from_args(args) -> TopWConfig:
    return TopWConfig(
        lam=args.lam,
        beta=args.beta,
        sel_temperature=args.sel_temperature,
        top_m=args.top_m,
        alt_iters=args.alt_iters,
        warm_start=args.warm_start,
        epsilon_whiten=args.epsilon_whiten,
        tiebreak=TieBreak.PROB_DESC_TOKEN_ASC,
    )


def _rules_from_args(args, config: TopWConfig):
    try:
        return [parse_rule(r, config) for r in args.rules.split(",") if r.strip()]
    except HarnessError as err:
        print(f"topw: error: {err}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT) from err


def _grid(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topw", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="write a deterministic synthetic trace")
    synth.add_argument("--out", required=True, help="output trace directory")
    synth.add_argument("--n", type=int, required=True, help="vocabulary size")
    synth.add_argument("--m", type=int, required=True, help="embedding dimension")
    synth.add_argument("--steps", type=int, required=True)
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--generator", choices=("gaussian", "clustered"), default="gaussian")
    synth.add_argument("--alpha", type=float, default=1.0,
                       help="per-token Dirichlet concentration of the step logits")
    synth.add_argument("--clusters", type=int, default=4)
    synth.add_argument("--cluster-std", type=float, default=0.05)

    validate = subs.add_parser("validate-trace", help="load a trace and print its shape")
    validate.add_argument("--trace", required=True)

    runp = subs.add_parser("run", help="per-step crop statistics CSV")
    runp.add_argument("--trace", required=True)
    runp.add_argument("--out", required=True, help="output CSV path")
    runp.add_argument("--rules", default="topw,top_p:0.9,top_k:50,min_p:0.1")
    runp.add_argument("--golden", action="store_true",
                      help="zero the elapsed column for byte-stable fixtures")
    _add_config_flags(runp)

    sweepp = subs.add_parser("sweep", help="aggregate statistics over a parameter grid")
    sweepp.add_argument("--trace", required=True)
    sweepp.add_argument("--out", required=True)
    sweepp.add_argument("--lam-grid", "--lambda-grid", dest="lam_grid",
                        type=_grid, required=True, metavar="X,Y,...")
    sweepp.add_argument("--beta-grid", type=_grid, required=True, metavar="X,Y,...")
    _add_config_flags(sweepp)

    benchp = subs.add_parser("bench", help="per-rule step latency table")
    benchp.add_argument("--trace", required=True)
    benchp.add_argument("--out", required=True)
    benchp.add_argument("--rules", default="topw,top_p:0.9")
    benchp.add_argument("--repeats", type=int, default=5)
    benchp.add_argument("--warmup", type=int, default=1)
    _add_config_flags(benchp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            bundle = synth_trace(
                n=args.n, m=args.m, steps=args.steps, seed=args.seed,
                generator=args.generator, alpha=args.alpha,
                clusters=args.clusters, cluster_std=args.cluster_std,
            )
            save_trace(bundle, args.out)
            print(f"wrote trace n={bundle.n} m={bundle.m} steps={bundle.steps} -> {args.out}")
        elif args.command == "validate-trace":
            bundle = load_trace(args.trace)
            emb_digest = hashlib.sha256(bundle.embeddings.tobytes()).hexdigest()
            logit_digest = hashlib.sha256(bundle.logits.tobytes()).hexdigest()
            print(f"ok n={bundle.n} m={bundle.m} steps={bundle.steps}")
            print(f"embeddings sha256={emb_digest}")
            print(f"logits sha256={logit_digest}")
        elif args.command == "run":
            config = _config_from_args(args)
            rules = _rules_from_args(args, config)
            bundle = load_trace(args.trace)
            rows = run(bundle, rules, out=args.out, golden=args.golden)
            print(f"wrote {len(rows)} rows -> {args.out}")
        elif args.command == "sweep":
            config = _config_from_args(args)
            bundle = load_trace(args.trace)
            result = sweep(bundle, args.lam_grid, args.beta_grid, config, out=args.out)
            print(f"wrote {len(result.rows)} grid rows -> {args.out}")
            if not result.fixed_potential:
                print(
                    "retained-mass monotonicity along beta (alternating mode, reported only): "
                    f"{result.gamma_monotone_violations} violations"
                )
        elif args.command == "bench":
            config = _config_from_args(args)
            rules = _rules_from_args(args, config)
            bundle = load_trace(args.trace)
            rows = bench(bundle, rules, repeats=args.repeats, warmup=args.warmup, out=args.out)
            for r in rows:
                print(
                    f"{r.rule}: median {r.median_us / 1000:.3f} ms "
                    f"(mean {r.mean_us / 1000:.3f}, p99 {r.p99_us / 1000:.3f})"
                )
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command!r}")
    except _DATA_ERRORS as err:
        print(f"topw: error: {err}", file=sys.stderr)
        return DATA_EXIT
    except OSError as err:
        print(f"topw: error: {err}", file=sys.stderr)
        return DATA_EXIT
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
