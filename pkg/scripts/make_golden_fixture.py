#!/usr/bin/env python3
"""Regenerate the golden trace fixture and its pinned run CSV.

Writes tests/fixtures/golden_trace/ and tests/fixtures/golden_run.csv, then
prints the sha256 digests the tests pin. Rerun only when the trace format or
the fixture definition deliberately changes; update the pinned digests in
tests/test_trace.py and the CSV fixture together.
"""

import hashlib
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from topw.decoder import TopWConfig  # noqa: E402
from topw.harness import parse_rule, run  # noqa: E402
from topw.trace import save_trace, synth_trace  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
SEED = 20240817


def main():
    bundle = synth_trace(
        n=48, m=6, steps=4, seed=SEED, generator="clustered", clusters=3, alpha=0.25
    )
    trace_dir = FIXTURES / "golden_trace"
    save_trace(bundle, trace_dir)

    config = TopWConfig(top_m=24, alt_iters=3)
    rules = [
        parse_rule(text, config)
        for text in ("topw", "top_p:0.9", "top_k:5", "min_p:0.1", "top_h:0.8")
    ]
    run(bundle, rules, out=FIXTURES / "golden_run.csv", golden=True)

    for name in ("golden_trace/meta.json", "golden_trace/embeddings.f32",
                 "golden_trace/logits.f32", "golden_run.csv"):
        digest = hashlib.sha256((FIXTURES / name).read_bytes()).hexdigest()
        print(f"{name}: {digest}")


if __name__ == "__main__":
    main()
