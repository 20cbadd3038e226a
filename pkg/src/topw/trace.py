"""Trace bundles: a model-free exchange format for embeddings and logits.

A trace is a directory holding a small JSON descriptor plus two raw
little-endian float32 arrays (row-major): the embedding table and one
logits row per decode step. Raw arrays keep the format bit-exact across
languages and trivial to emit from any model runtime.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
META_NAME = "meta.json"
EMB_NAME = "embeddings.f32"
LOGITS_NAME = "logits.f32"

GENERATORS = ("gaussian", "clustered")


class TraceError(ValueError):
    """Malformed, truncated, or inconsistent trace data."""


@dataclass(frozen=True)
class TraceBundle:
    n: int
    m: int
    steps: int
    embeddings: np.ndarray  # (n, m) float32
    logits: np.ndarray      # (steps, n) float32

    def __post_init__(self):
        if self.embeddings.shape != (self.n, self.m):
            raise TraceError(
                f"embeddings shape {self.embeddings.shape} != ({self.n}, {self.m})"
            )
        if self.logits.shape != (self.steps, self.n):
            raise TraceError(f"logits shape {self.logits.shape} != ({self.steps}, {self.n})")


def save_trace(bundle: TraceBundle, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "n": bundle.n,
        "m": bundle.m,
        "steps": bundle.steps,
        "layout": "row-major",
        "dtype": "float32",
        "endianness": "little",
    }
    (path / META_NAME).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    (path / EMB_NAME).write_bytes(
        np.ascontiguousarray(bundle.embeddings, dtype="<f4").tobytes()
    )
    (path / LOGITS_NAME).write_bytes(
        np.ascontiguousarray(bundle.logits, dtype="<f4").tobytes()
    )


def _read_array(path: Path, rows: int, cols: int, what: str) -> np.ndarray:
    if not path.is_file():
        raise TraceError(f"missing {what} file {path}")
    raw = path.read_bytes()
    expected = rows * cols * 4
    if len(raw) != expected:
        raise TraceError(
            f"{what} file {path.name} holds {len(raw)} bytes, "
            f"expected {expected} ({rows} x {cols} float32)"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(rows, cols)


def load_trace(path) -> TraceBundle:
    path = Path(path)
    meta_path = path / META_NAME
    if not meta_path.is_file():
        raise TraceError(f"missing descriptor {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise TraceError(f"descriptor {meta_path} is not valid JSON: {err}") from err
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise TraceError(f"unsupported format_version {version!r}, expected {FORMAT_VERSION}")
    if meta.get("layout") != "row-major":
        raise TraceError(f"unsupported layout {meta.get('layout')!r}")
    try:
        n, m, steps = int(meta["n"]), int(meta["m"]), int(meta["steps"])
    except (KeyError, TypeError, ValueError) as err:
        raise TraceError(f"descriptor missing or malformed dimension fields: {err}") from err
    if min(n, m, steps) < 1:
        raise TraceError(f"dimensions must be >= 1, got n={n} m={m} steps={steps}")
    emb = _read_array(path / EMB_NAME, n, m, "embeddings")
    logits = _read_array(path / LOGITS_NAME, steps, n, "logits")
    if np.isnan(emb).any():
        bad = int(np.flatnonzero(np.isnan(emb).any(axis=1))[0])
        raise TraceError(f"NaN in embeddings at row {bad}")
    return TraceBundle(n=n, m=m, steps=steps, embeddings=emb, logits=logits)


def _dirichlet_logits(rng: np.random.Generator, n: int, alpha: float) -> np.ndarray:
    """log of a symmetric Dirichlet(alpha) draw, computed in log space.

    Uses log G_i = log Gamma(alpha + 1) + log(U)/alpha so tiny alpha never
    underflows; the returned logits are finite and tie-free.
    """
    boost = np.log(rng.uniform(size=n)) / alpha
    logg = np.log(rng.gamma(alpha + 1.0, size=n)) + boost
    shift = logg.max()
    lognorm = shift + math.log(np.exp(logg - shift).sum())
    return logg - lognorm


def synth_trace(
    n: int,
    m: int,
    steps: int,
    seed: int,
    generator: str = "gaussian",
    alpha: float = 1.0,
    clusters: int = 4,
    cluster_std: float = 0.05,
) -> TraceBundle:
    """Deterministic synthetic trace.

    gaussian: i.i.d. normal embedding rows. clustered: unit-norm cluster
    centers with tight normal scatter around them, so near-duplicate tokens
    share a neighborhood in the induced metric. Both draw each step's
    logits as log-Dirichlet(alpha) (alpha is the per-token concentration;
    smaller alpha means peakier steps).
    """
    if generator not in GENERATORS:
        raise TraceError(f"unknown generator {generator!r}; expected one of {GENERATORS}")
    if min(n, m, steps) < 1:
        raise TraceError(f"dimensions must be >= 1, got n={n} m={m} steps={steps}")
    if not alpha > 0:
        raise TraceError(f"alpha must be > 0, got {alpha!r}")
    rng = np.random.default_rng(seed)
    if generator == "gaussian":
        emb = rng.standard_normal((n, m))
    else:
        if clusters < 1:
            raise TraceError(f"clusters must be >= 1, got {clusters}")
        centers = rng.standard_normal((clusters, m))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        assign = rng.integers(0, clusters, size=n)
        emb = centers[assign] + cluster_std * rng.standard_normal((n, m))
    # an exactly-zero row would be rejected by the metric builder; nudge it
    zero = np.linalg.norm(emb, axis=1) == 0.0
    if zero.any():
        emb[zero, 0] = 1.0
    logits = np.stack([_dirichlet_logits(rng, n, alpha) for _ in range(steps)])
    return TraceBundle(
        n=n, m=m, steps=steps,
        embeddings=emb.astype("<f4"),
        logits=logits.astype("<f4"),
    )
