"""Buffer-level binding surface over the core truncation sampler.

External inference stacks talk to this module through raw buffers, integer
metric handles, and flat string-keyed config mappings:

- embeddings and logits cross the boundary as raw little-endian float32
  (the trace interchange layout); masked logits come back as raw
  little-endian float64, byte-identical to a direct core call on the same
  inputs;
- metric handles stay valid until released; releasing twice is a safe
  no-op;
- config mappings mirror the core config fields, with unknown keys
  rejected and absent keys taking the core defaults;
- every failure is a BindingError carrying a stable (code, message) pair;
  core exceptions never cross the boundary.

Handles are shareable across host threads; each call is independent and
holds no module-level lock during core computation.
"""

from __future__ import annotations

import itertools
import threading

import numpy as np

from topw.baselines import BaselineConfig, BaselineError, apply_baseline
from topw.decoder import (
    DecoderError,
    TopWConfig,
    WarmStart,
    process_logits,
    sample_from_masked,
)
from topw.geometry import GeometryError, TokenMetric, build_metric
from topw.harness import HarnessError
from topw.objective import ObjectiveError
from topw.selection import SelectionError
from topw.simplex import SimplexError
from topw.trace import TraceError

__version__ = "0.1.0"

TOPW_KEYS = (
    "lam",
    "beta",
    "sel_temperature",
    "top_m",
    "alt_iters",
    "warm_start",
    "epsilon_whiten",
)
BASELINE_KEYS = ("rule", "k", "threshold", "ratio", "alpha", "sel_temperature")


class BindingError(Exception):
    """Stable error surface: a code string plus a human-readable message."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.message = message


_CORE_ERRORS = (
    GeometryError,
    SimplexError,
    DecoderError,
    BaselineError,
    ObjectiveError,
    SelectionError,
    TraceError,
    HarnessError,
)

_CODE_OF = {
    GeometryError: "geometry",
    SimplexError: "distribution",
    DecoderError: "decoder",
    BaselineError: "baseline",
    ObjectiveError: "objective",
    SelectionError: "selection",
    TraceError: "trace",
    HarnessError: "harness",
}


def _coerce(err: Exception) -> BindingError:
    code = _CODE_OF.get(type(err), "core")
    return BindingError(code, str(err))


_registry: dict[int, TokenMetric] = {}
_registry_lock = threading.Lock()
_next_handle = itertools.count(1)


def _float32_view(buffer, count: int, what: str) -> np.ndarray:
    data = memoryview(buffer)
    expected = count * 4
    if data.nbytes != expected:
        raise BindingError(
            "dimension_mismatch",
            f"{what} buffer holds {data.nbytes} bytes, expected {expected} "
            f"({count} little-endian float32 values)",
        )
    return np.frombuffer(data, dtype="<f4")


def bind_metric(embedding_buffer, n: int, m: int, epsilon: float = 1e-5) -> int:
    """Build a token metric from a raw embedding buffer; returns a handle."""
    flat = _float32_view(embedding_buffer, int(n) * int(m), "embedding")
    try:
        metric = build_metric(flat.reshape(int(n), int(m)), epsilon=epsilon)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None
    handle = next(_next_handle)
    with _registry_lock:
        _registry[handle] = metric
    return handle


def release_metric(handle: int) -> bool:
    """Free a handle. Returns False (a no-op) when already released."""
    with _registry_lock:
        return _registry.pop(handle, None) is not None


def _metric_of(handle: int) -> TokenMetric:
    metric = _registry.get(handle)
    if metric is None:
        raise BindingError("invalid_handle", f"metric handle {handle!r} is not bound")
    return metric


def bound_distance(handle: int, i: int, j: int) -> float:
    try:
        return _metric_of(handle).distance(i, j)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None


def topw_config_from_mapping(mapping: dict | None) -> TopWConfig:
    """Flat key-value view of the sampler config; unknown keys rejected."""
    mapping = dict(mapping or {})
    unknown = sorted(set(mapping) - set(TOPW_KEYS))
    if unknown:
        raise BindingError(
            "invalid_config",
            f"unknown config keys {unknown}; valid keys: {sorted(TOPW_KEYS)}",
        )
    kwargs = {}
    for key in ("lam", "beta", "sel_temperature", "epsilon_whiten"):
        if key in mapping:
            kwargs[key] = float(mapping[key])
    for key in ("top_m", "alt_iters"):
        if key in mapping:
            kwargs[key] = int(mapping[key])
    if "warm_start" in mapping:
        kwargs["warm_start"] = _parse_warm_start(str(mapping["warm_start"]))
    try:
        return TopWConfig(**kwargs)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None


def _parse_warm_start(text: str) -> WarmStart:
    name, _, raw = text.partition(":")
    try:
        if name == "nucleus":
            return WarmStart.nucleus(float(raw) if raw else 0.9)
        if name == "top_k":
            return WarmStart.top_k(int(raw))
    except (ValueError, DecoderError) as err:
        raise BindingError("invalid_config", f"bad warm_start {text!r}: {err}") from None
    raise BindingError("invalid_config", f"unknown warm_start rule {text!r}")


def baseline_config_from_mapping(mapping: dict) -> BaselineConfig:
    mapping = dict(mapping)
    unknown = sorted(set(mapping) - set(BASELINE_KEYS))
    if unknown:
        raise BindingError(
            "invalid_config",
            f"unknown config keys {unknown}; valid keys: {sorted(BASELINE_KEYS)}",
        )
    if "rule" not in mapping:
        raise BindingError("invalid_config", "baseline config needs a 'rule' key")
    kwargs = {"rule": str(mapping["rule"])}
    if "k" in mapping:
        kwargs["k"] = int(mapping["k"])
    for key in ("threshold", "ratio", "alpha", "sel_temperature"):
        if key in mapping:
            kwargs[key] = float(mapping[key])
    try:
        return BaselineConfig(**kwargs)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None


def _report_mapping(rep) -> dict:
    return {
        "crop": [int(t) for t in rep.crop.members],
        "gamma": rep.gamma,
        "crop_entropy": rep.crop_entropy,
        "iterations_used": rep.iterations_used,
        "converged_early": rep.converged_early,
        "regime_per_iter": list(rep.regime_per_iter),
        "elapsed": rep.elapsed,
    }


def bound_process_logits(handle: int, logits_buffer, config_mapping: dict | None = None):
    """One decode step over a raw float32 logits buffer.

    Returns (masked_logits_bytes, report_mapping) where the masked logits
    are little-endian float64, byte-identical to the core's output for the
    same float32-decoded inputs.
    """
    metric = _metric_of(handle)
    logits = _float32_view(logits_buffer, metric.n, "logits")
    config = topw_config_from_mapping(config_mapping)
    try:
        masked, rep = process_logits(np.asarray(logits, dtype=np.float64), metric, config)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None
    return np.ascontiguousarray(masked, dtype="<f8").tobytes(), _report_mapping(rep)


def bound_apply_baseline(logits_buffer, config_mapping: dict, n: int):
    """Baseline truncation over a raw float32 logits buffer."""
    logits = _float32_view(logits_buffer, int(n), "logits")
    config = baseline_config_from_mapping(config_mapping)
    try:
        masked, crop = apply_baseline(np.asarray(logits, dtype=np.float64), config)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None
    report = {"crop": [int(t) for t in crop.members], "gamma": crop.gamma}
    return np.ascontiguousarray(masked, dtype="<f8").tobytes(), report


def bound_sample_from_masked(masked_buffer, sel_temperature: float, rng_seed: int, n: int) -> int:
    """Categorical draw from a raw float64 masked-logits buffer."""
    data = memoryview(masked_buffer)
    expected = int(n) * 8
    if data.nbytes != expected:
        raise BindingError(
            "dimension_mismatch",
            f"masked buffer holds {data.nbytes} bytes, expected {expected} "
            f"({n} little-endian float64 values)",
        )
    masked = np.frombuffer(data, dtype="<f8")
    try:
        return sample_from_masked(masked, sel_temperature, rng_seed)
    except _CORE_ERRORS as err:
        raise _coerce(err) from None
