"""Embedding-induced token metric.

Raw embeddings are L2-normalized per row, mean-centered, and scaled by
per-coordinate inverse standard deviations (diagonal whitening with an
epsilon regularizer). The token distance is the Euclidean distance between
whitened rows. Whitening is done once per (embedding, epsilon) pair; all
distance queries run against the cached whitened matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Invalid embedding input or metric query."""


def _as_index_array(ids) -> np.ndarray:
    if isinstance(ids, (set, frozenset)):
        ids = sorted(ids)
    arr = np.asarray(ids, dtype=np.intp)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


@dataclass(frozen=True)
class TokenMetric:
    """Whitened embedding geometry over a fixed vocabulary.

    Immutable after construction; safe to share across threads.
    """

    whitened: np.ndarray          # (n, m) float64, read-only
    scale: np.ndarray             # (m,) per-coordinate whitening factors
    mean: np.ndarray              # (m,) per-coordinate mean of normalized rows
    epsilon: float
    sqnorms: np.ndarray = field(repr=False, default=None)  # cached row ||w||^2

    def __post_init__(self):
        if self.sqnorms is None:
            sq = np.einsum("ij,ij->i", self.whitened, self.whitened)
            sq.flags.writeable = False
            object.__setattr__(self, "sqnorms", sq)

    @property
    def n(self) -> int:
        return self.whitened.shape[0]

    @property
    def dim(self) -> int:
        return self.whitened.shape[1]

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise GeometryError(f"token index {i} out of range [0, {self.n})")
        return i

    def distance(self, i: int, j: int) -> float:
        i, j = self._check_index(i), self._check_index(j)
        diff = self.whitened[i] - self.whitened[j]
        return float(np.sqrt(np.dot(diff, diff)))

    def dist_to_set(self, i: int, S) -> float:
        """min over j in S of distance(i, j). S must be nonempty."""
        i = self._check_index(i)
        S = _as_index_array(S)
        if S.size == 0:
            raise GeometryError("dist_to_set: empty token set")
        if S.min() < 0 or S.max() >= self.n:
            raise GeometryError("dist_to_set: token index out of range")
        if np.any(S == i):
            return 0.0
        diffs = self.whitened[S] - self.whitened[i]
        return float(np.sqrt(np.einsum("ij,ij->i", diffs, diffs).min()))

    def pairwise(self, ii, jj) -> np.ndarray:
        """Dense distance matrix between two index lists."""
        ii, jj = _as_index_array(ii), _as_index_array(jj)
        wi, wj = self.whitened[ii], self.whitened[jj]
        d2 = (
            self.sqnorms[ii][:, None]
            + self.sqnorms[jj][None, :]
            - 2.0 * (wi @ wj.T)
        )
        np.maximum(d2, 0.0, out=d2)
        # exact zeros on shared tokens so anchoring is exact, not epsilon
        shared = ii[:, None] == jj[None, :]
        if shared.any():
            d2[shared] = 0.0
        return np.sqrt(d2)

    def sqdist_columns(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Squared distances, (len(rows), len(cols)). Hot-path primitive."""
        wr, wc = self.whitened[rows], self.whitened[cols]
        d2 = (
            self.sqnorms[rows][:, None]
            + self.sqnorms[cols][None, :]
            - 2.0 * (wr @ wc.T)
        )
        np.maximum(d2, 0.0, out=d2)
        return d2


def build_metric(emb, epsilon: float = 1e-5) -> TokenMetric:
    """Construct the whitened token metric from a raw embedding matrix.

    emb: (n, m) array-like, row i is the raw embedding of token i.
    epsilon: variance regularizer, must be > 0. Keeps the scale finite on
    constant coordinates.

    Rejects non-finite entries and all-zero rows (a zero row cannot be
    normalized, and silently patching it would corrupt the metric).
    """
    if not (np.isscalar(epsilon) and np.isfinite(epsilon) and epsilon > 0):
        raise GeometryError(f"epsilon must be a positive finite real, got {epsilon!r}")
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] < 1 or emb.shape[1] < 1:
        raise GeometryError(f"embedding matrix must be 2-D and nonempty, got shape {emb.shape}")
    finite = np.isfinite(emb)
    if not finite.all():
        bad = int(np.flatnonzero(~finite.all(axis=1))[0])
        raise GeometryError(f"non-finite entry in embedding row {bad}")
    norms = np.linalg.norm(emb, axis=1)
    zero = norms == 0.0
    if zero.any():
        bad = int(np.flatnonzero(zero)[0])
        raise GeometryError(f"all-zero embedding row at token {bad}")

    tilde = emb / norms[:, None]
    mean = tilde.mean(axis=0)
    var = np.mean((tilde - mean) ** 2, axis=0)
    scale = 1.0 / np.sqrt(var + epsilon)
    whitened = (tilde - mean) * scale

    whitened = np.ascontiguousarray(whitened)
    for arr in (whitened, scale, mean):
        arr.flags.writeable = False
    return TokenMetric(whitened=whitened, scale=scale, mean=mean, epsilon=float(epsilon))


def dist_to_set(metric: TokenMetric, i: int, S) -> float:
    return metric.dist_to_set(i, S)


def batched_dist_to_set(metric: TokenMetric, pool, S) -> np.ndarray:
    """Vectorized dist_to_set over a pool of tokens.

    Elementwise equal to the scalar query; anchor tokens (pool entries that
    are members of S) come back exactly 0.
    """
    pool = _as_index_array(pool)
    S = _as_index_array(S)
    if S.size == 0:
        raise GeometryError("batched_dist_to_set: empty token set")
    n = metric.n
    for arr, name in ((pool, "pool"), (S, "S")):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise GeometryError(f"batched_dist_to_set: {name} index out of range")
    d2 = metric.sqdist_columns(pool, S)
    out = d2.min(axis=1)
    out[np.isin(pool, S)] = 0.0
    return np.sqrt(out)


@dataclass(frozen=True)
class UniformMetric:
    """The 0-1 token metric: d(i,j) = 1{i != j}.

    Used by the reduction checks where geometry is switched off; transport
    under this metric depends only on retained mass.
    """

    n: int

    def distance(self, i: int, j: int) -> float:
        return 0.0 if int(i) == int(j) else 1.0

    def dist_to_set(self, i: int, S) -> float:
        S = _as_index_array(S)
        if S.size == 0:
            raise GeometryError("dist_to_set: empty token set")
        return 0.0 if np.any(S == int(i)) else 1.0

    def pairwise(self, ii, jj) -> np.ndarray:
        ii, jj = _as_index_array(ii), _as_index_array(jj)
        return (ii[:, None] != jj[None, :]).astype(np.float64)
