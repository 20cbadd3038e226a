"""Geometry-anchored feasible potentials.

The attraction potential -dist(i, S) is the pointwise-minimal 1-Lipschitz
function vanishing on S; its negation is the pointwise-maximal one. Every
anchored feasible potential lives between the two, which envelope_check
verifies exhaustively. Custom potentials are only admitted through a
validating constructor: the surrogate bound is vacuous for an infeasible
potential and the damage downstream would be silent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import batched_dist_to_set
from .transport import check_lipschitz

ANCHOR_TOL = 1e-12
ENVELOPE_SLACK = 1e-9


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class Potential:
    """A potential over a token pool, optionally anchored on a crop."""

    values: np.ndarray            # (k,) aligned with pool
    pool: np.ndarray              # (k,) token ids
    anchor_set: np.ndarray | None  # token ids it was built from, if any
    kind: str                     # "attraction" | "repulsion" | "custom"

    def value_of(self, token: int) -> float:
        pos = np.flatnonzero(self.pool == token)
        if pos.size == 0:
            raise PotentialError(f"token {token} not in the potential's pool")
        return float(self.values[pos[0]])


def _validate_inputs(pool, S) -> tuple[np.ndarray, np.ndarray]:
    pool = np.asarray(pool, dtype=np.intp)
    S = np.asarray(S, dtype=np.intp)
    if S.size == 0:
        raise PotentialError("anchor set is empty")
    if not np.isin(S, pool).all():
        raise PotentialError("anchor set must be a subset of the pool")
    return pool, S


def attraction_potential(metric, pool, S) -> Potential:
    """f(i) = -dist(i, S): the strongest feasible pull toward the crop."""
    pool, S = _validate_inputs(pool, S)
    values = -batched_dist_to_set(metric, pool, S)
    return Potential(values=values, pool=pool, anchor_set=S, kind="attraction")


def repulsion_potential(metric, pool, S) -> Potential:
    """f(i) = +dist(i, S): the repulsive mirror of the attraction potential."""
    pool, S = _validate_inputs(pool, S)
    values = batched_dist_to_set(metric, pool, S)
    return Potential(values=values, pool=pool, anchor_set=S, kind="repulsion")


def custom_potential(values, metric, pool, anchor_set=None) -> Potential:
    """Admit an arbitrary potential after an exhaustive feasibility check."""
    pool = np.asarray(pool, dtype=np.intp)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != pool.shape:
        raise PotentialError(f"{values.size} values for {pool.size} pool tokens")
    report = check_lipschitz(values, metric, pool)
    if not report.ok:
        raise PotentialError(
            f"potential violates 1-Lipschitzness at pair {report.worst_pair} "
            f"by {report.worst_excess:.3e}"
        )
    anchor = None if anchor_set is None else np.asarray(anchor_set, dtype=np.intp)
    return Potential(values=values, pool=pool, anchor_set=anchor, kind="custom")


def envelope_check(potential: Potential, metric, pool) -> bool:
    """True iff -dist(i, S) <= f(i) <= dist(i, S) for every pool token.

    Requires an anchored potential (zero on its anchor set); rejects
    anything else since the envelope statement only applies there.
    """
    pool = np.asarray(pool, dtype=np.intp)
    if potential.anchor_set is None:
        raise PotentialError("envelope_check requires an anchored potential")
    if not np.array_equal(pool, potential.pool):
        raise PotentialError("pool mismatch between potential and query")
    S = potential.anchor_set
    on_anchor = np.isin(pool, S)
    if np.abs(potential.values[on_anchor]).max(initial=0.0) > ANCHOR_TOL:
        raise PotentialError("potential is not anchored: nonzero value on the anchor set")
    env = batched_dist_to_set(metric, pool, S)
    lo_ok = (potential.values >= -env - ENVELOPE_SLACK).all()
    hi_ok = (potential.values <= env + ENVELOPE_SLACK).all()
    return bool(lo_ok and hi_ok)
