"""Exact Wasserstein-1 on small supports, plus dual-side checks.

The exact solver is a test oracle: it solves the dense transportation LP
with HiGHS and is capped at 64 joint-support tokens. The production decode
path never calls it; it exists so the factorization, surrogate-bound, and
uniform-metric reductions can be verified against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .simplex import Dist, _member_array, conditional, crop

MAX_SUPPORT = 64
# masses below this are dropped from OT supports to avoid degenerate flows
MASS_FLOOR = 1e-15
LIPSCHITZ_SLACK = 1e-9


class TransportError(ValueError):
    """Oversized support or infeasible dual candidate."""


@dataclass(frozen=True)
class TransportPlan:
    source_tokens: np.ndarray  # (r,)
    target_tokens: np.ndarray  # (s,)
    flows: np.ndarray          # (r, s) nonnegative
    cost: float

    def marginal_error(self, source_mass: np.ndarray, target_mass: np.ndarray) -> float:
        row = np.abs(self.flows.sum(axis=1) - source_mass).max()
        col = np.abs(self.flows.sum(axis=0) - target_mass).max()
        return float(max(row, col))


@dataclass(frozen=True)
class LipschitzReport:
    ok: bool
    worst_pair: tuple[int, int] | None
    worst_excess: float

    def __bool__(self) -> bool:
        return self.ok


def _support(p: Dist) -> np.ndarray:
    return np.flatnonzero(p.probs > MASS_FLOOR)


def _solve_transport(a: np.ndarray, b: np.ndarray, cost: np.ndarray):
    """Dense transportation LP: min <cost, x>, row sums a, col sums b.

    Returns (value, flows, dual_row, dual_col). HiGHS returns a vertex
    solution, so the flows are an exact basic feasible plan up to solver
    tolerance.
    """
    r, s = cost.shape
    row = sparse.kron(sparse.eye(r, format="csr"), np.ones((1, s)), format="csr")
    col = sparse.kron(np.ones((1, r)), sparse.eye(s, format="csr"), format="csr")
    a_eq = sparse.vstack([row, col], format="csr")
    b_eq = np.concatenate([a, b])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise TransportError(f"transport LP failed: {res.message}")
    flows = res.x.reshape(r, s)
    duals = np.asarray(res.eqlin.marginals, dtype=np.float64)
    return float(res.fun), flows, duals[:r], duals[r:]


def w1_exact(P: Dist, Q: Dist, metric) -> tuple[float, TransportPlan]:
    """Exact W1(P, Q) under the metric, with the optimal plan.

    Joint support is capped at MAX_SUPPORT tokens; anything larger belongs
    on the surrogate path, not here.
    """
    if P.n != Q.n:
        raise TransportError("P and Q must share a vocabulary")
    src = _support(P)
    tgt = _support(Q)
    joint = np.union1d(src, tgt)
    if joint.size > MAX_SUPPORT:
        raise TransportError(
            f"joint support {joint.size} exceeds {MAX_SUPPORT}; "
            "use the fixed-potential surrogate path for large instances"
        )
    if src.size == tgt.size and np.array_equal(src, tgt) and np.allclose(
        P.probs[src], Q.probs[src], rtol=0.0, atol=0.0
    ):
        # identical distributions: the diagonal plan is optimal at cost 0
        flows = np.diag(P.probs[src])
        plan = TransportPlan(source_tokens=src, target_tokens=src, flows=flows, cost=0.0)
        return 0.0, plan
    cost = metric.pairwise(src, tgt)
    value, flows, _, _ = _solve_transport(P.probs[src], Q.probs[tgt], cost)
    value = max(value, 0.0)
    plan = TransportPlan(source_tokens=src, target_tokens=tgt, flows=flows, cost=value)
    return value, plan


def kr_optimal_potential(P: Dist, Q: Dist, metric) -> tuple[np.ndarray, np.ndarray]:
    """A 1-Lipschitz potential attaining E_P[f] - E_Q[f] = W1(P, Q).

    Built from the transportation LP duals by a c-transform against the
    target-side prices: f(z) = min_j (d(z, y_j) - v_j). The c-transform of
    any price vector is 1-Lipschitz when the cost is a metric, and it
    dominates the row duals, so optimality is preserved.

    Returns (tokens, values) over the joint support.
    """
    src = _support(P)
    tgt = _support(Q)
    joint = np.union1d(src, tgt)
    if joint.size > MAX_SUPPORT:
        raise TransportError(f"joint support {joint.size} exceeds {MAX_SUPPORT}")
    cost = metric.pairwise(src, tgt)
    _, _, _, v = _solve_transport(P.probs[src], Q.probs[tgt], cost)
    d_joint = metric.pairwise(joint, tgt)
    f = (d_joint - v[None, :]).min(axis=1)
    return joint, f


def w1_uniform_metric(p: Dist, S) -> float:
    """Closed form under the 0-1 metric: W1(p, q_S) = 1 - Gamma_S."""
    S = _member_array(S)
    if S.size == 0:
        raise TransportError("w1_uniform_metric: empty token set")
    gamma = float(p.probs[S].sum())
    if gamma <= 0.0:
        raise TransportError("w1_uniform_metric: crop has zero mass")
    return 1.0 - gamma


def check_lipschitz(f, metric, tokens) -> LipschitzReport:
    """Exhaustive 1-Lipschitz check of f over the token list.

    f[k] is the potential value of tokens[k]. Accepts |f_i - f_j| up to
    d(i,j) * (1 + 1e-9).
    """
    tokens = np.asarray(tokens, dtype=np.intp)
    if tokens.size == 0:
        raise TransportError("check_lipschitz: empty token list")
    f = np.asarray(f, dtype=np.float64)
    if f.shape != tokens.shape:
        raise TransportError(f"potential has {f.size} values for {tokens.size} tokens")
    d = metric.pairwise(tokens, tokens)
    excess = np.abs(f[:, None] - f[None, :]) - d * (1.0 + LIPSCHITZ_SLACK)
    np.fill_diagonal(excess, -np.inf)
    worst_flat = int(np.argmax(excess))
    i, j = np.unravel_index(worst_flat, excess.shape)
    worst = float(excess[i, j])
    ok = worst <= 0.0
    pair = (int(tokens[i]), int(tokens[j]))
    return LipschitzReport(ok=ok, worst_pair=None if ok else pair, worst_excess=max(worst, 0.0))


def kr_dual_gap(P: Dist, Q: Dist, f, metric) -> float:
    """Slack of a feasible dual candidate: W1(P,Q) - (E_P[f] - E_Q[f]).

    f is a full-vocabulary vector. Feasibility is checked exhaustively on
    the joint support; an infeasible candidate is rejected with the
    violating pair named. Weak duality makes the gap >= -1e-9, and it is 0
    exactly when f is optimal.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != P.probs.shape:
        raise TransportError("potential must cover the full vocabulary")
    joint = np.union1d(_support(P), _support(Q))
    report = check_lipschitz(f[joint], metric, joint)
    if not report.ok:
        raise TransportError(
            f"potential is not 1-Lipschitz: pair {report.worst_pair} "
            f"exceeds the metric by {report.worst_excess:.3e}"
        )
    value, _ = w1_exact(P, Q, metric)
    sp = P.probs > 0.0
    sq = Q.probs > 0.0
    attained = float(P.probs[sp] @ f[sp] - Q.probs[sq] @ f[sq])
    return value - attained


def factorization_residual(p: Dist, S, metric) -> float:
    """|W1(p, q_S) - (1 - Gamma) * W1(p|S^c, p|S)| via the exact oracle.

    Requires 0 < Gamma_S < 1 (the factorization's hypotheses).
    """
    S = _member_array(S)
    gamma = float(p.probs[S].sum())
    if not 0.0 < gamma < 1.0:
        raise TransportError(f"factorization requires 0 < Gamma < 1, got {gamma!r}")
    _, q = crop(p, S)
    lhs, _ = w1_exact(p, q, metric)
    comp = np.setdiff1d(np.arange(p.n), S)
    cond_out = conditional(p, comp)
    cond_in = conditional(p, S)
    inner, _ = w1_exact(cond_out, cond_in, metric)
    rhs = (1.0 - gamma) * inner
    return abs(lhs - rhs)
