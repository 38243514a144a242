"""c-concave calculus on finite point sets."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .costs import CostSpec
from .rng import stream
from .solver import cost_matrix


class DualityError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialVector:
    side: str
    values: np.ndarray
    anchored_at: Optional[int] = None

    def __post_init__(self):
        if self.side not in ("P", "Q"):
            raise DualityError(f"side must be 'P' or 'Q', got {self.side!r}")
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size == 0 or not np.all(np.isfinite(vals)):
            raise DualityError("potential values must be finite and non-empty")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.shape[0]


def other_side(side: str) -> str:
    return "Q" if side == "P" else "P"


def _points(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def c_transform(spec: CostSpec, f: PotentialVector, source_points, target_points,
                chunk: int = 2048) -> PotentialVector:
    """``g(y) = min_x [c(x, y) - f(x)]`` over the finite source set.

    The cost is always evaluated as ``c(x, y)`` with ``x`` a P-point, so when
    ``f`` lives on Q the roles are swapped accordingly.
    """
    src = _points(source_points)
    tgt = _points(target_points)
    if src.shape[0] == 0:
        raise DualityError("c-transform over an empty source set")
    if src.shape[0] != len(f):
        raise DualityError(f"{len(f)} potential values for {src.shape[0]} source points")
    out = np.empty(tgt.shape[0])
    for start in range(0, tgt.shape[0], chunk):
        t = tgt[start:start + chunk]
        if f.side == "P":
            C = cost_matrix(spec, src, t)          # (n_src, k)
        else:
            C = cost_matrix(spec, t, src).T        # c(target as x, source as y)
        out[start:start + chunk] = np.min(C - f.values[:, None], axis=0)
    return PotentialVector(other_side(f.side), out)


def dual_value(u: PotentialVector, v: PotentialVector, p_weights, q_weights) -> float:
    return float(np.dot(p_weights, u.values) + np.dot(q_weights, v.values))


def canonicalize(spec: CostSpec, u: PotentialVector, v: PotentialVector, P, Q,
                 tol: float = 1e-9):
    """Double c-transform ``(u, v) -> (u^{cc}, u^c)``.

    The input pair must be dual feasible; the output is feasible, has a dual
    objective at least as large and its P-side is c-concave on the sample.
    """
    xp, yq = _points(P.points), _points(Q.points)
    C = cost_matrix(spec, xp, yq)
    scale = max(float(C.max()), 1.0)
    viol = float(np.max(u.values[:, None] + v.values[None, :] - C))
    if viol > tol * scale:
        raise DualityError(f"input pair is infeasible (max violation {viol:.3g})")
    v_c = np.min(C - u.values[:, None], axis=0)
    u_cc = np.min(C - v_c[None, :], axis=1)
    return PotentialVector("P", u_cc), PotentialVector("Q", v_c)


def anchor(f: PotentialVector, p0_index: int) -> PotentialVector:
    if not 0 <= p0_index < len(f):
        raise DualityError(f"anchor index {p0_index} out of range")
    vals = f.values - f.values[p0_index]
    vals[p0_index] = 0.0
    return replace(f, values=vals, anchored_at=int(p0_index))


def lexmin_index(points) -> int:
    """Index of the lexicographically smallest point."""
    pts = _points(points)
    order = np.lexsort(pts.T[::-1])
    return int(order[0])


def canonical_potentials(spec: CostSpec, duals, P, Q):
    """Canonical c-concave pair anchored at the lexicographically smallest P-point.

    The Q-side receives the opposite shift so the pair stays tight.
    """
    u, v = canonicalize(spec, PotentialVector("P", duals.u), PotentialVector("Q", duals.v), P, Q)
    k = lexmin_index(P.points)
    a = u.values[k]
    u_a = anchor(u, k)
    v_a = replace(v, values=v.values + a)
    return u_a, v_a


@dataclass
class SuperdifferentialGraph:
    pairs: list
    tol: float
    margins: np.ndarray

    def __contains__(self, pair):
        return tuple(pair) in set(self.pairs)

    def __len__(self):
        return len(self.pairs)


def superdifferential(spec: CostSpec, f: PotentialVector, f_c: PotentialVector,
                      p_points, q_points, tau: float | None = None) -> SuperdifferentialGraph:
    """Pairs with ``f(x_i) + f_c(y_j) >= c(x_i, y_j) - tau``."""
    C = cost_matrix(spec, _points(p_points), _points(q_points))
    if tau is None:
        tau = 1e-8 * (1.0 + float(C.max()))
    gap = f.values[:, None] + f_c.values[None, :] - C
    ii, jj = np.nonzero(gap >= -tau)
    return SuperdifferentialGraph(list(zip(ii.tolist(), jj.tolist())), tau, gap[ii, jj])


@dataclass
class MonotonicityReport:
    worst_margin: float
    worst_subset: tuple
    subsets_checked: int
    passed: bool
    tol: float


def check_cyclical_monotonicity(spec: CostSpec, xs, ys, k_max: int = 6, trials: int = 200,
                                seed: int = 0, tol: float = 1e-9) -> MonotonicityReport:
    """Search for a permutation of matched pairs ``(xs[k], ys[k])`` lowering the cost.

    All subsets of size <= 3 are checked with every permutation; for sizes
    ``4..k_max`` ``trials`` random subsets are checked with all cyclic shifts.
    The margin of a subset is ``min_sigma sum c(x_sigma(k), y_k) - sum c(x_k, y_k)``.
    """
    if k_max < 2:
        raise DualityError("k_max must be >= 2")
    xs, ys = _points(xs), _points(ys)
    N = xs.shape[0]
    if N == 0 or ys.shape[0] != N:
        raise DualityError("need a non-empty list of (x, y) pairs")
    C = cost_matrix(spec, xs, ys)
    diag = np.diag(C)
    worst, worst_sub, checked = np.inf, (), 0

    # M[i, j]: change in cost when x_i takes over y_j from x_j
    M = C - diag[None, :]
    if N >= 2:
        pair = M + M.T
        np.fill_diagonal(pair, np.inf)
        i, j = np.unravel_index(np.argmin(pair), pair.shape)
        worst, worst_sub = float(pair[i, j]), (int(j), int(i))
        checked += N * (N - 1) // 2
    if N >= 3:
        # transpositions inside a triple reduce to the pair case; only 3-cycles are new
        for i in range(N):
            cyc = M[i, :, None] + M + M[None, :, i]
            cyc[i, :] = np.inf
            cyc[:, i] = np.inf
            np.fill_diagonal(cyc, np.inf)
            j, l = np.unravel_index(np.argmin(cyc), cyc.shape)
            if cyc[j, l] < worst:
                worst, worst_sub = float(cyc[j, l]), (int(l), int(i), int(j))
        checked += N * (N - 1) * (N - 2) // 6

    rng = stream(seed, "cyclical_monotonicity")
    for k in range(4, min(k_max, N) + 1):
        for _ in range(trials):
            s = rng.choice(N, size=k, replace=False)
            base = diag[s].sum()
            for shift in range(1, k):
                perm = np.roll(s, shift)
                marg = C[perm, s].sum() - base
                if marg < worst:
                    worst, worst_sub = marg, tuple(perm.tolist())
            checked += 1

    if not np.isfinite(worst):
        worst = 0.0
    scale = max(float(C.max()), 1.0)
    return MonotonicityReport(float(worst), worst_sub, checked, worst >= -tol * scale, tol)


def plan_pairs(plan, P, Q):
    """Matched point pairs ``(x_i, y_j)`` on the plan support."""
    return P.points[plan.rows], Q.points[plan.cols]
