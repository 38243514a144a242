"""Exact discrete optimal transport via the network simplex method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._simplex import network_simplex
from .costs import CostError, CostSpec
from .measures import DiscreteMeasure

MAX_PAIRS = 50_000_000
# reduced-cost threshold on the rescaled problem (max cost 1)
PIVOT_TOL = 1e-12


class SolverError(RuntimeError):
    """Numerical failure inside the solver."""


class BudgetError(ValueError):
    """Problem exceeds the configured memory budget."""


@dataclass(frozen=True)
class TransportPlan:
    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    objective: float
    n: int
    m: int

    @property
    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.mass.tolist()))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.m))
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def __len__(self):
        return self.mass.shape[0]


@dataclass(frozen=True)
class DualPair:
    u: np.ndarray
    v: np.ndarray
    anchored: bool = False
    anchor_index: int | None = None

    def objective(self, p_weights, q_weights) -> float:
        return float(np.dot(p_weights, self.u) + np.dot(q_weights, self.v))


def build_cost_matrix(spec: CostSpec, P: DiscreteMeasure, Q: DiscreteMeasure) -> np.ndarray:
    """``C[i, j] = h(x_i - y_j)``."""
    if P.d != spec.d or Q.d != spec.d:
        raise CostError(f"cost is {spec.d}-dimensional but measures are {P.d}- and {Q.d}-dimensional")
    return cost_matrix(spec, P.points, Q.points)


def cost_matrix(spec: CostSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    if spec.kind == "power" and x.shape[1] == 1:
        with np.errstate(over="ignore"):
            C = np.abs(x - y.T) ** spec.p
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            C = spec.h_of(x[:, None, :] - y[None, :, :])
    if not np.all(np.isfinite(C)):
        i, j = np.argwhere(~np.isfinite(C))[0]
        raise CostError(f"cost overflows to a non-finite value at pair ({i}, {j})")
    if np.any(C < 0):
        i, j = np.argwhere(C < 0)[0]
        raise CostError(f"negative cost at pair ({i}, {j})")
    return C


def solve_discrete_ot(spec: CostSpec, P: DiscreteMeasure, Q: DiscreteMeasure,
                      max_pairs: int = MAX_PAIRS):
    """Optimal plan and optimal duals for the transportation problem.

    Returns ``(plan, duals)``. The plan is a basic optimal solution; duals
    satisfy ``u_i + v_j <= C_ij`` with equality on the plan support.
    """
    if P.n * Q.n > max_pairs:
        raise BudgetError(f"{P.n} x {Q.n} pairs exceed the budget of {max_pairs}")
    C = build_cost_matrix(spec, P, Q)
    return solve_cost_matrix(C, P.weights, Q.weights)


def solve_cost_matrix(C: np.ndarray, a: np.ndarray, b: np.ndarray):
    C = np.ascontiguousarray(C, dtype=float)
    n, m = C.shape
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    scale = float(C.max())
    if not scale > 0:
        scale = 1.0
    Cs = C / scale
    flow, pi, _, status = network_simplex(Cs.ravel(), a, b, PIVOT_TOL, 50 * (n + m) ** 2 + 1000)
    if status != 0:
        raise SolverError("network simplex hit its iteration limit")
    # supply nodes carry -u, demand nodes carry v; shift so that u_0 = 0
    u = -pi[:n]
    v = pi[n:]
    shift = u[0]
    u = (u - shift) * scale
    v = (v + shift) * scale

    idx = np.flatnonzero(flow > 0)
    rows, cols = np.divmod(idx, m)
    mass = flow[idx]
    objective = float(np.dot(mass, C.ravel()[idx]))
    plan = TransportPlan(rows, cols, mass, objective, n, m)
    return plan, DualPair(u, v)


@dataclass
class Certificate:
    marginal_violation: float
    dual_infeasibility: float
    slackness_violation: float
    duality_gap: float
    support_size: int
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.marginal_violation, self.dual_infeasibility,
                   self.slackness_violation, self.duality_gap) <= self.tol

    def as_dict(self) -> dict:
        return {
            "marginal_violation": self.marginal_violation,
            "dual_infeasibility": self.dual_infeasibility,
            "slackness_violation": self.slackness_violation,
            "duality_gap": self.duality_gap,
            "support_size": self.support_size,
            "passed": self.passed,
        }


def verify_optimality(plan: TransportPlan, duals: DualPair, C: np.ndarray,
                      p_weights: np.ndarray, q_weights: np.ndarray,
                      tol: float = 1e-9) -> Certificate:
    """Primal/dual optimality certificate, measured after rescaling costs to max 1."""
    C = np.asarray(C, dtype=float)
    if C.shape != (plan.n, plan.m) or duals.u.shape != (plan.n,) or duals.v.shape != (plan.m,):
        raise ValueError("plan, duals and cost matrix shapes disagree")
    scale = float(C.max()) if C.max() > 0 else 1.0
    rs = np.bincount(plan.rows, plan.mass, minlength=plan.n)
    cs = np.bincount(plan.cols, plan.mass, minlength=plan.m)
    marg = max(float(np.max(np.abs(rs - p_weights))), float(np.max(np.abs(cs - q_weights))))
    if np.any(plan.mass < 0):
        marg = max(marg, float(-plan.mass.min()))
    u, v = duals.u / scale, duals.v / scale
    Cs = C / scale
    infeas = max(0.0, float(np.max(u[:, None] + v[None, :] - Cs)))
    if len(plan):
        slack = float(np.max(np.abs(u[plan.rows] + v[plan.cols] - Cs[plan.rows, plan.cols])))
    else:
        slack = 0.0
    primal = float(np.dot(plan.mass, Cs[plan.rows, plan.cols]))
    dual = float(np.dot(p_weights, u) + np.dot(q_weights, v))
    return Certificate(marg, infeas, slack, abs(primal - dual), len(plan), tol)
