"""Central-limit inference for empirical transport costs.

All intervals are Wald intervals built from the plug-in variance of the
canonical (c-concave, anchored) dual potentials. They are centered at the
expected empirical cost, not at the population cost.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .costs import CostError, CostSpec, validate_assumptions
from .duality import canonical_potentials
from .measures import DiscreteMeasure, fmt
from .solver import solve_discrete_ot

CENTER_NOTE = "CI targets E T_c(P_n,Q), not T_c(P,Q)"
WP_CENTER_NOTE = "CI targets (E T_p(P_n,Q_m))^(1/p), not W_p(P,Q)"
LAMBDA_NOTE = "lambda estimated as n/(n+m)"
EPS_SEP = 1e-6


class InferenceError(ValueError):
    pass


class DegenerateVarianceWarning(UserWarning):
    pass


@dataclass
class CltReport:
    kind: str
    statistic: float
    sigma_sq_hat: float
    stderr: float
    ci: tuple
    alpha: float
    n: int
    m: int = 0
    lam: Optional[float] = None
    es_bound: Optional[float] = None
    center_note: str = CENTER_NOTE
    sigma_sq_p: Optional[float] = None
    sigma_sq_q: Optional[float] = None
    notes: list = field(default_factory=list)

    KEYS = ("schema_version", "kind", "statistic", "sigma_sq_hat", "stderr", "ci", "alpha",
            "n", "m", "lambda", "sigma_sq_p", "sigma_sq_q", "es_bound", "center_note", "notes")

    @property
    def width(self) -> float:
        return self.ci[1] - self.ci[0]

    def as_dict(self) -> dict:
        vals = {
            "schema_version": 1,
            "kind": self.kind,
            "statistic": self.statistic,
            "sigma_sq_hat": self.sigma_sq_hat,
            "stderr": self.stderr,
            "ci": [self.ci[0], self.ci[1]],
            "alpha": self.alpha,
            "n": self.n,
            "m": self.m,
            "lambda": self.lam,
            "sigma_sq_p": self.sigma_sq_p,
            "sigma_sq_q": self.sigma_sq_q,
            "es_bound": self.es_bound,
            "center_note": self.center_note,
            "notes": list(self.notes),
        }
        return {k: vals[k] for k in self.KEYS}

    def to_json(self) -> str:
        return dumps(self.as_dict())


def dumps(obj) -> str:
    """JSON with floats written to 17 significant digits, keys in insertion order."""
    return json.dumps(_encode(obj), indent=2, allow_nan=True).replace('"__RAW__', "").replace('__RAW__"', "")


def _encode(obj):
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "__RAW__NaN__RAW__"
        if math.isinf(x):
            return "__RAW__" + ("Infinity" if x > 0 else "-Infinity") + "__RAW__"
        return "__RAW__" + fmt(x) + "__RAW__"
    return obj


def _z(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise InferenceError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(norm.ppf(1 - alpha / 2))


def sigma_sq_plugin(potential, weights) -> float:
    """Variance of the potential values under the given weights."""
    vals = np.asarray(getattr(potential, "values", potential), dtype=float)
    w = np.asarray(weights, dtype=float)
    mean = np.dot(w, vals)
    return float(max(np.dot(w, (vals - mean) ** 2), 0.0))


def _require_cost(spec: CostSpec, check: bool):
    if check:
        rep = validate_assumptions(spec)
        if not rep.passed:
            raise CostError("cost fails the strict convexity / growth checks")


def _interval(stat, se, z):
    return (stat - z * se, stat + z * se)


def one_sample_ci(spec: CostSpec, X: DiscreteMeasure, Q: DiscreteMeasure, alpha: float = 0.05,
                  check_cost: bool = True, with_bound: bool = False) -> CltReport:
    """Interval for ``E T_c(P_n, Q)`` from an ``n``-sample and a fixed discrete ``Q``."""
    if X.n < 2:
        raise InferenceError("one-sample interval needs n >= 2")
    if not X.uniform:
        raise InferenceError("the sample must carry uniform weights")
    z = _z(alpha)
    _require_cost(spec, check_cost)
    plan, duals = solve_discrete_ot(spec, X, Q)
    u, _ = canonical_potentials(spec, duals, X, Q)
    s2 = sigma_sq_plugin(u, X.weights)
    se = math.sqrt(s2 / X.n)
    notes = []
    if s2 == 0.0:
        warnings.warn("plug-in variance is zero; interval collapses to a point", DegenerateVarianceWarning)
        notes.append("degenerate plug-in variance")
    es = efron_stein_bound(spec, X, Q).bound if with_bound else None
    return CltReport("one_sample", plan.objective, s2, se, _interval(plan.objective, se, z), alpha,
                     X.n, 0, None, es, CENTER_NOTE, s2, None, notes)


def _two_sample_core(spec, X, Y):
    if X.n < 2 or Y.n < 2:
        raise InferenceError("two-sample interval needs n, m >= 2")
    if not (X.uniform and Y.uniform):
        raise InferenceError("samples must carry uniform weights")
    plan, duals = solve_discrete_ot(spec, X, Y)
    u, v = canonical_potentials(spec, duals, X, Y)
    sp = sigma_sq_plugin(u, X.weights)
    sq = sigma_sq_plugin(v, Y.weights)
    lam = X.n / (X.n + Y.n)
    vhat = (1 - lam) * sp + lam * sq
    return plan.objective, sp, sq, lam, vhat


def two_sample_ci(spec: CostSpec, X: DiscreteMeasure, Y: DiscreteMeasure, alpha: float = 0.05,
                  check_cost: bool = True, with_bound: bool = False) -> CltReport:
    """Interval for ``E T_c(P_n, Q_m)`` from two independent samples."""
    z = _z(alpha)
    _require_cost(spec, check_cost)
    stat, sp, sq, lam, vhat = _two_sample_core(spec, X, Y)
    rate = (X.n + Y.n) / (X.n * Y.n)
    se = math.sqrt(vhat * rate)
    notes = [LAMBDA_NOTE]
    if vhat == 0.0:
        warnings.warn("plug-in variance is zero; interval collapses to a point", DegenerateVarianceWarning)
        notes.append("degenerate plug-in variance")
    es = efron_stein_bound(spec, X, Y, two_sample=True).bound if with_bound else None
    return CltReport("two_sample", stat, vhat, se, _interval(stat, se, z), alpha,
                     X.n, Y.n, lam, es, CENTER_NOTE, sp, sq, notes)


def wasserstein_ci(spec: CostSpec, X: DiscreteMeasure, Y: DiscreteMeasure, alpha: float = 0.05,
                   eps_sep: float = EPS_SEP, check_cost: bool = True) -> CltReport:
    """Delta-method interval for ``W_p`` from two samples (power costs only)."""
    if spec.kind != "power":
        raise InferenceError("the W_p interval needs a power cost")
    z = _z(alpha)
    _require_cost(spec, check_cost)
    stat, sp, sq, lam, vhat = _two_sample_core(spec, X, Y)
    p = spec.p
    w = stat ** (1.0 / p)
    if not w > eps_sep:
        raise InferenceError("P=Q indistinguishable; delta method invalid")
    beta_sq = beta_sq_from(vhat, w, p)
    se = math.sqrt(beta_sq * (X.n + Y.n) / (X.n * Y.n))
    return CltReport("wasserstein", w, beta_sq, se, _interval(w, se, z), alpha, X.n, Y.n, lam,
                     None, WP_CENTER_NOTE, sp, sq, [LAMBDA_NOTE, "sigma_sq_hat holds beta^2"])


def beta_sq_from(v: float, w: float, p: float) -> float:
    """Delta-method variance of ``t -> t^(1/p)`` at ``t = w^p``."""
    return v / (p * w ** (p - 1)) ** 2


# Efron-Stein variance bounds

@dataclass
class EfronSteinReport:
    bound: float
    per_pair: dict
    corollary_bound: Optional[float] = None
    corollary_bound_displayed: Optional[float] = None


def default_pairs(spec: CostSpec):
    pairs = [(1.0, math.inf), (2.0, 2.0), (math.inf, 1.0)]
    if spec.kind == "power":
        pairs.insert(1, (spec.p, spec.p / (spec.p - 1)))
    return pairs


def _pair_moments(x: np.ndarray, chunk: int = 1024):
    """Squared distances |x_i - x_j|^2 over i < j, computed lazily in chunks."""
    n = x.shape[0]
    for s in range(0, n, chunk):
        blk = x[s:s + chunk]
        d2 = np.sum((blk[:, None, :] - x[None, :, :]) ** 2, axis=-1)
        rows = np.arange(s, s + blk.shape[0])
        mask = np.arange(n)[None, :] > rows[:, None]
        yield d2[mask]


def _cross_grad_sq(spec, x, y, wy, chunk: int = 1024):
    """|grad h(x_i - y_j)|^2 with product weights (1/n) * w_j, in chunks."""
    n = x.shape[0]
    for s in range(0, n, chunk):
        blk = x[s:s + chunk]
        g = spec.grad_of(blk[:, None, :] - y[None, :, :])
        yield np.sum(g * g, axis=-1), np.broadcast_to(wy[None, :] / n, (blk.shape[0], y.shape[0]))


def _moment(chunks, q, weighted=False):
    """(E Z^q)^(1/q) for Z given as squared magnitudes; q = inf gives max Z."""
    if math.isinf(q):
        best = 0.0
        for c in chunks:
            arr = c[0] if weighted else c
            if arr.size:
                best = max(best, float(arr.max()))
        return best
    tot, cnt = 0.0, 0.0
    for c in chunks:
        if weighted:
            arr, w = c
            tot += float(np.sum(w * arr ** q))
        else:
            tot += float(np.sum(c ** q))
            cnt += c.size
    mean = tot if weighted else (tot / cnt if cnt else 0.0)
    if not np.isfinite(mean):
        return math.inf
    return mean ** (1.0 / q)


def _one_side_bound(spec, x, y, wy, pairs):
    per = {}
    for q1, q2 in pairs:
        a = _moment(_pair_moments(x), q1)
        if a == 0.0:
            val = 0.0
        else:
            b = _moment(_cross_grad_sq(spec, x, y, wy), q2, weighted=True)
            val = a * b
        per[(q1, q2)] = val if np.isfinite(val) else math.inf
    return per


def efron_stein_bound(spec: CostSpec, X: DiscreteMeasure, Y: DiscreteMeasure,
                      pairs: Sequence | None = None, two_sample: bool = False) -> EfronSteinReport:
    """Plug-in Efron-Stein bound on ``n Var(T_c(P_n, Q))``.

    For every Hoelder pair ``(q1, q2)`` this is
    ``(E|X - X'|^{2 q1})^{1/q1} (E|grad h(X - Y)|^{2 q2})^{1/q2}`` with the
    pair moment a U-statistic over the sample and the gradient moment taken
    under the product of the sample and ``Y``; infinite exponents use maxima.
    With ``two_sample=True`` the roles are also swapped and the bound is on
    ``n Var(T_c(P_n, Q_m))``: ``B_X + (n / m) B_Y``.
    """
    if X.n < 2 or (two_sample and Y.n < 2):
        raise InferenceError("Efron-Stein bound needs samples of size >= 2")
    pairs = default_pairs(spec) if pairs is None else [(float(a), float(b)) for a, b in pairs]
    for q1, q2 in pairs:
        if q1 < 1 or q2 < 1 or abs(_inv(q1) + _inv(q2) - 1) > 1e-12:
            raise InferenceError(f"({q1}, {q2}) is not a Hoelder conjugate pair")
    x, y = X.points, Y.points
    per = _one_side_bound(spec, x, y, Y.weights, pairs)
    if two_sample:
        ratio = X.n / Y.n
        # |grad_y h(x - y)| = |grad h(x - y)| for every pair, so swapping roles is symmetric
        per_y = _one_side_bound(spec, y, x, X.weights, pairs)
        per = {k: per[k] + ratio * per_y[k] for k in per}
    bound = min(per.values())

    cor = cor_disp = None
    if spec.kind == "power" and not two_sample:
        p = spec.p
        mx = _moment(_pair_moments(x), p) ** p          # E|X - X'|^{2p}
        dxy = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1) if x.shape[0] * y.shape[0] <= 4_000_000 else None
        if dxy is not None:
            my = float(np.sum(Y.weights[None, :] / X.n * dxy ** p))   # E|X - Y|^{2p}
            cor = mx ** (1 / p) * p ** 2 * my ** ((p - 1) / p)
            cor_disp = mx ** (1 / p) * (p * my) ** (p / (p - 1))
    return EfronSteinReport(bound, {f"{_q(a)},{_q(b)}": v for (a, b), v in per.items()}, cor, cor_disp)


def _inv(q):
    return 0.0 if math.isinf(q) else 1.0 / q


def _q(q):
    return "inf" if math.isinf(q) else f"{q:g}"
