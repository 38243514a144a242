"""Monte-Carlo checks of the limit theorems at desk scale.

Replications draw from streams keyed by ``(seed, side, rep)`` and are reduced
in replication order, so results do not depend on thread scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .costs import CostSpec
from .duality import anchor, canonical_potentials, PotentialVector
from .inference import efron_stein_bound
from .measures import DiscreteMeasure, SampleSource, fmt
from .oracle1d import Distribution1D, Potential1D, monotone_map, sigma_sq_1d
from .rng import stream
from .solver import cost_matrix, solve_discrete_ot

DEFAULT_SCHEDULE = (100, 200, 400, 800, 1600, 3200)
EMPIRICAL_NOTE = "decay and tolerance thresholds are empirical choices, not theorem statements"


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte-Carlo experiment.

    With ``q_fixed`` set the experiment is one-sample (``Q`` fixed, only
    ``P_n`` is resampled); otherwise both sides are sampled. ``paired`` makes
    the Q-side reuse the P-side stream, which is the degenerate control when
    both laws coincide.
    """

    cost: CostSpec
    p_law: SampleSource
    q_law: Optional[SampleSource]
    n: int
    m: int
    reps: int = 400
    seed: int = 0
    grid: tuple = (0.05, 0.95, 101)
    alpha: float = 0.05
    q_fixed: Optional[DiscreteMeasure] = None
    paired: bool = False

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("need at least 2 replications")
        if self.n < 2 or (self.q_fixed is None and self.m < 2):
            raise ValueError("sample sizes must be >= 2")
        if self.q_fixed is None and self.q_law is None:
            raise ValueError("give either a Q law or a fixed Q measure")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def two_sample(self) -> bool:
        return self.q_fixed is None

    @property
    def rate(self) -> float:
        """Scaling ``r`` so that ``r * Var(T)`` has a nondegenerate limit."""
        if self.two_sample:
            return self.n * self.m / (self.n + self.m)
        return float(self.n)

    def grid_points(self) -> np.ndarray:
        lo, hi, k = self.grid
        return np.linspace(lo, hi, int(k))


def _threads() -> int:
    raw = os.environ.get("OTCLT_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"OTCLT_THREADS must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ValueError(f"OTCLT_THREADS must be a positive integer, got {raw!r}")
    return k


def map_reps(fn: Callable[[int], object], reps: int):
    """Evaluate ``fn(r)`` for every replication, returned in index order."""
    k = _threads()
    if k == 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, range(reps)))


def draw_pair(cfg: ExperimentConfig, rep: int, n: int | None = None, m: int | None = None):
    """Samples ``(P_n, Q_m)`` of replication ``rep``."""
    n = cfg.n if n is None else n
    m = cfg.m if m is None else m
    X = DiscreteMeasure(cfg.p_law.draw(stream(cfg.seed, "P", n, rep), n))
    if not cfg.two_sample:
        return X, cfg.q_fixed
    label = "P" if cfg.paired else "Q"
    Y = DiscreteMeasure(cfg.q_law.draw(stream(cfg.seed, label, m, rep), m))
    return X, Y


class RepError(RuntimeError):
    def __init__(self, rep, exc):
        super().__init__(f"replication {rep}: {exc}")
        self.rep = rep


@dataclass
class CltSimResult:
    statistics: np.ndarray
    standardized: np.ndarray
    scaled_variance: float
    ks_distance: float
    theory_sigma_sq: float
    mean: float
    rate: float
    es_bound: Optional[float] = None
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "reps": int(self.statistics.shape[0]),
            "mean_statistic": self.mean,
            "rate": self.rate,
            "scaled_variance": self.scaled_variance,
            "theory_sigma_sq": self.theory_sigma_sq,
            "ks_distance": self.ks_distance,
            "es_bound": self.es_bound,
            "notes": list(self.notes),
        }

    def as_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "simulate",
            "summary": self.summary(),
            "reps": [{"rep": i, "statistic": float(t), "standardized": float(z)}
                     for i, (t, z) in enumerate(zip(self.statistics, self.standardized))],
        }

    def to_csv(self) -> str:
        rows = ["rep,statistic,standardized"]
        rows += [f"{i},{fmt(t)},{fmt(z)}" for i, (t, z) in enumerate(zip(self.statistics, self.standardized))]
        return "\n".join(rows) + "\n"


def _objective(cfg, rep):
    X, Y = draw_pair(cfg, rep)
    try:
        plan, _ = solve_discrete_ot(cfg.cost, X, Y)
    except Exception as exc:  # surface the failing replication
        raise RepError(rep, exc) from exc
    return plan.objective


def simulate_clt(cfg: ExperimentConfig, theory_sigma_sq: float, es_pool: int = 2000) -> CltSimResult:
    """Replicate ``T_c(P_n, Q)`` (or ``T_c(P_n, Q_m)``) and compare with the Gaussian limit.

    Statistics are centered at their across-replication mean and scaled by
    ``sqrt(n)`` (one-sample) or ``sqrt(nm/(n+m))`` (two-sample).
    """
    if theory_sigma_sq < 0:
        raise ValueError("theoretical variance must be non-negative")
    T = np.array(map_reps(lambda r: _objective(cfg, r), cfg.reps))
    mean = float(T.mean())
    scaled = np.sqrt(cfg.rate) * (T - mean)
    svar = float(np.var(scaled, ddof=1))
    notes = [EMPIRICAL_NOTE]
    if theory_sigma_sq > 0:
        z = scaled / np.sqrt(theory_sigma_sq)
        ks = float(stats.kstest(z, "norm").statistic)
    else:
        z = np.zeros_like(T)
        ks = 1.0
        notes.append("theoretical variance is zero; standardization skipped")
    es = _pooled_bound(cfg, es_pool)
    return CltSimResult(T, z, svar, ks, float(theory_sigma_sq), mean, cfg.rate, es, notes)


def _pooled_bound(cfg, pool):
    """Efron-Stein bound (on ``rate * Var``) from samples pooled across replications."""
    xs, ys = [], []
    r = 0
    while sum(len(x) for x in xs) < pool and r < cfg.reps:
        X, Y = draw_pair(cfg, r)
        xs.append(X.points)
        if cfg.two_sample:
            ys.append(Y.points)
        r += 1
    Xp = DiscreteMeasure(np.vstack(xs)[:pool])
    if cfg.two_sample:
        Yp = DiscreteMeasure(np.vstack(ys)[:pool])
        b = efron_stein_bound(cfg.cost, Xp, Yp, two_sample=True).bound
        # the two-sample bound controls n Var; rescale to the CLT rate
        return b * cfg.rate / cfg.n
    return efron_stein_bound(cfg.cost, Xp, cfg.q_fixed).bound


# oracle helpers for d = 1

def law_1d(src: SampleSource) -> Distribution1D:
    if src.d != 1:
        raise ValueError("oracle laws are one-dimensional")
    if src.kind == "uniform":
        return Distribution1D.uniform(*src.params[0])
    if src.kind == "gaussian":
        return Distribution1D.gaussian(*src.params[0])
    if src.kind == "shift":
        base = law_1d(src.base)
        off = src.offset[0]
        if base.kind == "uniform":
            return Distribution1D.uniform(base.a + off, base.b + off)
        return Distribution1D.gaussian(base.a + off, base.b)
    raise ValueError(f"no oracle law for a {src.kind!r} source")


def theory_sigma_sq(cfg: ExperimentConfig) -> float:
    """Limiting variance of the scaled statistic from the 1-D oracle."""
    P = law_1d(cfg.p_law)
    if not cfg.two_sample:
        Q = Distribution1D.empirical(cfg.q_fixed.points[:, 0], cfg.q_fixed.weights)
        return sigma_sq_1d(cfg.cost, P, Q)
    Q = law_1d(cfg.q_law)
    lam = cfg.n / (cfg.n + cfg.m)
    return (1 - lam) * sigma_sq_1d(cfg.cost, P, Q) + lam * sigma_sq_1d(cfg.cost, Q, P)


def oracle_potentials(cfg: ExperimentConfig):
    """P-side potential and Q-side potential of the limit problem (d = 1)."""
    P = law_1d(cfg.p_law)
    Q = law_1d(cfg.q_law) if cfg.two_sample else Distribution1D.empirical(
        cfg.q_fixed.points[:, 0], cfg.q_fixed.weights)
    phi = Potential1D(cfg.cost, P, Q, float(P.quantile(0.5)))
    psi = Potential1D(cfg.cost, Q, P, float(Q.quantile(0.5)))
    return phi, psi


# remainder decay

@dataclass
class DecayTable:
    sizes: list
    scaled_variance: list
    notes: list

    def as_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "remainder",
            "rows": [{"n": n, "n_var_remainder": v} for n, v in zip(self.sizes, self.scaled_variance)],
            "notes": list(self.notes),
        }


def remainder_variance(cfg: ExperimentConfig, phi, psi=None,
                       schedule: Sequence[int] = (100, 200, 400, 800)) -> DecayTable:
    """``n Var(R_n)`` with ``R_n = T - mean_{P_n} phi - mean_{Q_m} psi`` along a schedule.

    ``psi`` is ignored in one-sample runs (Q is not resampled there).
    """
    if cfg.p_law.d != 1:
        raise ValueError("remainder diagnostics need d = 1")
    notes = [EMPIRICAL_NOTE]
    if cfg.two_sample and replace(cfg.q_law, label="") == replace(cfg.p_law, label=""):
        notes.append("P and Q laws coincide: diagnostic only, no decay is asserted")
    ratio = cfg.m / cfg.n if cfg.two_sample else 0.0
    out = []
    for n in schedule:
        m = max(2, int(round(n * ratio))) if cfg.two_sample else cfg.m
        sub = replace(cfg, n=int(n), m=m)

        def one(r, sub=sub, n=n, m=m):
            X, Y = draw_pair(sub, r, n, m)
            plan, _ = solve_discrete_ot(sub.cost, X, Y)
            val = plan.objective - float(np.mean(phi(X.points[:, 0])))
            if sub.two_sample and psi is not None:
                val -= float(np.mean(psi(Y.points[:, 0])))
            return val

        R = np.array(map_reps(one, cfg.reps))
        out.append(float(n * np.var(R, ddof=1)))
    return DecayTable([int(n) for n in schedule], out, notes)


# stability of potentials and maps

@dataclass
class StabilityCurve:
    sizes: list
    sup_error: list
    l2_error: list
    map_sup_error: list
    notes: list

    def as_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "stability",
            "rows": [{"n": n, "sup_error": s, "l2_error": l, "map_sup_error": e}
                     for n, s, l, e in zip(self.sizes, self.sup_error, self.l2_error, self.map_sup_error)],
            "notes": list(self.notes),
        }


def extend_potential(spec: CostSpec, v: PotentialVector, q_points, x) -> np.ndarray:
    """``x -> min_j [c(x, y_j) - v_j]``: the c-concave extension of the P-side potential."""
    C = cost_matrix(spec, np.asarray(x, dtype=float).reshape(-1, spec.d), q_points)
    return np.min(C - v.values[None, :], axis=1)


def superdifferential_targets(spec: CostSpec, v: PotentialVector, q_points, x, tol=1e-10):
    """For each ``x`` the indices ``j`` attaining ``min_j [c(x, y_j) - v_j]`` (within ``tol``)."""
    C = cost_matrix(spec, np.asarray(x, dtype=float).reshape(-1, spec.d), q_points)
    vals = C - v.values[None, :]
    best = vals.min(axis=1, keepdims=True)
    scale = max(1.0, float(np.abs(C).max()))
    return vals <= best + tol * scale


def _empirical_stage(cfg, n, m, rep):
    X, Y = draw_pair(cfg, rep, n, m)
    _, duals = solve_discrete_ot(cfg.cost, X, Y)
    _, v = canonical_potentials(cfg.cost, duals, X, Y)
    return X, Y, v


def stability_run(cfg: ExperimentConfig, phi, T: Callable, schedule=DEFAULT_SCHEDULE,
                  anchor_index: int = 0, rep: int = 0) -> StabilityCurve:
    """Potential and map errors against the oracle along a doubling schedule.

    ``phi`` is the oracle P-side potential and ``T`` the oracle map, both
    evaluated on ``cfg.grid_points()``. Each empirical potential is extended
    to the grid by the c-transform of its Q-side dual and anchored, like the
    oracle, at grid point ``anchor_index``.
    """
    if cfg.cost.d != 1:
        raise ValueError("stability diagnostics need d = 1")
    grid = cfg.grid_points()
    ref = np.asarray(phi(grid), dtype=float)
    ref = ref - ref[anchor_index]
    Tgrid = np.asarray(T(grid), dtype=float)
    ratio = cfg.m / cfg.n if cfg.two_sample else 0.0
    sups, l2s, maps = [], [], []
    for n in schedule:
        m = max(2, int(round(n * ratio))) if cfg.two_sample else cfg.m
        X, Y, v = _empirical_stage(cfg, int(n), m, rep)
        ext = extend_potential(cfg.cost, v, Y.points, grid)
        ext = anchor(PotentialVector("P", ext), anchor_index).values
        err = ext - ref
        sups.append(float(np.max(np.abs(err))))
        l2s.append(float(np.sqrt(np.mean(err ** 2))))
        mask = superdifferential_targets(cfg.cost, v, Y.points, grid)
        yq = Y.points[:, 0]
        dev = np.where(mask, np.abs(yq[None, :] - Tgrid[:, None]), 0.0)
        maps.append(float(dev.max()))
    notes = [EMPIRICAL_NOTE, "l2_error is the root-mean-square error over the uniform grid"]
    return StabilityCurve([int(n) for n in schedule], sups, l2s, maps, notes)


def stability_diagnostic(cfg: ExperimentConfig, schedule=DEFAULT_SCHEDULE, anchor_index: int = 0,
                         rep: int = 0) -> StabilityCurve:
    """Oracle-backed stability run for 1-D laws (potential and map errors)."""
    phi, _ = oracle_potentials(cfg)
    P = law_1d(cfg.p_law)
    Q = law_1d(cfg.q_law) if cfg.two_sample else Distribution1D.empirical(
        cfg.q_fixed.points[:, 0], cfg.q_fixed.weights)
    return stability_run(cfg, phi, lambda x: monotone_map(P, Q, x), schedule, anchor_index, rep)


def map_stability_diagnostic(cfg: ExperimentConfig, schedule=DEFAULT_SCHEDULE, rep: int = 0) -> list:
    """Sup-grid deviation of discrete superdifferential targets from the oracle map."""
    return stability_diagnostic(cfg, schedule, 0, rep).map_sup_error
