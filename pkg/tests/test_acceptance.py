"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Every criterion is computed by a ``criterion_*`` function returning a JSON
report. The last test reruns all of them in a fresh interpreter (with a
different thread count) and compares the reports byte for byte.

Run only this suite with ``pytest tests/test_acceptance.py -s``, or the whole
thing standalone with ``python tests/test_acceptance.py --reports DIR``.
"""

from __future__ import annotations

import itertools
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from otclt import CostSpec, DiscreteMeasure, SampleSource
from otclt.duality import check_cyclical_monotonicity, plan_pairs
from otclt.inference import dumps, efron_stein_bound, one_sample_ci, two_sample_ci, wasserstein_ci
from otclt.measures import atomic_write
from otclt.montecarlo import (ExperimentConfig, draw_pair, map_reps, oracle_potentials, remainder_variance,
                              simulate_clt, stability_diagnostic, theory_sigma_sq)
from otclt.oracle1d import Distribution1D, quantile_cost
from otclt.rng import stream
from otclt.solver import build_cost_matrix, solve_discrete_ot, verify_optimality

SQ = CostSpec.power(2)
U = SampleSource.parse("unif:0:1", label="P")
V = SampleSource.parse("unif:0.5:1.5", label="Q")
SHIFT_SIGMA_SQ = 1 / 12
DELTA_SIGMA_SQ = 4 / 45


def shift_config(n, m, reps, seed):
    return ExperimentConfig(SQ, U, V, n, m, reps=reps, seed=seed)


# instances shared by the solver, certificate and monotonicity criteria

def _brute_force(C):
    n = C.shape[0]
    rows = np.arange(n)
    perms = np.array(list(itertools.permutations(range(n))))
    return float(C[rows[None, :], perms].sum(axis=1).min()) / n


def small_instances():
    rng = stream(2024, "acceptance", "small")
    out = []
    for k in range(200):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 8))
        p = float(rng.choice([1.5, 2.0, 3.0]))
        out.append((CostSpec.power(p, d), DiscreteMeasure(rng.normal(size=(n, d))),
                    DiscreteMeasure(rng.normal(size=(n, d)) + rng.normal(size=d))))
    return out


def line_instances():
    rng = stream(2024, "acceptance", "line")
    out = []
    for k in range(50):
        n = int(rng.integers(2, 501))
        p = float(rng.choice([1.5, 2.0, 3.0]))
        out.append((CostSpec.power(p), DiscreteMeasure(np.sort(rng.normal(size=n))),
                    DiscreteMeasure(np.sort(rng.normal(0.5, 1.5, size=n)))))
    return out


_SOLVED = {}


def solved(name):
    """Solve a named instance family once per process."""
    if name not in _SOLVED:
        inst = small_instances() if name == "small" else line_instances()
        t0 = time.perf_counter()
        res = [(spec, P, Q) + solve_discrete_ot(spec, P, Q) for spec, P, Q in inst]
        _SOLVED[name] = (res, time.perf_counter() - t0)
    return _SOLVED[name]


def criterion_01():
    res, solve_time = solved("small")
    t0 = time.perf_counter()
    errs = [abs(plan.objective - _brute_force(build_cost_matrix(spec, P, Q)))
            for spec, P, Q, plan, _ in res]
    runtime = solve_time + time.perf_counter() - t0
    worst = max(errs)
    return {"criterion": 1, "instances": len(res), "max_abs_error": worst,
            "passed": worst <= 1e-9}, runtime, runtime < 10.0


def criterion_02():
    worst = {"marginal_violation": 0.0, "dual_infeasibility": 0.0, "slackness_violation": 0.0,
             "duality_gap": 0.0}
    count = failed = 0
    for name in ("small", "line"):
        for spec, P, Q, plan, duals in solved(name)[0]:
            cert = verify_optimality(plan, duals, build_cost_matrix(spec, P, Q), P.weights, Q.weights)
            for key in worst:
                worst[key] = max(worst[key], getattr(cert, key))
            count += 1
            failed += not cert.passed
    return {"criterion": 2, "instances": count, "failed": failed, "worst": worst,
            "passed": failed == 0 and max(worst.values()) <= 1e-9}


def criterion_03():
    res, runtime = solved("line")
    errs = []
    for spec, P, Q, plan, _ in res:
        oracle = quantile_cost(spec, Distribution1D.empirical(P.points[:, 0]),
                               Distribution1D.empirical(Q.points[:, 0]))
        errs.append(abs(plan.objective - oracle))
    worst = max(errs)
    return {"criterion": 3, "instances": len(res), "max_abs_error": worst,
            "passed": worst <= 1e-9}, runtime, runtime < 30.0


def criterion_04():
    worst, count = math.inf, 0
    for name in ("small", "line"):
        for k, (spec, P, Q, plan, _) in enumerate(solved(name)[0]):
            xs, ys = plan_pairs(plan, P, Q)
            rep = check_cyclical_monotonicity(spec, xs, ys, k_max=6, trials=200, seed=k)
            worst = min(worst, rep.worst_margin)
            count += 1
    return {"criterion": 4, "instances": count, "worst_margin": worst, "passed": worst >= -1e-9}


_CLT = {}


def clt_run():
    if "res" not in _CLT:
        cfg = shift_config(500, 500, 400, seed=5)
        t0 = time.perf_counter()
        res = simulate_clt(cfg, theory_sigma_sq(cfg))
        _CLT["res"] = (res, time.perf_counter() - t0)
    return _CLT["res"]


def criterion_05():
    res, runtime = clt_run()
    v = res.scaled_variance
    return {"criterion": 5, "reps": int(res.statistics.size), "theory_sigma_sq": res.theory_sigma_sq,
            "scaled_variance": v, "passed": 0.06 <= v <= 0.11}, runtime, runtime < 180.0


def criterion_06():
    res, _ = clt_run()
    return {"criterion": 6, "ks_distance": res.ks_distance, "passed": res.ks_distance < 0.08}


def criterion_07():
    vals = []
    for seed in range(10):
        rng = stream(seed, "acceptance", "plugin")
        X, Y = DiscreteMeasure(rng.random(2000)), DiscreteMeasure(rng.random(2000) + 0.5)
        vals.append(two_sample_ci(SQ, X, Y).sigma_sq_p)
    hits = sum(abs(v - SHIFT_SIGMA_SQ) <= 0.1 * SHIFT_SIGMA_SQ for v in vals)
    x = stream(0, "acceptance", "delta").random(2000)
    dv = one_sample_ci(SQ, DiscreteMeasure(x), DiscreteMeasure([0.0])).sigma_sq_hat
    ok_delta = abs(dv - DELTA_SIGMA_SQ) <= 0.1 * DELTA_SIGMA_SQ
    return {"criterion": 7, "sigma_sq_p": vals, "within_10pct": hits, "delta_sigma_sq": dv,
            "passed": hits >= 8 and ok_delta}


def criterion_08():
    cfg = shift_config(1000, 1000, 100, seed=8)

    def one(r):
        X, Y = draw_pair(cfg, r)
        obj = solve_discrete_ot(SQ, X, Y)[0].objective
        return obj, efron_stein_bound(SQ, X, Y, two_sample=True).bound

    out = map_reps(one, cfg.reps)
    T = np.array([o[0] for o in out])
    bounds = np.array([o[1] for o in out])
    n_var = float(cfg.n * np.var(T, ddof=1))
    frac = float(np.mean(n_var <= bounds))
    return {"criterion": 8, "n_var": n_var, "min_bound": float(bounds.min()), "fraction": frac,
            "passed": frac >= 0.95}


def criterion_09():
    cfg = shift_config(100, 100, 200, seed=9)
    t0 = time.perf_counter()
    phi, psi = oracle_potentials(cfg)
    tab = remainder_variance(cfg, phi, psi, schedule=(100, 200, 400, 800))
    runtime = time.perf_counter() - t0
    first, last = tab.scaled_variance[0], tab.scaled_variance[-1]
    return {"criterion": 9, "sizes": tab.sizes, "n_var_remainder": tab.scaled_variance,
            "ratio_last_first": last / first, "passed": last <= first / 3}, runtime, runtime < 180.0


def criterion_10():
    cfg = shift_config(100, 100, 2, seed=10)
    curve = stability_diagnostic(cfg, schedule=(100, 200, 400, 800, 1600, 3200))
    s0, s1, m1 = curve.sup_error[0], curve.sup_error[-1], curve.map_sup_error[-1]
    return {"criterion": 10, "rows": curve.as_dict()["rows"], "sup_error_first": s0,
            "sup_error_last": s1, "map_sup_error_last": m1, "passed": s1 <= 0.05 and s1 <= s0 / 2 and m1 <= 0.1}


def criterion_11():
    pilot = shift_config(500, 500, 2000, seed=11)
    T = np.array(map_reps(lambda r: solve_discrete_ot(SQ, *draw_pair(pilot, r))[0].objective, pilot.reps))
    center = float(np.sqrt(T.mean()))
    fresh = shift_config(500, 500, 200, seed=111)

    def one(r):
        lo, hi = wasserstein_ci(SQ, *draw_pair(fresh, r), alpha=0.05).ci
        return lo <= center <= hi

    cover = float(np.mean(map_reps(one, fresh.reps)))
    return {"criterion": 11, "pilot_center": center, "coverage": cover, "passed": cover >= 0.88}


CRITERIA = {
    1: ("solver exactness vs brute force", criterion_01),
    2: ("duality certificates", criterion_02),
    3: ("1-D oracle equivalence", criterion_03),
    4: ("c-cyclical monotonicity of plan supports", criterion_04),
    5: ("CLT variance on the shift benchmark", criterion_05),
    6: ("CLT normality (KS)", criterion_06),
    7: ("plug-in variance consistency", criterion_07),
    8: ("Efron-Stein bound dominates n Var", criterion_08),
    9: ("remainder variance decay", criterion_09),
    10: ("potential and map stability", criterion_10),
    11: ("W_2 delta-method coverage", criterion_11),
}


def _unpack(out):
    if isinstance(out, tuple):
        report, runtime, fast = out
        return report, runtime, fast
    return out, None, True


def write_report(directory, k, report):
    atomic_write(os.path.join(directory, f"criterion_{k:02d}.json"), dumps(report) + "\n")


def run_all(directory):
    os.makedirs(directory, exist_ok=True)
    for k, (_, fn) in CRITERIA.items():
        report, _, _ = _unpack(fn())
        write_report(directory, k, report)


@pytest.fixture(scope="session")
def report_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance_reports")


def _check(k, acceptance_log, report_dir):
    title, fn = CRITERIA[k]
    report, runtime, fast = _unpack(fn())
    write_report(str(report_dir), k, report)
    ok = bool(report["passed"]) and fast
    detail = {key: val for key, val in report.items() if key not in ("criterion", "passed", "rows",
                                                                     "sigma_sq_p", "n_var_remainder")}
    if runtime is not None:
        detail["runtime_s"] = round(runtime, 1)
    acceptance_log(k, title, ok, detail)
    assert report["passed"], report
    assert fast, f"runtime {runtime:.1f}s over budget"


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, acceptance_log, report_dir):
    _check(k, acceptance_log, report_dir)


def test_criterion_12_determinism(acceptance_log, report_dir):
    for k in CRITERIA:
        if not (report_dir / f"criterion_{k:02d}.json").exists():
            write_report(str(report_dir), k, _unpack(CRITERIA[k][1]())[0])
    rerun = report_dir.parent / "acceptance_rerun"
    env = dict(os.environ, OTCLT_THREADS="2")
    subprocess.run([sys.executable, __file__, "--reports", str(rerun)], check=True, env=env)
    diffs = [k for k in CRITERIA
             if (report_dir / f"criterion_{k:02d}.json").read_bytes() != (rerun / f"criterion_{k:02d}.json").read_bytes()]
    acceptance_log(12, "byte-identical reports on rerun", not diffs, {"differing": diffs})
    assert not diffs


if __name__ == "__main__":
    import argparse

    ap = argparse.ArgumentParser(description="Run every acceptance criterion and write JSON reports.")
    ap.add_argument("--reports", required=True, type=Path)
    run_all(str(ap.parse_args().reports))
