"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .costs import CostError, CostSpec
from .duality import PotentialVector, c_transform, canonical_potentials
from .inference import (InferenceError, dumps, efron_stein_bound, one_sample_ci,
                        two_sample_ci, wasserstein_ci)
from .measures import MeasureError, SampleSource, atomic_write, fmt, load_csv
from .montecarlo import (ExperimentConfig, oracle_potentials, remainder_variance,
                         simulate_clt, stability_diagnostic, theory_sigma_sq)
from .oracle1d import OracleError
from .solver import BudgetError, SolverError, solve_discrete_ot


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _alpha(text):
    a = float(text)
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError(f"--alpha must lie in (0, 1), got {text}")
    return a


def _pos_int(text):
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return k


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="otclt", description="Exact discrete OT with CLT-based inference.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_required=False):
        p.add_argument("--cost", required=True, help="cost string, e.g. power:2")
        p.add_argument("--out", required=out_required, help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    def two_files(p):
        p.add_argument("--p", dest="p_file", required=True, help="CSV with the P points")
        p.add_argument("--q", dest="q_file", required=True, help="CSV with the Q points")
        p.add_argument("--dim", type=_pos_int, default=1, help="point dimension (default 1)")

    s = sub.add_parser("solve", help="optimal plan, duals and objective")
    common(s); two_files(s)

    s = sub.add_parser("transform", help="c-transform of a potential")
    common(s)
    s.add_argument("--source", required=True, help="CSV with the points carrying the potential")
    s.add_argument("--potential", required=True, help="file with one potential value per line")
    s.add_argument("--target", required=True, help="CSV with the evaluation points")
    s.add_argument("--side", choices=("P", "Q"), default="P", help="side of the source points")
    s.add_argument("--dim", type=_pos_int, default=1)

    for name, hlp in (("infer-one", "one-sample CLT interval"), ("infer-two", "two-sample CLT interval"),
                      ("wp-ci", "delta-method interval for W_p")):
        s = sub.add_parser(name, help=hlp)
        common(s); two_files(s)
        s.add_argument("--alpha", type=_alpha, default=0.05)
        if name != "wp-ci":
            s.add_argument("--bound", action="store_true", help="also report the Efron-Stein bound")

    s = sub.add_parser("bound", help="Efron-Stein variance bound")
    common(s); two_files(s)
    s.add_argument("--two-sample", action="store_true")

    def laws(p):
        p.add_argument("--p-law", required=True, help="unif:a:b[...], gauss:mu:sd[...] or file:<path>")
        p.add_argument("--q-law", required=True)
        p.add_argument("--n", type=_pos_int, required=True)
        p.add_argument("--m", type=_pos_int, required=True)
        p.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="Monte-Carlo CLT check")
    common(s); laws(s)
    s.add_argument("--reps", type=_pos_int, default=400)
    s.add_argument("--sigma-sq", type=float, default=None,
                   help="theoretical variance (default: 1-D oracle)")

    s = sub.add_parser("stability", help="potential and map stability against the 1-D oracle")
    common(s); laws(s)
    s.add_argument("--grid", default="0.05:0.95:101", help="lo:hi:count")
    s.add_argument("--schedule", default="100,200,400,800,1600,3200")

    s = sub.add_parser("remainder", help="decay of n Var(R_n) against the 1-D oracle")
    common(s); laws(s)
    s.add_argument("--reps", type=_pos_int, default=200)
    s.add_argument("--schedule", default="100,200,400,800")
    return ap


def _cost(args, d=1):
    return CostSpec.parse(args.cost, d)


def _sizes(text, flag):
    try:
        vals = [int(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 2:
        raise UsageError(f"{flag}: sizes must be >= 2")
    return vals


def _grid(text):
    parts = text.split(":")
    try:
        lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise UsageError(f"--grid: expected lo:hi:count, got {text!r}") from None
    if not lo < hi or k < 2:
        raise UsageError("--grid: need lo < hi and count >= 2")
    return lo, hi, k


def _emit(args, payload: dict, csv_text: str | None = None):
    if args.format == "csv":
        if csv_text is None:
            raise UsageError(f"--format csv is not available for '{args.command}'")
        text = csv_text
    else:
        text = dumps(payload) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _vec(x):
    return [float(v) for v in np.asarray(x).reshape(-1)]


def cmd_solve(args):
    spec = _cost(args, args.dim)
    P, Q = load_csv(args.p_file, args.dim), load_csv(args.q_file, args.dim)
    plan, duals = solve_discrete_ot(spec, P, Q)
    payload = {
        "schema_version": 1,
        "kind": "solve",
        "cost": spec.name,
        "n": plan.n,
        "m": plan.m,
        "objective": plan.objective,
        "entries": [{"i": i, "j": j, "mass": w} for i, j, w in plan.entries],
        "duals": {"u": _vec(duals.u), "v": _vec(duals.v)},
    }
    rows = ["i,j,mass"] + [f"{i},{j},{fmt(w)}" for i, j, w in plan.entries]
    _emit(args, payload, "\n".join(rows) + "\n")


def _read_values(path):
    vals = []
    try:
        fh = open(path)
    except OSError as exc:
        raise MeasureError(f"{path}: {exc.strerror}") from None
    with fh:
        for r, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    vals.append(float(line))
                except ValueError:
                    raise MeasureError(f"{path}: parse error at row {r}") from None
    return np.array(vals)


def cmd_transform(args):
    spec = _cost(args, args.dim)
    src = load_csv(args.source, args.dim)
    tgt = load_csv(args.target, args.dim)
    f = PotentialVector(args.side, _read_values(args.potential))
    g = c_transform(spec, f, src.points, tgt.points)
    payload = {"schema_version": 1, "kind": "transform", "side": g.side, "values": _vec(g.values)}
    _emit(args, payload, "".join(f"{fmt(v)}\n" for v in g.values))


def cmd_infer(args):
    spec = _cost(args, args.dim)
    P, Q = load_csv(args.p_file, args.dim), load_csv(args.q_file, args.dim)
    if args.command == "infer-one":
        rep = one_sample_ci(spec, P, Q, args.alpha, with_bound=args.bound)
    elif args.command == "infer-two":
        rep = two_sample_ci(spec, P, Q, args.alpha, with_bound=args.bound)
    else:
        rep = wasserstein_ci(spec, P, Q, args.alpha)
    _emit(args, rep.as_dict())


def cmd_bound(args):
    spec = _cost(args, args.dim)
    P, Q = load_csv(args.p_file, args.dim), load_csv(args.q_file, args.dim)
    rep = efron_stein_bound(spec, P, Q, two_sample=args.two_sample)
    payload = {
        "schema_version": 1,
        "kind": "bound",
        "two_sample": bool(args.two_sample),
        "bound": rep.bound,
        "per_pair": rep.per_pair,
        "corollary_bound": rep.corollary_bound,
        "corollary_bound_displayed": rep.corollary_bound_displayed,
    }
    _emit(args, payload)


def _config(args, reps=2, grid=(0.05, 0.95, 101)):
    p_law = SampleSource.parse(args.p_law, label="P")
    q_law = SampleSource.parse(args.q_law, label="Q")
    if p_law.d != q_law.d:
        raise UsageError("--p-law and --q-law have different dimensions")
    spec = _cost(args, p_law.d)
    return ExperimentConfig(spec, p_law, q_law, args.n, args.m, reps=reps, seed=args.seed, grid=grid)


def cmd_simulate(args):
    cfg = _config(args, reps=args.reps)
    s2 = args.sigma_sq if args.sigma_sq is not None else theory_sigma_sq(cfg)
    res = simulate_clt(cfg, s2)
    _emit(args, res.as_dict(), res.to_csv())


def cmd_stability(args):
    cfg = _config(args, grid=_grid(args.grid))
    curve = stability_diagnostic(cfg, _sizes(args.schedule, "--schedule"))
    payload = curve.as_dict()
    rows = ["n,sup_error,l2_error,map_sup_error"] + [
        f"{n},{fmt(a)},{fmt(b)},{fmt(c)}" for n, a, b, c in
        zip(curve.sizes, curve.sup_error, curve.l2_error, curve.map_sup_error)]
    _emit(args, payload, "\n".join(rows) + "\n")


def cmd_remainder(args):
    cfg = _config(args, reps=args.reps)
    phi, psi = oracle_potentials(cfg)
    table = remainder_variance(cfg, phi, psi, _sizes(args.schedule, "--schedule"))
    rows = ["n,n_var_remainder"] + [f"{n},{fmt(v)}" for n, v in zip(table.sizes, table.scaled_variance)]
    _emit(args, table.as_dict(), "\n".join(rows) + "\n")


COMMANDS = {
    "solve": cmd_solve,
    "transform": cmd_transform,
    "infer-one": cmd_infer,
    "infer-two": cmd_infer,
    "wp-ci": cmd_infer,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "stability": cmd_stability,
    "remainder": cmd_remainder,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except (UsageError, CostError, MeasureError, InferenceError, OracleError,
            BudgetError, ValueError) as exc:
        print(f"otclt: error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, FloatingPointError, ArithmeticError) as exc:
        print(f"otclt: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
