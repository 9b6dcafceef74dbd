"""Command-line front end: ``slowkill {fit,bench,select-q,rip-curve}``.

Exit codes: 0 success, 2 malformed input or usage, 3 dimension mismatch,
4 no admissible model in a selection grid.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import bench
from .exceptions import DimensionError, InadmissibleModelError, ResponseDomainError
from .losses import LossSpec
from .schedules import ScheduleKind, ScheduleSpec
from .selection import Criterion, select_q
from .solver import Problem, SolverConfig, fit

log = logging.getLogger("slowkill")

EXIT_OK, EXIT_INPUT, EXIT_DIM, EXIT_INADMISSIBLE = 0, 2, 3, 4

RIP_HEADER = ["theta", "mean_ratio", "stderr"]

_NUM = {"type": "number"}
_NUM_OR_PAIR = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}

FIT_SCHEMA = {
    "type": "object",
    "required": ["loss", "q", "eta0", "n", "p", "m", "support", "active", "coefficients", "intercept",
                 "fixed_point_residual", "rho_final", "iterations", "line_search_warnings", "traces"],
    "properties": {
        "loss": {"enum": [k.value for k in LossSpec]},
        "q": {"type": "integer", "minimum": 1},
        "eta0": _NUM,
        "n": {"type": "integer"},
        "p": {"type": "integer"},
        "m": {"type": "integer"},
        "support": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "active": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "coefficients": {"type": "array"},
        "intercept": {"oneOf": [{"type": "null"}, _NUM_OR_PAIR, {"type": "array"}]},
        "fixed_point_residual": _NUM,
        "rho_final": _NUM,
        "iterations": {"type": "integer"},
        "line_search_warnings": {"type": "integer"},
        "wall_time": _NUM,
        "traces": {
            "type": "object",
            "required": ["objective", "rho", "q", "eta_bar"],
            "properties": {k: {"type": "array"} for k in ("objective", "rho", "q", "eta_bar")},
        },
    },
}

SELECT_SCHEMA = {
    "type": "object",
    "required": ["criterion", "A", "q_grid", "scores", "chosen_q", "chosen_support", "skipped"],
    "properties": {
        "criterion": {"enum": [c.value for c in Criterion]},
        "A": _NUM,
        "q_grid": {"type": "array", "items": {"type": "integer"}},
        "scores": {"type": "array", "items": {"oneOf": [_NUM, {"type": "null"}]}},
        "chosen_q": {"type": "integer"},
        "chosen_support": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "skipped": {"type": "object"},
    },
}


class InputError(Exception):
    pass


def read_matrix(path, complex_pairs=False):
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if complex_pairs:
        if a.shape[1] % 2:
            raise InputError(f"{path}: complex data needs an even number of columns (re,im pairs)")
        a = a[:, 0::2] + 1j * a[:, 1::2]
    return a


def write_matrix(path, a):
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if np.iscomplexobj(a):
        pairs = np.empty((a.shape[0], 2 * a.shape[1]))
        pairs[:, 0::2], pairs[:, 1::2] = a.real, a.imag
        a = pairs
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def parse_grid(text, cast=float):
    try:
        lo, hi, st = (cast(v) for v in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from exc
    if st <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    out, v, k = [], lo, 0
    while v <= hi + 1e-9 * abs(st):
        out.append(v)
        k += 1
        v = lo + k * st
    return out


def _num(x):
    if isinstance(x, complex) or np.iscomplexobj(x):
        return [float(np.real(x)), float(np.imag(x))]
    return float(x)


def _coef_json(a):
    a = np.asarray(a)
    if a.ndim == 1:
        return [_num(v) for v in a]
    return [[_num(v) for v in row] for row in a]


def _threads(args):
    env = os.environ.get("SLOWKILL_THREADS")
    if args.threads:
        return args.threads
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _schedule(args, q):
    kind = ScheduleKind(args.schedule)
    return ScheduleSpec(kind, T=args.T, target_q=q, sigmoid_a=args.sigmoid_a,
                        sigmoid_b=args.sigmoid_b, sigmoid_c=args.sigmoid_c)


def _load_problem(args):
    loss = LossSpec(args.loss)
    complex_pairs = args.complex
    X = read_matrix(args.x, complex_pairs)
    y = read_matrix(args.y, complex_pairs)
    if loss is not LossSpec.COMPLEX_MMV:
        if y.shape[1] != 1:
            raise DimensionError(f"{loss.value} loss needs a single response column, got {y.shape[1]}")
        y = y[:, 0]
    return Problem(X, y, loss, add_intercept=args.intercept)


def _solver_config(args, q):
    return SolverConfig(q=q, eta0=args.eta0, schedule=_schedule(args, q), squeeze=not args.no_squeeze,
                        refit=args.refit, alpha=args.alpha, max_search=args.max_search)


def fit_to_json(problem, res, config, timing=True):
    out = {
        "loss": problem.loss.value,
        "q": config.q,
        "eta0": config.eta0,
        "n": problem.n,
        "p": problem.p,
        "m": problem.m,
        "support": [int(j) + 1 for j in res.support],
        "active": [int(j) + 1 for j in res.active],
        "coefficients": _coef_json(res.beta_hat),
        "intercept": None if res.intercept is None else (_num(res.intercept) if np.ndim(res.intercept) == 0 else _coef_json(res.intercept)),
        "polished_coefficients": _coef_json(res.polished_beta),
        "polished_intercept": None if res.polished_intercept is None else (_num(res.polished_intercept) if np.ndim(res.polished_intercept) == 0 else _coef_json(res.polished_intercept)),
        "fixed_point_residual": float(res.fixed_point_residual),
        "rho_final": float(res.rho_final),
        "iterations": int(res.iterations),
        "line_search_warnings": int(res.line_search_warnings),
        "refit": bool(config.refit),
        "refit_singular": bool(res.refit_singular),
        "traces": {
            "objective": [float(v) for v in res.objective_trace],
            "rho": [float(v) for v in res.rho_trace],
            "q": [int(v) for v in res.q_trace],
            "eta_bar": [float(v) for v in res.eta_bar_trace],
        },
    }
    if timing:
        out["wall_time"] = float(res.wall_time)
    return out


def cmd_fit(args):
    problem = _load_problem(args)
    if not 1 <= args.q < problem.p:
        raise InputError(f"--q must lie in [1, {problem.p - 1}]")
    config = _solver_config(args, args.q)
    log.info("fitting n=%d p=%d q=%d loss=%s", problem.n, problem.p, args.q, problem.loss.value)
    res = fit(problem, config)
    _write_json(fit_to_json(problem, res, config, timing=not args.omit_timing), args.out)
    log.info("support size %d, %d iterations, residual %.3g", res.support.size, res.iterations, res.fixed_point_residual)
    return EXIT_OK


def cmd_select_q(args):
    problem = _load_problem(args)
    grid = [int(v) for v in args.q_grid]
    if grid[0] < 1 or grid[-1] >= problem.p:
        raise InputError(f"--q-grid must lie in [1, {problem.p - 1}]")
    template = _solver_config(args, grid[0])
    crit = Criterion(args.pic)
    sel = select_q(problem, grid, template, crit, args.A)
    out = {
        "criterion": crit.value,
        "A": args.A,
        "q_grid": sel.q_grid,
        "scores": [None if s is None else float(s) for s in sel.scores],
        "chosen_q": sel.chosen_q,
        "chosen_support": [int(j) + 1 for j in sel.chosen_fit.support],
        "chosen_coefficients": _coef_json(sel.chosen_fit.beta_hat),
        "skipped": {str(k): v for k, v in sel.skipped.items()},
    }
    _write_json(out, args.out)
    return EXIT_OK


def cmd_bench(args):
    if args.preset == "custom":
        base = dict(n=150, p=5000, s=10, tau=0.9, cov_kind=bench.CovKind.TOEPLITZ, model=bench.ResponseModel.REGRESSION)
    else:
        base = dict(bench.PRESETS[args.preset])
    for key in ("n", "p", "s", "tau"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.cov is not None:
        base["cov_kind"] = bench.CovKind(args.cov)
    if args.model is not None:
        base["model"] = bench.ResponseModel(args.model)
    spec = bench.SyntheticSpec(**base, sigma=args.sigma, magnitude=args.magnitude, seed=args.seed)
    methods = tuple(args.methods.split(","))
    for m in methods:
        if m not in bench.METHODS:
            raise InputError(f"unknown method {m!r}; choose from {', '.join(bench.METHODS)}")
    log.info("running %s: %d replicates of %s", args.preset, args.reps, ",".join(methods))
    summary = bench.run_experiment(spec, methods=methods, q_select=args.q, reps=args.reps, eta0=args.eta0,
                                   T=args.T, workers=_threads(args), scenario=args.preset)
    if args.omit_timing:
        for row in summary.rows:
            row["total_time"] = 0.0
        for rec in summary.records:
            rec["wall_time"] = 0.0
    bench.write_summary_csv(summary, args.out)
    bench.write_records_jsonl(summary, args.records or os.path.splitext(args.out)[0] + ".jsonl")
    for row in summary.rows:
        log.info("%s: miss %.3f  error %.3f  time %.1fs", row["method"], row["miss_rate_mean"],
                 row["pred_error_mean"], row["total_time"])
    return EXIT_OK


def cmd_rip_curve(args):
    grid = args.theta_grid
    if max(grid) * args.s > args.p / 2:
        raise InputError("theta * s exceeds p/2 for the largest theta")
    rows = bench.rip_ratio_curve(args.n, args.p, args.s, args.tau, grid, samples=args.samples, reps=args.reps,
                                 seed=args.seed, cov_kind=bench.CovKind(args.cov), exhaustive=args.exhaustive,
                                 workers=_threads(args))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RIP_HEADER)
        for th, mean, se in rows:
            w.writerow([repr(th), repr(mean), repr(se)])
    return EXIT_OK


def _add_solver_opts(p):
    p.add_argument("--x", required=True, help="design matrix CSV (rows = observations)")
    p.add_argument("--y", required=True, help="response CSV")
    p.add_argument("--loss", choices=[k.value for k in LossSpec], default="quadratic")
    p.add_argument("--complex", action="store_true", help="files hold alternating re,im column pairs")
    p.add_argument("--eta0", type=float, default=50.0)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--schedule", choices=[k.value for k in ScheduleKind], default="inverse")
    p.add_argument("--sigmoid-a", type=float, default=1.0)
    p.add_argument("--sigmoid-b", type=float, default=10.0)
    p.add_argument("--sigmoid-c", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--max-search", type=int, default=5)
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--no-squeeze", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")


def build_parser():
    parser = argparse.ArgumentParser(prog="slowkill", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model with a given cardinality")
    _add_solver_opts(p)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--refit", action="store_true")
    p.add_argument("--omit-timing", action="store_true", help="leave wall time out for byte-stable output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select-q", help="choose q by predictive information criterion")
    _add_solver_opts(p)
    p.add_argument("--q-grid", required=True, type=lambda t: parse_grid(t, int))
    p.add_argument("--pic", choices=[c.value for c in Criterion], default="scale-free")
    p.add_argument("--A", type=float, default=2.0)
    p.set_defaults(func=cmd_select_q, refit=True)

    p = sub.add_parser("bench", help="synthetic benchmark replicates")
    p.add_argument("--preset", required=True, choices=sorted(bench.PRESETS) + ["custom"])
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--cov", choices=[k.value for k in bench.CovKind])
    p.add_argument("--model", choices=[k.value for k in bench.ResponseModel])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--q", type=int, help="cardinality (default floor(1.5 s))")
    p.add_argument("--eta0", type=float, default=50.0)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--methods", default="slowkill,iht")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="bench_summary.csv")
    p.add_argument("--records", help="per-replicate JSON lines (default: <out>.jsonl)")
    p.add_argument("--omit-timing", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rip-curve", help="sampled restricted-isometry ratio against theta")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--p", type=int, default=4000)
    p.add_argument("--s", type=int, default=4)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--cov", choices=[k.value for k in bench.CovKind], default="toeplitz")
    p.add_argument("--theta-grid", default=parse_grid("2:12:2"), type=parse_grid)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--exhaustive", action="store_true", help="enumerate all subsets (tiny p only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="rip_curve.csv")
    p.set_defaults(func=cmd_rip_curve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, ResponseDomainError, ValueError) as exc:
        if isinstance(exc, DimensionError):
            print(f"slowkill: dimension mismatch: {exc}", file=sys.stderr)
            return EXIT_DIM
        if isinstance(exc, InadmissibleModelError):
            print(f"slowkill: {exc}", file=sys.stderr)
            return EXIT_INADMISSIBLE
        print(f"slowkill: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
