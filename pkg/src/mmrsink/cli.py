"""Command line front end.

    mmrsink solve INSTANCE [-o OUT]
    mmrsink sample INSTANCE --what mr|opt|phi --resolution N
    mmrsink check INSTANCE --seed S --samples K
    mmrsink bench --n N [N ...] --capacity-mode uniform|random --trials T --seed S

Exit codes: 1 unreadable or malformed file, 2 instance invariant violated,
3 numeric breakdown, 4 a check exceeded its tolerance.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import oracle
from .network import InstanceError, load, random_instance
from .parametric import NumericBreakdown
from .regret import RegretModel, solve

EXIT_MALFORMED = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

# tolerances of the check command (relative, floor of 1 on the scale)
TOL_F = 1e-7
TOL_OPT = 1e-7
TOL_MR = 1e-4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load(path):
    try:
        return load(path)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_MALFORMED, f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise CliError(EXIT_MALFORMED, f"{path}: {exc.strerror or exc}")
    except InstanceError as exc:
        raise CliError(EXIT_INVALID, f"{path}: invalid instance: {exc}")


def _model(net):
    try:
        return RegretModel(net)
    except NumericBreakdown as exc:
        raise CliError(EXIT_NUMERIC, f"numeric breakdown: {exc}")


def cmd_solve(args) -> int:
    net = _load(args.instance)
    try:
        result = solve(net, _model(net))
    except NumericBreakdown as exc:
        raise CliError(EXIT_NUMERIC, f"numeric breakdown: {exc}")
    doc = result.to_dict(net)
    if not args.timings:
        doc["diagnostics"].pop("seconds", None)
    text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _fmt(v) -> str:
    return repr(float(v))


def cmd_sample(args) -> int:
    net = _load(args.instance)
    model = _model(net)
    n = args.resolution
    if n < 1:
        raise CliError(EXIT_MALFORMED, "resolution must be positive")
    out = csv.writer(sys.stdout, lineterminator="\n")
    if args.what == "mr":
        xs = np.linspace(0.0, net.total_length, n)
        out.writerow(["x", "MR"])
        for x, v in zip(xs, model.mr(xs)):
            out.writerow([_fmt(x), _fmt(v)])
    elif args.what == "opt":
        ts = np.linspace(net.t_lo, net.t_hi, n)
        out.writerow(["t", "Opt"])
        for t, v in zip(ts, model.opt(ts)):
            out.writerow([_fmt(t), _fmt(v)])
    else:
        # an n-by-n grid over the path and the horizon
        xs = np.linspace(0.0, net.total_length, n)
        ts = np.linspace(net.t_lo, net.t_hi, n)
        out.writerow(["x", "t", "Phi"])
        for x in xs:
            for t, v in zip(ts, np.atleast_1d(model.phi(float(x), ts))):
                out.writerow([_fmt(x), _fmt(t), _fmt(v)])
    return 0


def _rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(1.0, np.abs(np.asarray(b)))


def run_checks(net, model, seed: int, samples: int):
    """``[(name, worst relative error, tolerance, worst sample description)]``."""
    rng = np.random.default_rng(seed)
    rows = []
    if samples <= 0:
        return rows
    # side functions against the enumerated fixed-t integral
    worst = (0.0, "")
    edges = rng.integers(0, net.n - 1, samples)
    sides = rng.integers(0, 2, samples)
    ts = rng.uniform(net.t_lo, net.t_hi, samples)
    for e, s, t in zip(edges, sides, ts):
        side = "LR"[s]
        F = (model.F_L if side == "L" else model.F_R)[e]
        err = float(_rel(F(t), oracle.oracle_F(net, int(e), side, [t])[0]))
        if err > worst[0] or not worst[1]:
            worst = (err, f"edge={int(e)} side={side} t={float(t)!r}")
    rows.append(("F", worst[0], TOL_F, worst[1]))
    # Opt against the pointwise minimum over vertices
    ts = rng.uniform(net.t_lo, net.t_hi, samples)
    errs = _rel(model.opt(ts), oracle.oracle_opt_many(net, ts))
    k = int(np.argmax(errs))
    rows.append(("Opt", float(errs[k]), TOL_OPT, f"t={float(ts[k])!r}"))
    # MR against the grid oracle (a lower bound that is tight up to the grid)
    xs = rng.uniform(0.0, net.total_length, samples)
    ref = oracle.oracle_mr_many(net, xs, 10_000, 40)
    errs = _rel(model.mr(xs), ref)
    k = int(np.argmax(errs))
    rows.append(("MR", float(errs[k]), TOL_MR, f"x={float(xs[k])!r}"))
    return rows


def cmd_check(args) -> int:
    net = _load(args.instance)
    model = _model(net)
    rows = run_checks(net, model, args.seed, args.samples)
    if not rows:
        print("warning: samples=0, nothing checked")
        return 0
    failed = False
    for name, err, tol, where in rows:
        ok = err <= tol
        failed |= not ok
        print(f"{name:4s} max_rel_err={err:.3e} tol={tol:.0e} {'ok' if ok else 'FAIL'} worst: {where}")
    return EXIT_CHECK if failed else 0


BENCH_FIELDS = [
    "n",
    "capacity_mode",
    "trial",
    "seed",
    "sec_side_functions",
    "sec_opt",
    "sec_vertices",
    "sec_edges",
    "sec_total",
    "max_pieces_F",
    "pieces_opt",
    "max_regret_pieces",
]


def bench_rows(ns, capacity_mode: str, trials: int, seed: int):
    for n in ns:
        if n < 2:
            raise CliError(EXIT_INVALID, "n must be at least 2")
        for trial in range(trials):
            rng = np.random.default_rng([seed, n, trial])
            net = random_instance(n, rng, capacity_mode=capacity_mode)
            clock = time.perf_counter()
            res = solve(net)
            total = time.perf_counter() - clock
            d = res.diagnostics
            sec = d["seconds"]
            yield {
                "n": n,
                "capacity_mode": capacity_mode,
                "trial": trial,
                "seed": seed,
                "sec_side_functions": round(sec["side_functions"], 6),
                "sec_opt": round(sec["opt"], 6),
                "sec_vertices": round(sec["vertices"], 6),
                "sec_edges": round(sec["edges"], 6),
                "sec_total": round(total, 6),
                "max_pieces_F": max(d["pieces_F_L"] + d["pieces_F_R"]),
                "pieces_opt": d["pieces_opt"],
                "max_regret_pieces": max(e["regret_pieces"] for e in d["edges"]),
            }


def cmd_bench(args) -> int:
    out = csv.DictWriter(sys.stdout, fieldnames=BENCH_FIELDS, lineterminator="\n")
    out.writeheader()
    for row in bench_rows(args.n, args.capacity_mode, args.trials, args.seed):
        out.writerow(row)
        sys.stdout.flush()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmrsink", description="Minmax-regret sink location on parametric dynamic flow paths.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute the minmax-regret sink")
    s.add_argument("instance")
    s.add_argument("-o", "--output")
    s.add_argument("--timings", action="store_true", help="include wall-clock seconds per stage")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sample", help="emit CSV samples of MR(x), Opt(t) or Phi(x, t)")
    s.add_argument("instance")
    s.add_argument("--what", choices=["mr", "opt", "phi"], required=True)
    s.add_argument("--resolution", type=int, default=200)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("check", help="cross-check the symbolic pieces against the brute-force oracles")
    s.add_argument("instance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=200)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("bench", help="time random instances and report piece counts as CSV")
    s.add_argument("--n", type=int, nargs="+", required=True)
    s.add_argument("--capacity-mode", choices=["uniform", "random"], default="random")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
