"""Command-line interface: ``sepgl <command> ...``.

Machine-readable output (CSV/JSON) goes to stdout or ``--out``; logs go to
stderr. Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .exceptions import NumericalError, SepGLError
from .groups import assumption_ratio, induce_partition, random_group_structure
from .io import (
    format_group_file,
    format_matrix_csv,
    format_vector,
    load_matrix_csv,
    load_vector,
    parse_group_file,
)
from .penalties import (
    OverlappingGroupLasso,
    SeparableGroupLasso,
    WeightedLasso,
    dual_estimate,
    dual_upper_bound,
    lasso_weights,
    lq_norm,
    sandwich_check,
)
from .prox import prox_overlapping_bcd, prox_separable, prox_soft_threshold

log = logging.getLogger("sepgl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(args, text):
    if args.out and args.command not in ("bench", "simulate"):
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _penalty(kind, gs):
    if kind == "ogl":
        return OverlappingGroupLasso(gs)
    if kind == "sep":
        return SeparableGroupLasso.from_groups(gs)
    if kind == "wlasso":
        return WeightedLasso.from_groups(gs)
    raise UsageError(f"unknown penalty {kind!r}")


def cmd_induce(args):
    gs = parse_group_file(_read(args.groupfile))
    part = induce_partition(gs)
    ratio = assumption_ratio(gs, part)
    if args.format == "json":
        doc = {
            "p": gs.p,
            "m": gs.m,
            "n_parts": part.n_parts,
            "assumption_ratio": ratio,
            "parts": [
                {"indices": (P + 1).tolist(), "weight": float(w), "degree": int(h),
                 "groups": [gs.names[g] for g in sig]}
                for P, w, h, sig in zip(part.parts, part.weights, part.degree, part.signatures)
            ],
        }
        _emit(args, json.dumps(doc, indent=2) + "\n")
    else:
        lines = ["part,size,weight,degree,groups,indices"]
        for k, (P, w, h, sig) in enumerate(zip(part.parts, part.weights, part.degree, part.signatures)):
            lines.append(f"{k + 1},{P.size},{float(w)!r},{int(h)},{' '.join(gs.names[g] for g in sig)},"
                         f"{' '.join(str(j + 1) for j in P)}")
        _emit(args, "\n".join(lines) + "\n")
    log.info("%d groups -> %d parts; assumption ratio %.6g", gs.m, part.n_parts, ratio)
    return EXIT_OK


def cmd_norm(args):
    gs = parse_group_file(_read(args.groupfile))
    beta = load_vector(_read(args.vecfile))
    if args.kind == "lq":
        value = lq_norm(beta, gs, gs.weights, args.q1, args.q2)
    else:
        value = _penalty(args.kind, gs)(beta)
    _emit(args, f"{value!r}\n")
    return EXIT_OK


def cmd_prox(args):
    gs = parse_group_file(_read(args.groupfile))
    mu = load_vector(_read(args.vecfile))
    if args.kind == "ogl":
        res = prox_overlapping_bcd(mu, args.lam, gs, tol=args.tol)
        log.info("BCD: %d sweeps, last change %.3g", res.iterations, res.residual)
        beta = res.beta
    elif args.kind == "sep":
        beta = prox_separable(mu, args.lam, induce_partition(gs))
    else:
        beta = prox_soft_threshold(mu, args.lam, lasso_weights(gs))
    _emit(args, format_vector(beta))
    return EXIT_OK


def _load_problem(args):
    from .solver import Problem

    gs = parse_group_file(_read(args.groupfile))
    X, _ = load_matrix_csv(_read(args.xfile))
    y = load_vector(_read(args.yfile))
    return gs, Problem(X, y, args.loss)


def cmd_fit(args):
    from .solver import SolveConfig, fit, kkt_gap

    gs, problem = _load_problem(args)
    penalty = _penalty(args.penalty, gs)
    sol = fit(problem, penalty, SolveConfig(lam=args.lam, tol=args.tol, max_iter=args.max_iter))
    doc = {
        "penalty": args.penalty,
        "lambda": args.lam,
        "objective": sol.objective,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "kkt_gap": kkt_gap(problem, sol, penalty, args.lam),
        "beta": sol.beta.tolist(),
    }
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_path(args):
    from .path import regularization_path
    from .solver import SolveConfig

    gs, problem = _load_problem(args)
    penalty = _penalty(args.penalty, gs)
    res = regularization_path(problem, penalty, SolveConfig(tol=args.tol, max_iter=args.max_iter),
                              k=args.grid_size)
    log.info("lambda range [%.6g, %.6g]%s; path %.3fs", res.lambda_min, res.lambda_max,
             " (lower end floored)" if res.lambda_min_floored else "", res.total_time)
    header = ["lambda", "objective", "iterations", "support_size"] + [f"beta_{j + 1}" for j in range(problem.p)]
    rows = [[lam, s.objective, s.iterations, np.count_nonzero(s.beta), *s.beta]
            for lam, s in zip(res.lambdas, res.solutions)]
    _emit(args, format_matrix_csv(np.array(rows, dtype=np.float64), header))
    return EXIT_OK


def _config(args):
    from .experiment import ExperimentConfig

    cfg = ExperimentConfig.from_text(_read(args.configfile))
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_simulate(args):
    from .simgen import simulate

    cfg = _config(args)
    data = simulate(cfg.sim_spec(), args.replicate)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    files = {
        "X.csv": format_matrix_csv(data.X),
        "y.csv": format_vector(data.y),
        "beta_star.csv": format_vector(data.beta_star),
        "groups.txt": format_group_file(data.gs),
    }
    for name, text in files.items():
        with open(os.path.join(out, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    log.info("wrote %s to %s", ", ".join(files), out)
    return EXIT_OK


def cmd_bench(args):
    from .experiment import run_experiment

    cfg = _config(args)
    result = run_experiment(cfg, out_dir=args.out, threads=args.threads)
    if args.out is None:
        sys.stdout.write(result.results_csv())
    summary = result.summary()
    if summary:
        for method, stats in summary.items():
            e = stats["best_rel_error"]
            t = stats["time_seconds"]
            log.info("%-12s rel.err %.4f +/- %.4f  time %.3fs +/- %.3f", method, e["mean"], e["half_width"],
                     t["mean"], t["half_width"])
    return EXIT_OK


def _check_sandwich(args, rng):
    worst = 0.0
    failures = 0
    for _ in range(args.trials):
        p = int(rng.integers(1, 31))
        gs = random_group_structure(rng, p, int(rng.integers(1, 9)))
        part = induce_partition(gs)
        beta = rng.standard_normal(p)
        rep = sandwich_check(gs, part, beta)
        scale = 1.0 + rep.psi
        worst = max(worst, (rep.phi - rep.psi) / scale, (rep.psi - rep.wlasso) / scale)
        failures += not rep.ok
    return {"check": "sandwich", "trials": args.trials, "max_violation": max(worst, 0.0),
            "failures": failures}, failures == 0


def _check_dual(args, rng):
    worst = -np.inf
    for t in range(args.trials):
        p = int(rng.integers(2, 9))
        gs = random_group_structure(rng, p, int(rng.integers(1, 5)))
        v = rng.standard_normal(p)
        est = dual_estimate(v, OverlappingGroupLasso(gs), budget=1, seed=t)
        worst = max(worst, est - dual_upper_bound(v, gs))
    return {"check": "dual", "trials": args.trials, "max_excess": worst}, worst <= 1e-8


def _check_kkt(args, rng):
    from .solver import Problem, SolveConfig, fit, kkt_gap

    worst = 0.0
    for _ in range(args.trials):
        p = int(rng.integers(2, 16))
        gs = random_group_structure(rng, p, int(rng.integers(1, 6)))
        X = rng.standard_normal((3 * p, p))
        y = X @ rng.standard_normal(p) + rng.standard_normal(3 * p)
        problem = Problem(X, y)
        penalty = SeparableGroupLasso.from_groups(gs)
        lam = float(rng.uniform(0.01, 0.5))
        sol = fit(problem, penalty, SolveConfig(lam=lam, tol=1e-12, max_iter=100_000))
        worst = max(worst, kkt_gap(problem, sol, penalty, lam))
    return {"check": "kkt", "trials": args.trials, "max_gap": worst}, worst <= 1e-4


def _check_theorem1(args, rng):
    from .tightness import theorem1_search

    found = 0
    checked = 0
    for _ in range(args.trials):
        p = int(rng.integers(2, 5))
        gs = random_group_structure(rng, p, int(rng.integers(1, 5)))
        rep = theorem1_search(gs, rng)
        checked += rep.checked
        found += len(rep.counterexamples)
    return {"check": "theorem1-search", "trials": args.trials, "candidates": checked,
            "counterexamples": found}, found == 0


CHECKS = {"sandwich": _check_sandwich, "dual": _check_dual, "kkt": _check_kkt, "theorem1-search": _check_theorem1}


def cmd_check(args):
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    report, ok = CHECKS[args.which](args, rng)
    report["ok"] = ok
    _emit(args, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_NUMERIC


def _common_flags(top):
    # subcommands repeat the global flags; SUPPRESS keeps a flag given before
    # the subcommand from being reset to the default
    def d(value):
        return value if top else argparse.SUPPRESS

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=d(None), help="random seed")
    common.add_argument("--threads", type=int,
                        default=d(int(os.environ.get("SEPGL_THREADS", "1") or 1)),
                        help="worker processes for replicates (env SEPGL_THREADS)")
    common.add_argument("--out", default=d(None), help="output file (directory for bench/simulate)")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser():
    parser = _Parser(prog="sepgl", description=__doc__.splitlines()[0], parents=[_common_flags(True)])
    common = _common_flags(False)
    parser.add_argument("--version", action="version", version=f"sepgl {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("induce", parents=[common], help="print the induced partition of a group file")
    p.add_argument("groupfile")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("norm", parents=[common], help="evaluate a penalty at a vector")
    p.add_argument("kind", choices=("ogl", "sep", "wlasso", "lq"))
    p.add_argument("groupfile")
    p.add_argument("vecfile")
    p.add_argument("--q1", type=float, default=1.0)
    p.add_argument("--q2", type=float, default=2.0)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("prox", parents=[common], help="apply a proximal operator")
    p.add_argument("kind", choices=("ogl", "sep", "wlasso"))
    p.add_argument("groupfile")
    p.add_argument("vecfile")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_prox)

    for name, func, text in (("fit", cmd_fit, "fit a penalized regression at one lambda"),
                             ("path", cmd_path, "fit a penalized regression over a lambda grid")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("groupfile")
        p.add_argument("xfile", help="design matrix CSV")
        p.add_argument("yfile", help="response vector")
        p.add_argument("--penalty", choices=("ogl", "sep", "wlasso"), default="sep")
        p.add_argument("--loss", choices=("squared", "logistic"), default="squared")
        p.add_argument("--tol", type=float, default=1e-5)
        p.add_argument("--max-iter", type=int, default=20_000)
        if name == "fit":
            p.add_argument("--lambda", dest="lam", type=float, required=True)
        else:
            p.add_argument("--grid-size", type=int, default=50)
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", parents=[common], help="write one simulated replicate")
    p.add_argument("configfile")
    p.add_argument("--replicate", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="run a benchmark config")
    p.add_argument("configfile")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", parents=[common], help="run a property check")
    p.add_argument("which", choices=tuple(CHECKS))
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "bench" else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"sepgl: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"sepgl: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (SepGLError, ValueError, OSError) as exc:
        sys.stderr.write(f"sepgl: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
