"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 solver did not converge (the
diagnostics are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .concord import ConcordConfig, concord_fit, concord_objective, nonzero_fraction
from .exceptions import PyConcordError
from .linalg import SCALE_MODES, Dataset, standardize
from .portfolio import RebalancePlan, ReturnsPanel, apr_to_daily, backtest
from .selection import (
    _argmin_prefer_first,
    cv_risk_path,
    default_grid,
    penalty_path,
    select_lambda_bic,
)
from .simulate import gen_sparse_precision, roc_auc_partial, sample_gaussian, sample_mvt, support_metrics
from .space import space_fit

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
SOLVERS = ("concord", "concord-uncorrected", "space-uniform", "space-pvar")


class InputError(Exception):
    pass


def _out_dir(path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_data(args):
    values, names = io.read_matrix_csv(args.data, delimiter=args.delimiter)
    if values.shape[0] < 2:
        raise InputError("need at least two observations")
    return standardize(values, args.scale_mode), names


def _config_of(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return io._jsonable(cfg)


def _write_manifest(out, args, argv, seeds=None, inputs=()):
    config = _config_of(args)
    config["argv"] = list(argv)
    io.write_json(out / "manifest.json", io.build_manifest(args.command, config, seeds, inputs))


def _cycle_json(cycle):
    if cycle is None:
        return None
    return {"period": cycle.period, "matrices": [m.tolist() for m in cycle.matrices]}


def cmd_fit(args, argv):
    ds, _ = _load_data(args)
    out = _out_dir(args.out)
    lam = args.lam if args.lam_star is None else args.lam_star * ds.n
    summary = {"solver": args.solver, "lambda": lam, "n": ds.n, "p": ds.p}
    if args.solver.startswith("concord"):
        variant = "uncorrected" if args.solver == "concord-uncorrected" else "corrected"
        cfg = ConcordConfig(lam=lam, max_sweeps=args.max_sweeps, tol=args.tol, variant=variant, path=args.path)
        res = concord_fit(ds, cfg)
        omega = res.omega
        summary.update(
            converged=res.converged,
            sweeps_used=res.sweeps_used,
            objective=concord_objective(omega, ds, lam, variant),
            max_change=res.max_change_trace[-1],
            path=res.path,
        )
    else:
        weights = "uniform" if args.solver == "space-uniform" else "partial_variance"
        res = space_fit(ds, lam, weights, max_iters=args.max_sweeps, tol=args.tol)
        omega = res.omega
        summary.update(
            converged=res.converged,
            sweeps_used=res.sweeps_used,
            max_change=res.change_trace[-1] if res.change_trace.size else None,
            cycle=_cycle_json(res.cycle),
            trace=[m.tolist() for m in res.trace],
        )
    summary["nz_fraction"] = nonzero_fraction(omega)
    summary["edges"] = len(io.off_diagonal_edges(omega))
    io.write_edge_list(out / "edges.tsv", omega)
    io.write_json(out / "summary.json", summary)
    _write_manifest(out, args, argv, inputs=[args.data])
    if not summary["converged"]:
        print(json.dumps(io._jsonable({k: summary[k] for k in ("solver", "sweeps_used", "cycle") if k in summary})))
        return EXIT_NONCONVERGED
    return EXIT_OK


def _parse_grid(text):
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise InputError(f"bad --grid {text!r}") from None


def cmd_path(args, argv):
    ds, _ = _load_data(args)
    out = _out_dir(args.out)
    grid = _parse_grid(args.grid) if args.grid else default_grid(ds, args.auto_grid)
    cfg = ConcordConfig(max_sweeps=args.max_sweeps, tol=args.tol)
    if args.select == "cv" and args.fold_mode == "random" and args.seed is None:
        raise InputError("--seed is required with --fold-mode random")
    path = penalty_path(ds, grid, cfg)
    est_dir = _out_dir(out / "estimates")
    for k, fit in enumerate(path.fits):
        io.write_edge_list(est_dir / f"lambda_{k:03d}.tsv", fit.omega)
    if args.select == "bic":
        lam, report = select_lambda_bic(path, ds)
        k = report.selected_index
        selection = {"method": "bic", "selected_lambda": lam, "selected_index": k,
                     "entries": [e.to_dict() for e in report.entries]}
    else:
        risks = cv_risk_path(ds, grid, args.folds, cfg, args.fold_mode, args.seed, args.jobs)
        k = _argmin_prefer_first(risks)
        lam = float(grid[k])
        selection = {"method": "cv", "selected_lambda": lam, "selected_index": k, "risk": risks.tolist()}
    io.write_edge_list(out / "selected_edges.tsv", path.fits[k].omega)
    io.write_json(out / "selection.json", selection)
    io.write_json(
        out / "path.json",
        {
            "lambdas": path.lambdas.tolist(),
            "nz_fraction": path.nonzero_fraction.tolist(),
            "converged": [f.converged for f in path.fits],
            "sweeps_used": [f.sweeps_used for f in path.fits],
        },
    )
    _write_manifest(out, args, argv, seeds=[args.seed] if args.seed is not None else None, inputs=[args.data])
    return EXIT_OK if all(f.converged for f in path.fits) else EXIT_NONCONVERGED


def _simulate_one(args, seed, out):
    ss = np.random.SeedSequence(seed)
    truth_seed, sample_seed = ss.spawn(2)
    truth = gen_sparse_precision(args.p, args.density, args.cond, truth_seed)
    if args.dist == "gaussian":
        ds = sample_gaussian(truth, args.n, sample_seed)
    else:
        ds = sample_mvt(truth, args.n, args.df, sample_seed)
    io.write_matrix_csv(out / "data.csv", ds.values, [f"x{i + 1}" for i in range(args.p)])
    io.save_truth(out, truth)
    return {"seed": seed, "density": truth.density, "condition_number": truth.condition_number,
            "edges": len(truth.support)}


def cmd_simulate(args, argv):
    out = _out_dir(args.out)
    if args.replicates == 1:
        info = [_simulate_one(args, args.seed, out)]
        seeds = [args.seed]
    else:
        seeds = [args.seed + r for r in range(args.replicates)]
        dirs = [_out_dir(out / f"rep_{r:03d}") for r in range(args.replicates)]
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            info = list(pool.map(lambda sd: _simulate_one(args, *sd), zip(seeds, dirs)))
    io.write_json(out / "truth_summary.json", info)
    _write_manifest(out, args, argv, seeds=seeds)
    return EXIT_OK


def _estimate_files(paths):
    files = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("*.tsv")) if p.is_dir() else [p])
    if not files:
        raise InputError("no estimate files found")
    return files


def cmd_eval(args, argv):
    truth = io.load_truth(args.truth, args.truth_diag)
    files = _estimate_files(args.estimates)
    estimates = [io.read_edge_list(f, truth.p) for f in files]
    points = []
    for f, est in zip(files, estimates):
        m = support_metrics(est, truth)
        points.append({"file": str(f), "tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn,
                       "tpr": m.tpr, "fpr": m.fpr, "sign_agreement": m.sign_agreement})
    roc = roc_auc_partial(estimates, truth, args.fpr_max)
    report = {"fpr_max": args.fpr_max, "auc_partial_normalized": roc.auc_partial_normalized,
              "curve": roc.points.tolist(), "points": points}
    if args.out:
        out = _out_dir(args.out)
        io.write_json(out / "roc.json", report)
        _write_manifest(out, args, argv, inputs=[args.truth, *files])
    print(json.dumps(io._jsonable({"auc_partial_normalized": roc.auc_partial_normalized})))
    return EXIT_OK


def cmd_backtest(args, argv):
    returns, dates, tickers = io.read_returns_csv(args.returns, args.delimiter)
    with open(args.config) as fh:
        cfg = json.load(fh)
    panel = ReturnsPanel(returns, dates, tickers)
    try:
        n_est = int(cfg["n_est"])
    except KeyError:
        raise InputError("config needs n_est") from None
    if "explicit_boundaries" in cfg:
        plan = RebalancePlan(tuple(cfg["explicit_boundaries"]), n_est)
    elif "rebalance_every_days" in cfg:
        plan = RebalancePlan.every(panel.T, int(cfg["rebalance_every_days"]), n_est)
    else:
        raise InputError("config needs rebalance_every_days or explicit_boundaries")
    # r_b is an annual rate in the config; the library takes a daily rate
    report = backtest(
        panel,
        plan,
        estimator=cfg.get("estimator", "concord_cv"),
        r_c=float(cfg.get("r_c", 0.0)),
        r_b=apr_to_daily(float(cfg.get("r_b", 0.0))),
        r_f=float(cfg.get("r_f", 0.0)),
        lambda_grid=cfg.get("lambda_grid"),
        n_lambdas=int(cfg.get("n_lambdas", 50)),
        folds=int(cfg.get("folds", 5)),
        drift=cfg.get("drift", "holding"),
    )
    out = _out_dir(args.out)
    body = report.to_dict()
    body["tickers"] = list(panel.tickers)
    io.write_json(out / "report.json", body)
    days = ["start"] + list(panel.dates[plan.boundaries[report.periods[0] - 1] : plan.boundaries[report.periods[-1]]])
    with open(out / "wealth.csv", "w") as fh:
        fh.write("date,wealth\n")
        for d, w in zip(days, report.wealth):
            fh.write(f"{d},{io.fmt(w)}\n")
    _write_manifest(out, args, argv, inputs=[args.returns, args.config])
    return EXIT_OK


def _trace_csv(path, changes):
    with open(path, "w") as fh:
        fh.write("iteration,max_abs_change\n")
        for k, c in enumerate(changes, 1):
            fh.write(f"{k},{io.fmt(c)}\n")


def cmd_demo_nonconvergence(args, argv):
    values, _ = io.read_matrix_csv(io.fixture_path())
    # the shipped matrix is already standardized
    ds = Dataset(values, "none")
    out = _out_dir(args.out)
    report = {}
    for weights in ("uniform", "partial_variance"):
        res = space_fit(ds, args.lam, weights, max_iters=args.max_iters)
        name = f"space_{weights}"
        _trace_csv(out / f"{name}_trace.csv", res.change_trace)
        report[name] = {"converged": res.converged, "sweeps_used": res.sweeps_used, "cycle": _cycle_json(res.cycle),
                        "omega": res.omega.tolist()}
    # both objectives put the penalty on the same unscaled residual sums
    # S is nearly singular here, so CONCORD needs many cheap sweeps
    res = concord_fit(ds, ConcordConfig(lam=args.lam, max_sweeps=args.concord_max_sweeps))
    _trace_csv(out / "concord_trace.csv", res.max_change_trace)
    report["concord"] = {"converged": res.converged, "sweeps_used": res.sweeps_used, "omega": res.omega.tolist(),
                         "lambda": args.lam}
    io.write_json(out / "report.json", report)
    _write_manifest(out, args, argv, inputs=[])
    print(json.dumps(io._jsonable({k: {"converged": v["converged"], "sweeps_used": v["sweeps_used"]}
                                   for k, v in report.items()})))
    return EXIT_OK


def cmd_replay(args, argv):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    replayed = list(manifest["config"]["argv"])
    if args.out is not None:
        replayed = _replace_out(replayed, args.out)
    return main(replayed)


def _replace_out(argv, out):
    argv = list(argv)
    for k, tok in enumerate(argv):
        if tok == "--out" and k + 1 < len(argv):
            argv[k + 1] = str(out)
            return argv
        if tok.startswith("--out="):
            argv[k] = f"--out={out}"
            return argv
    return argv + ["--out", str(out)]


def build_parser():
    parser = argparse.ArgumentParser(prog="pyconcord", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("data", help="numeric CSV, rows are observations")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--scale-mode", choices=SCALE_MODES, default="std_dev")
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-sweeps", type=int, default=500)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="fit one penalty value")
    data_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, default=0.0)
    g.add_argument("--lambda-star", dest="lam_star", type=float, default=None)
    p.add_argument("--solver", choices=SOLVERS, default="concord")
    p.add_argument("--path", choices=("auto", "naive", "residual_cached"), default="auto")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="fit a penalty grid and select lambda")
    data_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", help="comma-separated decreasing penalties")
    g.add_argument("--auto-grid", type=int, default=50, metavar="N")
    p.add_argument("--select", choices=("bic", "cv"), default="bic")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--fold-mode", choices=("contiguous", "random"), default="contiguous")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("simulate", help="draw a sparse ground truth and a sample")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--cond", type=float, required=True)
    p.add_argument("--dist", choices=("gaussian", "mvt"), default="gaussian")
    p.add_argument("--df", type=float, default=5.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="ROC and partial AUC of estimates against a truth")
    p.add_argument("--truth", required=True, help="truth edge list (TSV)")
    p.add_argument("--truth-diag", default=None)
    p.add_argument("estimates", nargs="+", help="edge-list files or directories of them")
    p.add_argument("--fpr-max", type=float, default=0.15)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("backtest", help="minimum-variance rebalancing backtest")
    p.add_argument("returns")
    p.add_argument("config")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("demo-nonconvergence", help="SPACE vs CONCORD on the shipped 4 x 3 matrix")
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--max-iters", type=int, default=1500, help="SPACE outer iterations")
    p.add_argument("--concord-max-sweeps", type=int, default=50000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_nonconvergence)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write to this directory instead of the recorded one")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, argv)
    except (InputError, PyConcordError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
