"""Command line entry point: ``vwqc <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import load_csv, load_matrix_csv, load_model, save_model
from .errors import VWQCError
from .estimator import FitConfig, fit, fit_asymmetric_laplace, predict
from .evaluation import (CLASSIFIERS, CvSpec, cross_validate, default_jobs, make_classifier,
                         relative_rows, run_benchmark, summarize, write_dicts, write_results)
from .simgen import KINDS, ScenarioSpec, generate, metadata, paper_grid


class UsageError(Exception):
    """Flag combination rejected before any work starts."""


def _label_arg(text):
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        return text


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _flags(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _sidecar(path, args, **extra):
    doc = {"tool": "vwqc", "version": __version__, "flags": _flags(args)}
    doc.update(extra)
    _write_json(str(path) + ".meta.json", doc)


def _fit_config(args) -> FitConfig:
    return FitConfig(lambda_cap=args.lambda_cap, theta_floor=args.theta_floor, tol=args.tol,
                     max_sweeps=args.max_sweeps, restarts=args.restarts, seed=args.seed,
                     theta_step=args.theta_step)


def _load_labelled(args):
    if args.no_header and args.label_column is None:
        raise UsageError("--label-column is required when the file has no header row")
    return load_csv(args.data, label_column=_label_arg(args.label_column),
                    has_header=not args.no_header, delimiter=args.delimiter)


# -- subcommands -------------------------------------------------------------------

def cmd_train(args):
    data = _load_labelled(args)
    model, report = fit(data, _fit_config(args), standardize=args.standardize)
    model = replace(model, metadata={"flags": _flags(args), "version": __version__,
                                     "final_psi": report.final_psi})
    save_model(model, args.model)
    rep = report.to_dict()
    if args.report:
        _write_json(args.report, {"flags": _flags(args), "report": rep})
    print(json.dumps({"model": str(args.model), "final_psi": report.final_psi,
                      "sweeps": report.sweeps_used, "converged": report.converged}))


def cmd_predict(args):
    model = load_model(args.model)
    drop = _label_arg(args.label_column)
    if drop is None and args.has_labels:
        drop = -1
    x, _ = load_matrix_csv(args.data, has_header=not args.no_header, delimiter=args.delimiter,
                           drop_column=drop)
    names = model.label_names()
    pred = [names[k] for k in predict(model, x)]
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["prediction"])
        w.writerows([p] for p in pred)
    finally:
        if args.output:
            out.close()
    if args.output:
        _sidecar(args.output, args, model_metadata=model.metadata)


def cmd_cv(args):
    data = _load_labelled(args)
    cv = CvSpec(folds=args.folds, stratified=not args.no_stratify, seed=args.seed,
                standardize=args.standardize)
    cfg = _fit_config(args)
    rows = []
    for name in args.classifiers:
        res = cross_validate(data, lambda: make_classifier(name, args.seed, cfg, args.skewness), cv)
        rows.append({"classifier": name, "mean": res.mean, "sd": res.sd, "se": res.se,
                     "folds": cv.folds, "stratified": int(cv.stratified)})
    for r in rows:
        print(f"{r['classifier']:<10} mean={r['mean']:.4f} sd={r['sd']:.4f} se={r['se']:.4f}")
    if args.output:
        write_dicts(rows, args.output)
        _sidecar(args.output, args)


def _spec_from_args(args) -> ScenarioSpec:
    return ScenarioSpec(kind=args.kind, n=args.n, p=args.p, relevant_fraction=args.relevant,
                        correlated=args.correlated, seed=args.seed, standardize=args.standardize,
                        shift_before_transform=not args.shift_after_transform,
                        fill_order=args.fill_order)


def _write_dataset(ds, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.variable_names) + ["class"])
        for row, lab in zip(ds.values, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def cmd_simulate(args):
    spec = _spec_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = generate(spec)
    _write_dataset(train, out / "train.csv")
    _write_dataset(test, out / "test.csv")
    _write_json(out / "metadata.json", metadata(spec, {"flags": _flags(args), "version": __version__}))
    print(json.dumps({"train": str(out / "train.csv"), "test": str(out / "test.csv")}))


def _read_grid(path, seed):
    text = Path(path).read_text()
    if path.endswith(".json"):
        rows = json.loads(text)
    else:
        rows = list(csv.DictReader(text.splitlines()))
    cells = []
    for i, r in enumerate(rows, 1):
        try:
            cells.append(ScenarioSpec(
                kind=str(r["kind"]), n=int(r["n"]), p=int(r["p"]),
                relevant_fraction=float(r.get("relevant", 1.0)),
                correlated=str(r.get("correlated", "0")).lower() in ("1", "true", "yes"),
                seed=seed,
                standardize=str(r.get("standardize", "0")).lower() in ("1", "true", "yes")))
        except KeyError as exc:
            raise UsageError(f"grid row {i} lacks field {exc}") from None
    return cells


def cmd_benchmark(args):
    if bool(args.grid) == bool(args.paper_grid):
        raise UsageError("give exactly one of --grid FILE or --paper-grid")
    grid = paper_grid(args.seed) if args.paper_grid else _read_grid(args.grid, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs or default_jobs()
    records = list(run_benchmark(grid, args.classifiers, args.replications, args.seed, jobs,
                                 _fit_config(args), args.skewness))
    write_results(records, out / "results.csv")
    summary = summarize(records)
    write_dicts(summary, out / "summary.csv")
    write_dicts(relative_rows(summary), out / "relative.csv")
    _write_json(out / "metadata.json", {
        "tool": "vwqc", "version": __version__, "flags": _flags(args), "cells": len(grid),
        "skewness": args.skewness, "copula": "gaussian", "jobs": jobs,
        "sd_label": "sd of replication rates", "se_label": "sd / sqrt(replications)"})
    failed = sum(1 for r in records if r.error)
    print(json.dumps({"records": len(records), "failed": failed, "out_dir": str(out)}))


def cmd_fit_al(args):
    x, _ = load_matrix_csv(args.data, has_header=not args.no_header, delimiter=args.delimiter)
    if x.shape[1] <= args.column:
        raise UsageError(f"--column {args.column} out of range for {x.shape[1]} columns")
    theta, lam, loc, report = fit_asymmetric_laplace(x[:, args.column], _fit_config(args))
    print(json.dumps({"theta": theta, "lambda": lam, "location": loc, "n": int(x.shape[0]),
                      "final_psi": report.final_psi}))


# -- parser ------------------------------------------------------------------------

def _csv_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in CLASSIFIERS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"classifiers must be drawn from {CLASSIFIERS}")
    return items


def _add_input(p, labelled=True):
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--no-header", action="store_true", help="the file has no header row")
    p.add_argument("--delimiter", default=",")
    if labelled:
        p.add_argument("--label-column", help="label column name or 0-based index (default: last)")


def _add_fit(p):
    d = FitConfig()
    p.add_argument("--lambda-cap", type=float, default=d.lambda_cap)
    p.add_argument("--theta-floor", type=float, default=d.theta_floor)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--max-sweeps", type=int, default=d.max_sweeps)
    p.add_argument("--restarts", type=int, default=d.restarts)
    p.add_argument("--theta-step", choices=("profile", "local"), default=d.theta_step)


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="single source of all randomness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vwqc", description="Variable-wise quantile classifier")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and save it as JSON")
    _add_input(p)
    _add_fit(p)
    _add_seed(p)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--report", help="optional fit report JSON path")
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels with a saved model")
    _add_input(p)
    p.add_argument("--has-labels", action="store_true",
                   help="the file carries a label column to ignore (default: last)")
    p.add_argument("--model", required=True)
    p.add_argument("--output", help="predictions CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_input(p)
    _add_fit(p)
    _add_seed(p)
    p.add_argument("--classifiers", type=_csv_list, default=["vwqc"])
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--skewness", choices=("galton", "moment"), default="galton")
    p.add_argument("--output", help="summary CSV path")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="write one synthetic train/test pair")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--relevant", type=float, default=1.0)
    p.add_argument("--correlated", action="store_true")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--shift-after-transform", action="store_true")
    p.add_argument("--fill-order", choices=("F", "C"), default="F")
    _add_seed(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run a simulation grid")
    p.add_argument("--grid", help="CSV or JSON with kind,n,p,relevant,correlated[,standardize]")
    p.add_argument("--paper-grid", action="store_true", help="all 288 settings")
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--classifiers", type=_csv_list, default=list(CLASSIFIERS))
    p.add_argument("--skewness", choices=("galton", "moment"), default="galton")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    _add_fit(p)
    _add_seed(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("fit-al", help="asymmetric Laplace MLE for one column")
    _add_input(p, labelled=False)
    p.add_argument("--column", type=int, default=0)
    _add_fit(p)
    _add_seed(p)
    p.set_defaults(func=cmd_fit_al)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"vwqc {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (VWQCError, ValueError, OSError) as exc:
        print(f"vwqc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
