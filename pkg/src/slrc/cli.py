"""Command-line surface.

Subcommands: ``decompose``, ``classify``, ``experiment``, ``synth``,
``report``. Exit codes: 0 success, 2 invalid input, 3 numeric failure.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .data import SyntheticSpec, generate_synthetic, read_matrix_csv, write_matrix_csv
from .errors import InvalidInputError, NumericError
from .experiment import (
    ExperimentConfig,
    emit_report,
    load_report,
    run_experiment,
)
from .model import Dictionary, classify
from .solvers import SolverConfig, admm_solve

_SOLVER_KEYS = (
    "model", "lambda_l", "lambda_g", "beta",
    "outer_iters", "inner_iters", "feas_tol", "step_rule",
)


def _add_solver_flags(p):
    p.add_argument("--model", choices=("slr", "chislr"), default=None)
    p.add_argument("--lambda-l", dest="lambda_l", type=float, default=None)
    p.add_argument("--lambda-g", dest="lambda_g", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--outer-iters", dest="outer_iters", type=int, default=None)
    p.add_argument("--inner-iters", dest="inner_iters", type=int, default=None)
    p.add_argument("--feas-tol", dest="feas_tol", type=float, default=None)
    p.add_argument("--step-rule", dest="step_rule",
                   choices=("fixed", "backtracking"), default=None)


def _solver_overrides(args):
    return {k: getattr(args, k) for k in _SOLVER_KEYS if getattr(args, k) is not None}


def _solver_config(args):
    return dataclasses.replace(SolverConfig(), **_solver_overrides(args))


def _cmd_synth(args):
    spec = SyntheticSpec(
        d=args.d, classes=args.classes, atoms_per_class=args.atoms_per_class,
        tau=args.tau, active_class=args.active_class,
        coeff_sparsity=args.sparsity, neutral_scale=args.neutral_scale,
        noise_sigma=args.noise_sigma, seed=args.seed,
    )
    dictionary, y, x_true, l_true, label = generate_synthetic(spec)
    os.makedirs(args.out, exist_ok=True)
    dictionary.save(os.path.join(args.out, "dictionary.dict"))
    write_matrix_csv(os.path.join(args.out, "Y.csv"), y)
    write_matrix_csv(os.path.join(args.out, "X_true.csv"), x_true)
    write_matrix_csv(os.path.join(args.out, "L_true.csv"), l_true)
    with open(os.path.join(args.out, "instance.json"), "w", encoding="utf-8") as fh:
        json.dump({"label": label, "spec": dataclasses.asdict(spec)}, fh, indent=2)
        fh.write("\n")
    print(f"wrote synthetic instance (class {label}) to {args.out}")
    return 0


def _cmd_decompose(args):
    y = read_matrix_csv(args.signal)
    dictionary = Dictionary.load(args.dictionary)
    dec = admm_solve(y, dictionary, _solver_config(args))
    os.makedirs(args.out, exist_ok=True)
    write_matrix_csv(os.path.join(args.out, "X.csv"), dec.X)
    write_matrix_csv(os.path.join(args.out, "L.csv"), dec.L)
    write_matrix_csv(os.path.join(args.out, "Lambda.csv"), dec.Lambda)
    with open(os.path.join(args.out, "history.csv"), "w", encoding="utf-8") as fh:
        fh.write("iteration,objective,feasibility,rank_l\n")
        for h in dec.history:
            fh.write(f"{h.iteration},{h.objective!r},{h.feasibility!r},{h.rank_l}\n")
    rel = dec.feasibility / max(float(np.linalg.norm(y)), 1e-300)
    print(f"feasibility residual: {dec.feasibility:.6e} (relative {rel:.6e})")
    print(f"rank estimate of L: {dec.rank_l}")
    return 0


def _cmd_classify(args):
    y = read_matrix_csv(args.signal)
    dictionary = Dictionary.load(args.dictionary)
    result = classify(y, dictionary, _solver_config(args))
    doc = result.as_dict()
    print(f"predicted class: {result.predicted}")
    for label, residual in doc["residuals"].items():
        print(f"  residual[{label}] = {residual:.6e}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return 0


_EXPERIMENT_KEYS = (
    "repeats", "seed", "dataset", "train_per_class", "test_per_class",
    "tau_trn", "tau_tst", "train_mode", "test_mode", "normalization",
    "workers",
)
_SYNTH_PROTO_KEYS = (
    "d", "classes", "atoms_per_class", "tau", "coeff_sparsity",
    "neutral_scale", "noise_sigma", "units_per_class",
)


def _cmd_experiment(args):
    doc = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise InvalidInputError(f"{args.config}: cannot read config ({exc})") from exc
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise InvalidInputError(f"{args.config}: config must be a JSON object")

    for key in _EXPERIMENT_KEYS:
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    if args.synthetic:
        doc.setdefault("synthetic", {})
        doc.pop("dataset", None)
    if doc.get("synthetic") is not None:
        for key in _SYNTH_PROTO_KEYS:
            value = getattr(args, key, None)
            if value is not None:
                doc.setdefault("synthetic", {})[key] = value
    solver_doc = doc.get("solver", {})
    solver_doc.update(_solver_overrides(args))
    if solver_doc:
        doc["solver"] = solver_doc
    if args.exclude_diverged:
        doc["exclude_diverged"] = True
    doc.pop("output", None)

    cfg = ExperimentConfig.from_dict(doc)
    report = run_experiment(cfg)
    paths = emit_report(report, format=args.format, output=args.out)
    print(
        f"accuracy {report.accuracy_mean:.4f} (std {report.accuracy_std:.4f}) "
        f"over {len(report.runs)} runs; diverged units: {report.diverged_units}"
    )
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_report(args):
    report = load_report(args.report)
    paths = emit_report(report, format=args.format, output=args.out)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slrc",
        description="Sparse plus low-rank decomposition and classification "
                    "of multichannel signals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic instance")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--classes", type=int, default=7)
    p.add_argument("--atoms-per-class", dest="atoms_per_class", type=int, default=10)
    p.add_argument("--tau", type=int, default=8)
    p.add_argument("--active-class", dest="active_class", type=int, default=0)
    p.add_argument("--sparsity", type=float, default=0.3)
    p.add_argument("--neutral-scale", dest="neutral_scale", type=float, default=1.0)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth-out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("decompose", help="decompose a signal matrix into DX + L")
    p.add_argument("signal", help="signal matrix CSV")
    p.add_argument("dictionary", help="dictionary file")
    p.add_argument("--out", default="decompose-out")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("classify", help="classify a signal matrix")
    p.add_argument("signal", help="signal matrix CSV")
    p.add_argument("dictionary", help="dictionary file")
    p.add_argument("--out", default=None, help="optional result JSON path")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("experiment", help="run a repeated-split experiment")
    p.add_argument("--config", default=None, help="JSON experiment config")
    p.add_argument("--dataset", default=None, help="dataset manifest path")
    p.add_argument("--synthetic", action="store_true",
                   help="use the synthetic protocol")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-per-class", dest="train_per_class", type=int, default=None)
    p.add_argument("--test-per-class", dest="test_per_class", type=int, default=None)
    p.add_argument("--tau-trn", dest="tau_trn", type=int, default=None)
    p.add_argument("--tau-tst", dest="tau_tst", type=int, default=None)
    p.add_argument("--train-mode", dest="train_mode",
                   choices=("neutral-subtract", "raw"), default=None)
    p.add_argument("--test-mode", dest="test_mode",
                   choices=("first-plus-last", "raw-window"), default=None)
    p.add_argument("--normalization",
                   choices=("none", "unit-l2-columns"), default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--exclude-diverged", dest="exclude_diverged", action="store_true")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--atoms-per-class", dest="atoms_per_class", type=int, default=None)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--sparsity", dest="coeff_sparsity", type=float, default=None)
    p.add_argument("--neutral-scale", dest="neutral_scale", type=float, default=None)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=None)
    p.add_argument("--units-per-class", dest="units_per_class", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json", "text-table"), default="json")
    p.add_argument("--out", default="experiment-out")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="re-render a saved report.json")
    p.add_argument("report", help="report.json path")
    p.add_argument("--format", choices=("csv", "json", "text-table"),
                   default="text-table")
    p.add_argument("--out", default="report-out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
