"""Experiment runner: repeated randomized splits, classification of every
test unit, confusion/sensitivity aggregation, and report files.

Reports are built to be reproducible: everything emitted is a pure
function of the configuration and the seed, so rerunning the same
experiment yields byte-identical files (output location and worker count
are deliberately left out of the echoed configuration).
"""

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import (
    build_test_unit,
    build_training_unit,
    load_manifest,
    random_dictionary,
    synthetic_instance,
)
from .errors import InvalidInputError, NumericError
from .model import build_dictionary, classify
from .solvers import SolverConfig

REPORT_FORMATS = ("csv", "json", "text-table")


@dataclass
class SyntheticProtocol:
    """Synthetic classification protocol: one fresh dictionary per run and
    ``units_per_class`` ground-truth test units per class."""

    d: int = 100
    classes: int = 7
    atoms_per_class: int = 10
    tau: int = 8
    coeff_sparsity: float = 0.3
    neutral_scale: float = 1.0
    noise_sigma: float = 0.0
    units_per_class: int = 2

    def __post_init__(self):
        if min(self.d, self.classes, self.atoms_per_class, self.tau,
               self.units_per_class) < 1:
            raise InvalidInputError("all synthetic protocol sizes must be >= 1")
        if not 0.0 < self.coeff_sparsity <= 1.0:
            raise InvalidInputError("coeff_sparsity must be in (0, 1]")
        if self.neutral_scale < 0 or self.noise_sigma < 0:
            raise InvalidInputError("neutral_scale and noise_sigma must be >= 0")


@dataclass
class ExperimentConfig:
    """Full description of an experiment.

    Exactly one of ``synthetic`` or ``dataset`` (a manifest path) must be
    set. Dataset runs draw ``train_per_class`` + ``test_per_class`` videos
    per class without replacement each repeat.
    """

    solver: SolverConfig = field(default_factory=SolverConfig)
    repeats: int = 1
    seed: int = 0
    synthetic: SyntheticProtocol | None = None
    dataset: str | None = None
    train_per_class: int = 10
    test_per_class: int = 5
    tau_trn: int = 8
    tau_tst: int = 8
    train_mode: str = "neutral-subtract"
    test_mode: str = "first-plus-last"
    normalization: str = "unit-l2-columns"
    workers: int = 1
    exclude_diverged: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise InvalidInputError("repeats must be >= 1")
        if (self.synthetic is None) == (self.dataset is None):
            raise InvalidInputError("set exactly one of 'synthetic' or 'dataset'")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")
        if min(self.train_per_class, self.test_per_class, self.tau_trn, self.tau_tst) < 1:
            raise InvalidInputError("split sizes and tau values must be >= 1")

    @classmethod
    def from_dict(cls, doc):
        """Build a configuration from a plain JSON-style dict."""
        doc = dict(doc)
        solver = doc.pop("solver", None)
        synthetic = doc.pop("synthetic", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidInputError(f"unknown experiment config keys: {sorted(unknown)}")
        try:
            return cls(
                solver=SolverConfig(**solver) if solver else SolverConfig(),
                synthetic=SyntheticProtocol(**synthetic) if synthetic else None,
                **doc,
            )
        except TypeError as exc:
            raise InvalidInputError(f"bad experiment config: {exc}") from exc

    def echo(self):
        """Configuration as emitted in reports.

        Output path and worker count are excluded so that artifacts do not
        depend on where or how parallel the run was.
        """
        doc = dataclasses.asdict(self)
        doc.pop("output")
        doc.pop("workers")
        return doc


@dataclass
class ExperimentReport:
    """Aggregated results of :func:`run_experiment`."""

    class_labels: list
    counts: np.ndarray
    confusion: np.ndarray
    sensitivity: np.ndarray
    accuracy_mean: float
    accuracy_std: float
    class_avg_accuracy_mean: float
    class_avg_accuracy_std: float
    runs: list
    diverged_units: int
    config: dict

    def as_dict(self):
        return {
            "class_labels": list(self.class_labels),
            "counts": self.counts.tolist(),
            "confusion": self.confusion.tolist(),
            "sensitivity": self.sensitivity.tolist(),
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "class_avg_accuracy_mean": self.class_avg_accuracy_mean,
            "class_avg_accuracy_std": self.class_avg_accuracy_std,
            "runs": self.runs,
            "diverged_units": self.diverged_units,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            class_labels=doc["class_labels"],
            counts=np.asarray(doc["counts"], dtype=float),
            confusion=np.asarray(doc["confusion"], dtype=float),
            sensitivity=np.asarray(doc["sensitivity"], dtype=float),
            accuracy_mean=doc["accuracy_mean"],
            accuracy_std=doc["accuracy_std"],
            class_avg_accuracy_mean=doc["class_avg_accuracy_mean"],
            class_avg_accuracy_std=doc["class_avg_accuracy_std"],
            runs=doc["runs"],
            diverged_units=doc["diverged_units"],
            config=doc["config"],
        )


def _dataset_units(videos_by_label, labels, cfg, rng):
    """One split: dictionary training units and labelled test units."""
    train_units, test_units = [], []
    for label in labels:
        videos = videos_by_label[label]
        order = rng.permutation(len(videos))
        for i in order[: cfg.train_per_class]:
            v = videos[i]
            train_units.append(
                (build_training_unit(v, cfg.tau_trn, cfg.train_mode), label, v.source_id)
            )
        for i in order[cfg.train_per_class: cfg.train_per_class + cfg.test_per_class]:
            v = videos[i]
            test_units.append((build_test_unit(v, cfg.tau_tst, cfg.test_mode), label))
    dictionary = build_dictionary(train_units, normalization=cfg.normalization)
    return dictionary, test_units


def _synthetic_units(cfg, rng):
    """One synthetic run: a fresh dictionary and drawn test units."""
    proto = cfg.synthetic
    dictionary = random_dictionary(proto.d, proto.classes, proto.atoms_per_class, rng)
    test_units = []
    for label in range(proto.classes):
        for _ in range(proto.units_per_class):
            y, _, _ = synthetic_instance(
                dictionary, label, proto.coeff_sparsity,
                proto.neutral_scale, proto.noise_sigma, proto.tau, rng,
            )
            test_units.append((y, label))
    return dictionary, test_units


def _classify_units(dictionary, test_units, cfg):
    """Predicted label (or None on numeric failure) for every test unit."""

    def one(unit):
        y, _ = unit
        try:
            return classify(y, dictionary, cfg.solver).predicted
        except NumericError:
            return None

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(one, test_units))
    return [one(u) for u in test_units]


def run_experiment(cfg):
    """Run ``cfg.repeats`` seeded splits and aggregate a report.

    Per repeat: derive the split (or synthetic draw) from a recorded
    per-run seed, build the dictionary, classify every test unit, and
    accumulate the confusion counts. Units whose solve diverges are counted
    as errors in the per-run accuracy unless ``cfg.exclude_diverged`` is
    set; they never enter the confusion counts.
    """
    videos_by_label = None
    if cfg.dataset is not None:
        videos = load_manifest(cfg.dataset)
        videos_by_label = {}
        for v in videos:
            videos_by_label.setdefault(v.label, []).append(v)
        labels = sorted(videos_by_label)
        needed = cfg.train_per_class + cfg.test_per_class
        for label in labels:
            have = len(videos_by_label[label])
            if have < needed:
                raise InvalidInputError(
                    f"class {label!r} has {have} videos, split needs {needed}"
                )
    else:
        labels = list(range(cfg.synthetic.classes))

    k = len(labels)
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((k, k), dtype=np.int64)
    runs = []
    diverged_total = 0

    master = np.random.default_rng(cfg.seed)
    run_seeds = [int(s) for s in master.integers(0, 2**63 - 1, size=cfg.repeats)]

    for run_id, run_seed in enumerate(run_seeds):
        rng = np.random.default_rng(run_seed)
        if cfg.dataset is not None:
            dictionary, test_units = _dataset_units(videos_by_label, labels, cfg, rng)
        else:
            dictionary, test_units = _synthetic_units(cfg, rng)

        predictions = _classify_units(dictionary, test_units, cfg)

        run_counts = np.zeros((k, k), dtype=np.int64)
        diverged = 0
        for (_, truth), pred in zip(test_units, predictions):
            if pred is None:
                diverged += 1
                continue
            run_counts[index[truth], index[pred]] += 1
        counts += run_counts
        diverged_total += diverged

        correct = int(np.trace(run_counts))
        total = len(test_units) - (diverged if cfg.exclude_diverged else 0)
        accuracy = correct / total if total else 0.0
        row_sums = run_counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            per_class = np.where(row_sums > 0, np.diag(run_counts) / row_sums, np.nan)
        class_avg = float(np.nanmean(per_class)) if np.any(row_sums > 0) else 0.0
        runs.append(
            {
                "run": run_id,
                "seed": run_seed,
                "accuracy": accuracy,
                "class_avg_accuracy": class_avg,
                "diverged": diverged,
            }
        )

    confusion = counts.astype(float)
    row_sums = confusion.sum(axis=1, keepdims=True)
    np.divide(confusion, row_sums, out=confusion, where=row_sums > 0)
    sensitivity = np.diag(confusion).copy()

    acc = np.array([r["accuracy"] for r in runs])
    cls = np.array([r["class_avg_accuracy"] for r in runs])
    ddof = 1 if len(runs) > 1 else 0
    return ExperimentReport(
        class_labels=labels,
        counts=counts,
        confusion=confusion,
        sensitivity=sensitivity,
        accuracy_mean=float(acc.mean()),
        accuracy_std=float(acc.std(ddof=ddof)),
        class_avg_accuracy_mean=float(cls.mean()),
        class_avg_accuracy_std=float(cls.std(ddof=ddof)),
        runs=runs,
        diverged_units=diverged_total,
        config=cfg.echo(),
    )


def _write_labelled_matrix(path, labels, matrix, corner):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([corner] + [str(l) for l in labels]) + "\n")
        for label, row in zip(labels, np.atleast_2d(matrix)):
            fh.write(",".join([str(label)] + [repr(float(v)) for v in row]) + "\n")


def read_confusion_csv(path):
    """Parse a confusion/sensitivity CSV back into ``(labels, matrix)``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    labels = lines[0].split(",")[1:]
    rows = [[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]]
    return labels, np.asarray(rows, dtype=float)


def _text_table(report):
    labels = [str(l) for l in report.class_labels]
    width = max(6, max(len(l) for l in labels) + 1)
    lines = ["Confusion matrix (rows = ground truth, columns = predictions)"]
    lines.append(" " * width + "".join(f"{l:>{width}}" for l in labels))
    for label, row in zip(labels, report.confusion):
        lines.append(f"{label:<{width}}" + "".join(f"{v:>{width}.2f}" for v in row))
    lines.append("")
    lines.append("Sensitivity (per-class true positive rate)")
    for label, v in zip(labels, report.sensitivity):
        lines.append(f"{label:<{width}}{v:>{width}.2f}")
    lines.append("")
    lines.append(
        f"Accuracy (per-unit): {report.accuracy_mean:.4f} "
        f"(std {report.accuracy_std:.4f} over {len(report.runs)} runs)"
    )
    lines.append(
        f"Accuracy (class-averaged): {report.class_avg_accuracy_mean:.4f} "
        f"(std {report.class_avg_accuracy_std:.4f})"
    )
    lines.append(f"Diverged units: {report.diverged_units}")
    return "\n".join(lines) + "\n"


def emit_report(report, format="json", output="."):
    """Write report files in the given format; returns the written paths.

    ``"json"`` writes ``report.json`` (complete, re-renderable);
    ``"csv"`` writes confusion/counts/sensitivity/runs/summary CSVs;
    ``"text-table"`` writes ``report.txt`` with the confusion matrix laid
    out rows-as-truth, columns-as-predictions.
    """
    if format not in REPORT_FORMATS:
        raise InvalidInputError(f"format must be one of {REPORT_FORMATS}, got {format!r}")
    os.makedirs(output, exist_ok=True)
    paths = []

    def out(name):
        paths.append(os.path.join(output, name))
        return paths[-1]

    if format == "json":
        with open(out("report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        labels = report.class_labels
        _write_labelled_matrix(out("confusion.csv"), labels, report.confusion, "truth\\pred")
        _write_labelled_matrix(out("counts.csv"), labels, report.counts, "truth\\pred")
        with open(out("sensitivity.csv"), "w", encoding="utf-8") as fh:
            fh.write("class,sensitivity\n")
            for label, v in zip(labels, report.sensitivity):
                fh.write(f"{label},{float(v)!r}\n")
        with open(out("runs.csv"), "w", encoding="utf-8") as fh:
            fh.write("run,seed,accuracy,class_avg_accuracy,diverged\n")
            for r in report.runs:
                fh.write(
                    f"{r['run']},{r['seed']},{r['accuracy']!r},"
                    f"{r['class_avg_accuracy']!r},{r['diverged']}\n"
                )
        with open(out("summary.csv"), "w", encoding="utf-8") as fh:
            fh.write("metric,value\n")
            fh.write(f"accuracy_mean,{report.accuracy_mean!r}\n")
            fh.write(f"accuracy_std,{report.accuracy_std!r}\n")
            fh.write(f"class_avg_accuracy_mean,{report.class_avg_accuracy_mean!r}\n")
            fh.write(f"class_avg_accuracy_std,{report.class_avg_accuracy_std!r}\n")
            fh.write(f"diverged_units,{report.diverged_units}\n")
    else:
        with open(out("report.txt"), "w", encoding="utf-8") as fh:
            fh.write(_text_table(report))
    return paths


def load_report(path):
    """Read back a ``report.json`` written by :func:`emit_report`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return ExperimentReport.from_dict(json.load(fh))
    except OSError as exc:
        raise InvalidInputError(f"{path}: cannot read report ({exc})") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise InvalidInputError(f"{path}: not a report file ({exc})") from exc
