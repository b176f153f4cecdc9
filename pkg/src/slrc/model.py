"""Dictionary construction and minimal-residual classification.

A test signal matrix ``Y`` is decomposed against a dictionary of training
atoms; the per-class residual keeps only that class's atoms in the sparse
part while the shared low-rank part is always subtracted:

    r_c = || Y - D[:, G_c] X[G_c] - L ||_F

and the predicted class is the one with minimal residual, ties broken by
the smallest class position in the dictionary's group order.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .groups import GroupPartition
from .solvers import admm_solve

NORMALIZATIONS = ("none", "unit-l2-columns")

DICTIONARY_FORMAT = "slrc-dictionary"
DICTIONARY_VERSION = 1


@dataclass(frozen=True)
class AtomSource:
    """Provenance of one atom: class label, source unit id, frame index."""

    label: object
    source_id: str
    frame: int


class Dictionary:
    """Atom matrix plus the class partition of its columns.

    Parameters
    ----------
    atoms : (d, n) array
        One column per atom. No column may be all zero.
    partition : GroupPartition
        Class grouping of the columns; group labels are the class labels.
    normalization : {"none", "unit-l2-columns"}
        Whether columns were scaled to unit l2 norm.
    provenance : list of AtomSource, optional
        One record per atom.
    """

    def __init__(self, atoms, partition, normalization="none", provenance=None):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 2:
            raise InvalidInputError("atoms must be a 2-d array")
        if normalization not in NORMALIZATIONS:
            raise InvalidInputError(
                f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}"
            )
        if partition.n != atoms.shape[1]:
            raise InvalidInputError(
                f"partition covers {partition.n} atoms but the matrix has {atoms.shape[1]}"
            )
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(norms == 0.0):
            zero = int(np.flatnonzero(norms == 0.0)[0])
            raise InvalidInputError(f"atom column {zero} is all zero")
        if normalization == "unit-l2-columns" and np.any(np.abs(norms - 1.0) > 1e-9):
            raise InvalidInputError("columns are not unit normalized")
        if provenance is not None and len(provenance) != atoms.shape[1]:
            raise InvalidInputError("need exactly one provenance record per atom")
        self.atoms = atoms
        self.partition = partition
        self.normalization = normalization
        self.provenance = provenance

    @property
    def d(self):
        return self.atoms.shape[0]

    @property
    def n(self):
        return self.atoms.shape[1]

    @property
    def labels(self):
        return self.partition.labels

    def class_atoms(self, label):
        """Columns belonging to ``label``."""
        return self.atoms[:, self.partition.indices_of(label)]

    def save(self, path):
        """Write the dictionary to ``path``.

        Format: one line of UTF-8 JSON (keys ``format``, ``version``, ``d``,
        ``n``, ``group_sizes``, ``class_labels``, ``normalization``,
        ``provenance``), a newline, then ``d*n`` little-endian float64 atom
        values in column-major order. The float payload round-trips
        bit-exactly.
        """
        header = {
            "format": DICTIONARY_FORMAT,
            "version": DICTIONARY_VERSION,
            "d": self.d,
            "n": self.n,
            "group_sizes": self.partition.sizes,
            "class_labels": list(self.partition.labels),
            "normalization": self.normalization,
            "provenance": None
            if self.provenance is None
            else [[p.label, p.source_id, p.frame] for p in self.provenance],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
            fh.write(b"\n")
            fh.write(self.atoms.astype("<f8").tobytes(order="F"))

    @classmethod
    def load(cls, path):
        """Read a dictionary written by :meth:`save`."""
        with open(path, "rb") as fh:
            header_line = fh.readline()
            payload = fh.read()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"{path}: not a dictionary file ({exc})") from exc
        if header.get("format") != DICTIONARY_FORMAT:
            raise InvalidInputError(f"{path}: not a dictionary file")
        if header.get("version") != DICTIONARY_VERSION:
            raise InvalidInputError(f"{path}: unsupported version {header.get('version')}")
        d, n = int(header["d"]), int(header["n"])
        expected = d * n * 8
        if len(payload) != expected:
            raise InvalidInputError(
                f"{path}: expected {expected} payload bytes, found {len(payload)}"
            )
        atoms = np.frombuffer(payload, dtype="<f8").reshape((d, n), order="F")
        partition = GroupPartition.from_sizes(header["group_sizes"], header["class_labels"])
        prov = header.get("provenance")
        provenance = None
        if prov is not None:
            provenance = [AtomSource(p[0], p[1], int(p[2])) for p in prov]
        return cls(
            np.array(atoms),  # own the memory; frombuffer is read-only
            partition,
            normalization=header["normalization"],
            provenance=provenance,
        )


def build_dictionary(units, normalization="unit-l2-columns"):
    """Assemble a dictionary from labelled training units.

    Parameters
    ----------
    units : sequence of (matrix, label) or (matrix, label, source_id)
        Each matrix contributes its columns as atoms of the given class.
    normalization : {"none", "unit-l2-columns"}
        Applied last. Unit normalization follows common sparse-classifier
        practice; ``"none"`` keeps raw magnitudes.

    Atoms are grouped by class with classes in ascending label order; within
    a class the order is (unit order, frame order). Raises on inconsistent
    row dimensions, empty input, or all-zero atoms.
    """
    if normalization not in NORMALIZATIONS:
        raise InvalidInputError(
            f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}"
        )
    prepared = []
    for entry in units:
        if len(entry) == 2:
            matrix, label = entry
            source_id = ""
        else:
            matrix, label, source_id = entry
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] == 0:
            raise InvalidInputError("every training unit must be a non-empty 2-d matrix")
        prepared.append((matrix, label, str(source_id)))
    if not prepared:
        raise InvalidInputError("no training units given")
    d = prepared[0][0].shape[0]
    for matrix, label, _ in prepared:
        if matrix.shape[0] != d:
            raise InvalidInputError(
                f"unit for class {label!r} has {matrix.shape[0]} rows, expected {d}"
            )

    class_labels = sorted({label for _, label, _ in prepared})
    blocks, sizes, provenance = [], [], []
    for label in class_labels:
        count = 0
        for matrix, unit_label, source_id in prepared:
            if unit_label != label:
                continue
            blocks.append(matrix)
            count += matrix.shape[1]
            provenance.extend(
                AtomSource(label, source_id, frame) for frame in range(matrix.shape[1])
            )
        sizes.append(count)

    atoms = np.concatenate(blocks, axis=1)
    norms = np.linalg.norm(atoms, axis=0)
    if np.any(norms == 0.0):
        zero = int(np.flatnonzero(norms == 0.0)[0])
        src = provenance[zero]
        raise InvalidInputError(
            f"atom {zero} (class {src.label!r}, unit {src.source_id!r}, "
            f"frame {src.frame}) is all zero"
        )
    if normalization == "unit-l2-columns":
        atoms = atoms / norms

    partition = GroupPartition.from_sizes(sizes, class_labels)
    return Dictionary(atoms, partition, normalization=normalization, provenance=provenance)


@dataclass
class ClassificationResult:
    """Per-class residuals, the argmin prediction, and the runner-up margin."""

    residuals: np.ndarray
    labels: list
    predicted: object
    margin: float
    decomposition: object

    def as_dict(self):
        return {
            "predicted": self.predicted,
            "margin": None if not np.isfinite(self.margin) else float(self.margin),
            "residuals": {
                str(label): float(r) for label, r in zip(self.labels, self.residuals)
            },
        }


def class_residuals(y, dictionary, decomposition):
    """Residual ``||Y - D[:, G_c] X[G_c] - L||_F`` for every class ``c``.

    Pure recomputation from a stored decomposition; no solve involved.
    """
    y = np.asarray(y, dtype=float)
    x, low = decomposition.X, decomposition.L
    if x.shape != (dictionary.n, y.shape[1]) or low.shape != y.shape:
        raise InvalidInputError("decomposition shapes do not match the signal/dictionary")
    base = y - low
    out = np.empty(len(dictionary.labels))
    for i, g in enumerate(dictionary.partition.groups):
        out[i] = np.linalg.norm(base - dictionary.atoms[:, g] @ x[g])
    return out


def classify(y, dictionary, cfg, log_iterates=False):
    """Decompose ``y`` against ``dictionary`` and pick the minimal-residual class.

    Ties go to the class earliest in the dictionary's group order. Solver
    failures propagate.
    """
    dec = admm_solve(y, dictionary, cfg, log_iterates=log_iterates)
    residuals = class_residuals(y, dictionary, dec)
    best = int(np.argmin(residuals))
    if residuals.size > 1:
        margin = float(np.partition(residuals, 1)[1] - residuals[best])
    else:
        margin = float("inf")
    return ClassificationResult(
        residuals=residuals,
        labels=list(dictionary.labels),
        predicted=dictionary.labels[best],
        margin=margin,
        decomposition=dec,
    )
