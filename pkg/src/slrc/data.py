"""Frame-sequence ingestion, train/test unit assembly, and the synthetic
ground-truth generator used for verification.

File interfaces:

* image frames: 8-bit grayscale images (binary PGM), one file per frame,
  lexicographic filename order unless a manifest lists frames explicitly;
* matrices: CSV of reals, rows are feature dimensions, columns are
  frames/atoms, with an optional first line ``d,tau``;
* datasets: a JSON manifest listing classes, each with video directories
  and an optional explicit frame order.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InvalidInputError
from .groups import GroupPartition
from .model import Dictionary

TEST_UNIT_MODES = ("first-plus-last", "raw-window")
TRAIN_UNIT_MODES = ("neutral-subtract", "raw")


@dataclass
class VideoSequence:
    """An ordered stack of frames with a class label.

    ``frames`` is ``(d, n_frames)`` with intensities scaled to [0, 1].
    """

    frames: np.ndarray
    label: object = None
    source_id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2:
            raise InvalidInputError("frames must be a 2-d (d, n_frames) array")
        if frames.shape[1] < 2:
            raise InvalidInputError("a video needs at least 2 frames")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise InvalidInputError("frame values must lie in [0, 1]")
        self.frames = frames

    @property
    def d(self):
        return self.frames.shape[0]

    @property
    def n_frames(self):
        return self.frames.shape[1]


def build_test_unit(video, tau_tst, mode="first-plus-last"):
    """Assemble the signal matrix a classifier sees for one test video.

    ``"first-plus-last"`` stacks the first frame followed by the last
    ``tau_tst - 1`` frames in order (the first frame is not treated as a
    known neutral state, it is simply one more column). ``"raw-window"``
    takes the first ``tau_tst`` frames verbatim, for sequences that are
    already trimmed windows.
    """
    if mode not in TEST_UNIT_MODES:
        raise InvalidInputError(f"mode must be one of {TEST_UNIT_MODES}, got {mode!r}")
    tau_tst = int(tau_tst)
    if tau_tst < 1:
        raise InvalidInputError("tau_tst must be >= 1")
    m = video.n_frames
    if m < tau_tst:
        raise InvalidInputError(f"video has {m} frames, needs at least {tau_tst}")
    if mode == "first-plus-last":
        cols = [0] + list(range(m - (tau_tst - 1), m))
        return video.frames[:, cols].copy()
    return video.frames[:, :tau_tst].copy()


def build_training_unit(video, tau_trn, mode="neutral-subtract"):
    """Assemble one training unit (the atoms one video contributes).

    ``"neutral-subtract"`` takes the last ``tau_trn`` frames and subtracts
    the first frame from each, leaving motion components; it needs at least
    ``tau_trn + 1`` frames so the first frame stays outside the window.
    ``"raw"`` takes the last ``tau_trn`` frames verbatim.
    """
    if mode not in TRAIN_UNIT_MODES:
        raise InvalidInputError(f"mode must be one of {TRAIN_UNIT_MODES}, got {mode!r}")
    tau_trn = int(tau_trn)
    if tau_trn < 1:
        raise InvalidInputError("tau_trn must be >= 1")
    m = video.n_frames
    if mode == "neutral-subtract":
        if m < tau_trn + 1:
            raise InvalidInputError(
                f"video has {m} frames, neutral-subtract needs at least {tau_trn + 1}"
            )
        return video.frames[:, m - tau_trn:] - video.frames[:, :1]
    if m < tau_trn:
        raise InvalidInputError(f"video has {m} frames, needs at least {tau_trn}")
    return video.frames[:, m - tau_trn:].copy()


def equispaced_subvideos(video, count, per):
    """Split ``video`` into ``count`` disjoint sub-videos of ``per`` frames.

    Sub-video ``j`` samples frames ``j, j+count, j+2*count, ...`` so each
    sub-video is equally spaced with stride ``count``, spans the whole
    sequence, and the index sets are pairwise disjoint.
    """
    count, per = int(count), int(per)
    if count < 1 or per < 1:
        raise InvalidInputError("count and per must be >= 1")
    if video.n_frames < count * per:
        raise InvalidInputError(
            f"video has {video.n_frames} frames, needs at least {count * per}"
        )
    subs = []
    for j in range(count):
        idx = j + count * np.arange(per)
        subs.append(
            VideoSequence(
                frames=video.frames[:, idx].copy(),
                label=video.label,
                source_id=f"{video.source_id}#{j}" if video.source_id else f"#{j}",
            )
        )
    return subs


def _load_frame(path):
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise InvalidInputError(
                    f"{path}: unsupported image mode {img.mode!r}, need 8-bit grayscale"
                )
            return np.asarray(img, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise InvalidInputError(f"{path}: cannot read image ({exc})") from exc


def load_image_sequence(directory, label=None, source_id=None, frame_files=None):
    """Load a directory of equal-size 8-bit grayscale frames as a video.

    Frames are taken in lexicographic filename order unless ``frame_files``
    lists them explicitly. Each image is flattened row-major and scaled by
    1/255.
    """
    directory = os.fspath(directory)
    if frame_files is None:
        try:
            names = sorted(
                f for f in os.listdir(directory)
                if not f.startswith(".") and os.path.isfile(os.path.join(directory, f))
            )
        except OSError as exc:
            raise InvalidInputError(f"{directory}: cannot list directory ({exc})") from exc
    else:
        names = list(frame_files)
    if not names:
        raise InvalidInputError(f"{directory}: no frame files found")

    columns = []
    shape = None
    for name in names:
        path = os.path.join(directory, name)
        pixels = _load_frame(path)
        if shape is None:
            shape = pixels.shape
        elif pixels.shape != shape:
            raise InvalidInputError(
                f"{path}: frame size {pixels.shape} differs from first frame {shape}"
            )
        columns.append(pixels.reshape(-1).astype(float) / 255.0)
    return VideoSequence(
        frames=np.stack(columns, axis=1),
        label=label,
        source_id=source_id if source_id is not None else directory,
    )


def load_manifest(path):
    """Load every video listed in a JSON dataset manifest.

    Schema::

        {"classes": [
            {"label": <label>,
             "videos": [{"path": "dir", "frames": ["f0.pgm", ...]?}, ...]}
        ]}

    Video paths resolve relative to the manifest file. Returns a flat list
    of :class:`VideoSequence`.
    """
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"{path}: cannot read manifest ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "classes" not in doc:
        raise InvalidInputError(f"{path}: manifest must be an object with a 'classes' list")
    base = os.path.dirname(os.path.abspath(path))
    videos = []
    for entry in doc["classes"]:
        label = entry.get("label")
        if label is None:
            raise InvalidInputError(f"{path}: every class needs a 'label'")
        for video in entry.get("videos", []):
            vdir = video["path"]
            if not os.path.isabs(vdir):
                vdir = os.path.join(base, vdir)
            videos.append(
                load_image_sequence(
                    vdir,
                    label=label,
                    source_id=video.get("id", video["path"]),
                    frame_files=video.get("frames"),
                )
            )
    if not videos:
        raise InvalidInputError(f"{path}: manifest lists no videos")
    return videos


def write_matrix_csv(path, matrix, header=True):
    """Write a matrix as CSV (rows = dimensions, columns = frames/atoms).

    With ``header`` the first line is ``d,tau``. Values are written with
    full round-trip precision.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{matrix.shape[0]},{matrix.shape[1]}\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path):
    """Read a matrix written by :func:`write_matrix_csv`.

    The ``d,tau`` header line is optional: a first line of two integers is
    treated as a header only when it matches the shape of the remaining
    rows, otherwise it is data.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise InvalidInputError(f"{path}: cannot read file ({exc})") from exc
    if not lines:
        raise InvalidInputError(f"{path}: empty matrix file")

    def parse(line, lineno):
        try:
            return [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: not a CSV of reals ({exc})") from exc

    first = parse(lines[0], 1)
    body_start = 0
    if len(first) == 2 and all(float(v).is_integer() and v >= 0 for v in first):
        d, tau = int(first[0]), int(first[1])
        rest = lines[1:]
        if len(rest) == d and all(len(ln.split(",")) == tau for ln in rest):
            body_start = 1
    rows = [parse(ln, i + 1 + body_start) for i, ln in enumerate(lines[body_start:])]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidInputError(f"{path}: ragged rows in matrix file")
    return np.asarray(rows, dtype=float)


@dataclass
class SyntheticSpec:
    """Ground-truth instance description for the verification oracle.

    One instance is ``Y = D X* + L* + noise`` where the dictionary ``D``
    has unit-normalized standard-normal atoms in ``classes`` groups of
    ``atoms_per_class``, ``X*`` is supported only on the group of
    ``active_class`` with a ``coeff_sparsity`` fraction of entries drawn
    standard normal, and ``L*`` is a rank-1 repetition of a random neutral
    column of magnitude ``neutral_scale``.
    """

    d: int = 100
    classes: int = 7
    atoms_per_class: int = 10
    tau: int = 8
    active_class: int = 0
    coeff_sparsity: float = 0.3
    neutral_scale: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.d, self.classes, self.atoms_per_class, self.tau) < 1:
            raise InvalidInputError("d, classes, atoms_per_class and tau must be >= 1")
        if not 0.0 < self.coeff_sparsity <= 1.0:
            raise InvalidInputError("coeff_sparsity must be in (0, 1]")
        if not 0 <= self.active_class < self.classes:
            raise InvalidInputError("active_class must be in 0..classes-1")
        if self.neutral_scale < 0 or self.noise_sigma < 0:
            raise InvalidInputError("neutral_scale and noise_sigma must be >= 0")


def random_dictionary(d, classes, atoms_per_class, rng):
    """Unit-column standard-normal dictionary with one group per class."""
    atoms = rng.standard_normal((d, classes * atoms_per_class))
    atoms /= np.linalg.norm(atoms, axis=0)
    partition = GroupPartition.from_sizes(
        [atoms_per_class] * classes, labels=list(range(classes))
    )
    return Dictionary(atoms, partition, normalization="unit-l2-columns")


def synthetic_instance(dictionary, active_class, coeff_sparsity, neutral_scale,
                       noise_sigma, tau, rng):
    """Draw one ground-truth instance against an existing dictionary.

    Returns ``(Y, X_true, L_true)``.
    """
    n = dictionary.n
    group = dictionary.partition.indices_of(active_class)
    x_true = np.zeros((n, tau))
    block = np.zeros(group.size * tau)
    k = max(1, int(round(coeff_sparsity * block.size)))
    support = rng.choice(block.size, size=k, replace=False)
    block[support] = rng.standard_normal(k)
    x_true[group] = block.reshape(group.size, tau)

    direction = rng.standard_normal(dictionary.d)
    direction /= np.linalg.norm(direction)
    l_true = neutral_scale * np.outer(direction, np.ones(tau))

    y = dictionary.atoms @ x_true + l_true
    if noise_sigma > 0.0:
        y = y + noise_sigma * rng.standard_normal(y.shape)
    return y, x_true, l_true


def generate_synthetic(spec):
    """Generate one fully seeded synthetic instance.

    Returns ``(dictionary, Y, X_true, L_true, label)``; identical seeds give
    bitwise identical outputs.
    """
    rng = np.random.default_rng(spec.seed)
    dictionary = random_dictionary(spec.d, spec.classes, spec.atoms_per_class, rng)
    y, x_true, l_true = synthetic_instance(
        dictionary, spec.active_class, spec.coeff_sparsity,
        spec.neutral_scale, spec.noise_sigma, spec.tau, rng,
    )
    return dictionary, y, x_true, l_true, spec.active_class
