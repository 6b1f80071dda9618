"""File formats and label conversions.

Binary `.eatr` cube container (32-byte header + raw little-endian payload),
annotation/prediction CSVs, fold plans, and the interval<->frame-label
bridge. All formats are little-endian and row-major with the last dimension
fastest, so files round-trip bit-exactly across platforms.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

OTHER, EATING, DRINKING = 0, 1, 2
CLASS_NAMES = {OTHER: "other", EATING: "eating", DRINKING: "drinking"}
LABEL_IDS = {"eating": EATING, "drinking": DRINKING}

MAGIC = b"EATR"
FORMAT_VERSION = 1
# magic, version, kind, scalar, ndims, dims[4], fps
_HEADER = struct.Struct("<4sHBBI4If")
HEADER_SIZE = _HEADER.size
assert HEADER_SIZE == 32


class FormatError(ValueError):
    """Malformed or inconsistent on-disk data."""


class CubeKind(IntEnum):
    RAW_COMPLEX = 0
    RD_REAL = 1
    DT_REAL = 2


class ScalarType(IntEnum):
    COMPLEX64 = 0
    FLOAT32 = 1


_SCALAR_DTYPE = {ScalarType.COMPLEX64: np.dtype("<c8"), ScalarType.FLOAT32: np.dtype("<f4")}
_KIND_SCALAR = {
    CubeKind.RAW_COMPLEX: ScalarType.COMPLEX64,
    CubeKind.RD_REAL: ScalarType.FLOAT32,
    CubeKind.DT_REAL: ScalarType.FLOAT32,
}


@dataclass(frozen=True)
class CubeHeader:
    kind: CubeKind
    dims: tuple[int, ...]
    fps: float
    scalar: ScalarType
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if not 1 <= len(self.dims) <= 4:
            raise FormatError(f"cube must have 1-4 dims, got {len(self.dims)}")
        if any(d <= 0 for d in self.dims):
            raise FormatError(f"cube dims must be nonzero, got {self.dims}")
        if _KIND_SCALAR[CubeKind(self.kind)] != ScalarType(self.scalar):
            raise FormatError(f"kind {CubeKind(self.kind).name} incompatible with scalar "
                              f"{ScalarType(self.scalar).name}")

    @property
    def dtype(self) -> np.dtype:
        return _SCALAR_DTYPE[ScalarType(self.scalar)]

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.dims))


def make_header(kind: CubeKind, dims: tuple[int, ...], fps: float) -> CubeHeader:
    return CubeHeader(kind=kind, dims=tuple(int(d) for d in dims), fps=float(fps),
                      scalar=_KIND_SCALAR[kind])


def write_cube(path, header: CubeHeader, payload: np.ndarray) -> None:
    """Write header + payload. Payload must match the declared dims and scalar."""
    payload = np.asarray(payload)
    if payload.shape != tuple(header.dims):
        raise FormatError(f"payload shape {payload.shape} does not match header dims {header.dims}")
    if payload.dtype != header.dtype:
        if np.iscomplexobj(payload) and header.scalar == ScalarType.FLOAT32:
            raise FormatError(f"complex payload not allowed for kind {CubeKind(header.kind).name}")
        payload = payload.astype(header.dtype)
    dims4 = tuple(header.dims) + (0,) * (4 - len(header.dims))
    blob = _HEADER.pack(MAGIC, header.version, int(header.kind), int(header.scalar),
                        len(header.dims), *dims4, header.fps)
    with open(path, "wb") as fh:
        fh.write(blob)
        fh.write(np.ascontiguousarray(payload).tobytes(order="C"))


def read_cube(path) -> tuple[CubeHeader, np.ndarray]:
    """Inverse of write_cube; bit-exact round trip."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_SIZE)
        if len(head) < HEADER_SIZE:
            raise FormatError(f"{path}: file shorter than header")
        magic, version, kind, scalar, ndims, d0, d1, d2, d3, fps = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if not 1 <= ndims <= 4:
            raise FormatError(f"{path}: bad ndims {ndims}")
        try:
            header = CubeHeader(kind=CubeKind(kind), dims=(d0, d1, d2, d3)[:ndims],
                                fps=fps, scalar=ScalarType(scalar), version=version)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        raw = fh.read(header.n_elements * header.dtype.itemsize + 1)
    if len(raw) != header.n_elements * header.dtype.itemsize:
        raise FormatError(f"{path}: payload truncated or trailing bytes "
                          f"(expected {header.n_elements * header.dtype.itemsize} bytes, "
                          f"got {len(raw)})")
    payload = np.frombuffer(raw, dtype=header.dtype).reshape(header.dims)
    return header, payload


@dataclass(frozen=True)
class Interval:
    """Annotated gesture interval in seconds, half-open [start_s, end_s)."""
    start_s: float
    end_s: float
    label: int  # EATING or DRINKING

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise FormatError(f"interval start {self.start_s} must precede end {self.end_s}")
        if self.label not in (EATING, DRINKING):
            raise FormatError(f"interval label must be eating/drinking, got {self.label}")


def validate_track(intervals: list[Interval]) -> list[Interval]:
    """Sort by start and reject overlapping entries (touching is allowed)."""
    track = sorted(intervals, key=lambda iv: iv.start_s)
    for prev, cur in zip(track, track[1:]):
        if cur.start_s < prev.end_s:
            raise FormatError(f"intervals overlap: [{prev.start_s},{prev.end_s}) and "
                              f"[{cur.start_s},{cur.end_s})")
    return track


def read_annotations(path) -> list[Interval]:
    """CSV with header `start_s,end_s,label`; labels are eating/drinking."""
    track = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["start_s", "end_s", "label"]:
            raise FormatError(f"{path}: expected header start_s,end_s,label")
        for row in reader:
            name = row["label"].strip()
            if name not in LABEL_IDS:
                raise FormatError(f"{path}: unknown label {name!r}")
            track.append(Interval(float(row["start_s"]), float(row["end_s"]), LABEL_IDS[name]))
    return validate_track(track)


def write_annotations(path, intervals: list[Interval]) -> None:
    track = validate_track(list(intervals))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "end_s", "label"])
        for iv in track:
            writer.writerow([f"{iv.start_s:.6f}", f"{iv.end_s:.6f}", CLASS_NAMES[iv.label]])


def intervals_to_frame_labels(intervals: list[Interval], n_frames: int, fps: float) -> np.ndarray:
    """Frame t takes an interval's class iff the frame-center time (t+0.5)/fps lies in it."""
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    centers = (np.arange(int(n_frames)) + 0.5) / fps
    labels = np.zeros(int(n_frames), dtype=np.int64)
    for iv in validate_track(list(intervals)):
        labels[(centers >= iv.start_s) & (centers < iv.end_s)] = iv.label
    return labels


@dataclass(frozen=True, order=True)
class Segment:
    """Maximal run of one gesture class, in frames, half-open [start, end)."""
    label: int
    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"segment start {self.start} must precede end {self.end}")

    def __len__(self) -> int:
        return self.end - self.start


def frame_labels_to_segments(labels: np.ndarray) -> list[Segment]:
    """Run-length encode the gesture classes; class-0 runs produce nothing."""
    labels = np.asarray(labels)
    if labels.size and not np.isin(labels, (OTHER, EATING, DRINKING)).all():
        raise ValueError("labels must be in {0,1,2}")
    segments = []
    boundaries = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [labels.size]))
    for s, e in zip(starts, ends):
        if labels.size and labels[s] != OTHER:
            segments.append(Segment(int(labels[s]), int(s), int(e)))
    return segments


def write_predictions(path, labels: np.ndarray) -> None:
    """CSV `frame,label_id`, one row per frame starting at 0."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "label_id"])
        for t, lab in enumerate(np.asarray(labels)):
            writer.writerow([t, int(lab)])


def read_predictions(path) -> np.ndarray:
    labels = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["frame", "label_id"]:
            raise FormatError(f"{path}: expected header frame,label_id")
        for t, row in enumerate(reader):
            if int(row["frame"]) != t:
                raise FormatError(f"{path}: frames must be consecutive from 0, got {row['frame']} at row {t}")
            lab = int(row["label_id"])
            if lab not in (OTHER, EATING, DRINKING):
                raise FormatError(f"{path}: label_id must be in 0..2, got {lab}")
            labels.append(lab)
    return np.asarray(labels, dtype=np.int64)


@dataclass(frozen=True)
class Fold:
    test: tuple[str, ...]
    val: tuple[str, ...]
    train: tuple[str, ...]


def make_folds(meal_ids: list[str], n_folds: int, val_size: int, seed: int) -> list[Fold]:
    """Meal-level split: every meal tested exactly once; roles disjoint per fold."""
    meal_ids = [str(m) for m in meal_ids]
    if len(set(meal_ids)) != len(meal_ids):
        raise ValueError("meal ids must be unique")
    if n_folds <= 0 or len(meal_ids) % n_folds != 0:
        raise ValueError(f"{n_folds} folds do not divide {len(meal_ids)} meals")
    test_size = len(meal_ids) // n_folds
    if val_size < 0 or val_size > len(meal_ids) - test_size:
        raise ValueError(f"val_size {val_size} exceeds meals left after the test split")
    rng = np.random.default_rng(seed)
    order = [meal_ids[i] for i in rng.permutation(len(meal_ids))]
    folds = []
    for i in range(n_folds):
        test = order[i * test_size:(i + 1) * test_size]
        rest = [m for m in order if m not in test]
        rest = [rest[j] for j in np.random.default_rng([seed, i]).permutation(len(rest))]
        folds.append(Fold(tuple(test), tuple(rest[:val_size]), tuple(rest[val_size:])))
    return folds


def save_folds(path, folds: list[Fold]) -> None:
    doc = {"folds": [{"test": list(f.test), "val": list(f.val), "train": list(f.train)}
                     for f in folds]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_folds(path) -> list[Fold]:
    doc = json.loads(Path(path).read_text())
    try:
        return [Fold(tuple(f["test"]), tuple(f["val"]), tuple(f["train"])) for f in doc["folds"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed fold plan") from exc
