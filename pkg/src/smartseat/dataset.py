"""Labeled-dataset plumbing: empty-seat segmentation, CSV persistence,
train/test splitting, and one-hot encoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidLabelError,
    LabelMismatchError,
    ParseError,
    StratificationError,
)
from .postures import EMPTY, POSTURES, class_index
from .sensing import NUM_SENSORS, SensorFrame

CSV_HEADER = "timestamp_ms," + ",".join(f"s{i}" for i in range(1, 11)) + ",label"


@dataclass
class LabeledDataset:
    """Feature rows (10 ADC counts each) with posture labels."""

    features: np.ndarray  # (n, 10) integer counts
    labels: list[str]
    class_names: tuple[str, ...] = POSTURES
    provenance: str = ""
    timestamps_ms: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[1] != NUM_SENSORS:
            raise InvalidInputError(
                f"features must be (n, {NUM_SENSORS}), got {self.features.shape}"
            )
        if len(self.labels) != self.features.shape[0]:
            raise InvalidInputError("label count must match feature rows")
        for lbl in self.labels:
            if lbl not in self.class_names:
                raise InvalidLabelError(f"label {lbl!r} not in class_names")
        if self.timestamps_ms is not None:
            self.timestamps_ms = np.asarray(self.timestamps_ms, dtype=np.int64)
            if self.timestamps_ms.shape[0] != self.features.shape[0]:
                raise InvalidInputError("timestamp count must match feature rows")

    def __len__(self) -> int:
        return self.features.shape[0]

    def label_indices(self) -> np.ndarray:
        lut = {name: i for i, name in enumerate(self.class_names)}
        return np.array([lut[l] for l in self.labels], dtype=np.int64)

    def class_counts(self) -> dict[str, int]:
        out = {name: 0 for name in self.class_names}
        for l in self.labels:
            out[l] += 1
        return out

    def subset(self, idx: np.ndarray, provenance: str | None = None) -> "LabeledDataset":
        return LabeledDataset(
            features=self.features[idx],
            labels=[self.labels[i] for i in idx],
            class_names=self.class_names,
            provenance=provenance if provenance is not None else self.provenance,
            timestamps_ms=None if self.timestamps_ms is None else self.timestamps_ms[idx],
        )

    def equals(self, other: "LabeledDataset") -> bool:
        return (
            np.array_equal(self.features, other.features)
            and self.labels == other.labels
            and self.class_names == other.class_names
        )


def frames_to_dataset(
    frames: Sequence[SensorFrame],
    labels: Sequence[str] | None = None,
    provenance: str = "",
) -> LabeledDataset:
    """Frame stream -> dataset; takes labels from the frames unless given."""
    if labels is None:
        labels = [f.label for f in frames]
        if any(l is None for l in labels):
            raise InvalidInputError("frames carry no labels; pass labels explicitly")
    return LabeledDataset(
        features=np.array([f.counts for f in frames], dtype=np.int64).reshape(-1, NUM_SENSORS),
        labels=list(labels),
        provenance=provenance,
        timestamps_ms=np.array([f.timestamp_ms for f in frames], dtype=np.int64),
    )


def one_hot(label: str, class_names: tuple[str, ...] = POSTURES) -> np.ndarray:
    """Indicator vector for ``label`` over ``class_names``."""
    vec = np.zeros(len(class_names), dtype=np.int64)
    vec[class_index(label, class_names)] = 1
    return vec


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidInputError("train_fraction must be in (0, 1)")


def split_train_test(
    ds: LabeledDataset, spec: SplitSpec = SplitSpec()
) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint train/test split, stratified by default.

    Stratified splitting apportions the train quota over classes by largest
    remainder, keeping every class within one row of the exact fraction and
    the totals exact. Deterministic per seed.
    """
    n = len(ds)
    if n < 2:
        raise InvalidInputError("need at least 2 rows to split")
    rng = np.random.default_rng(spec.seed)
    n_train = int(round(spec.train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)

    if not spec.stratified:
        perm = rng.permutation(n)
        train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    else:
        idx_by_class = [
            np.flatnonzero(np.array([l == name for l in ds.labels]))
            for name in ds.class_names
        ]
        for name, idx in zip(ds.class_names, idx_by_class):
            if 0 < idx.size < 2:
                raise StratificationError(
                    f"class {name!r} has {idx.size} row(s); need at least 2 to stratify"
                )
        targets = np.array([spec.train_fraction * idx.size for idx in idx_by_class])
        base = np.floor(targets).astype(int)
        # Never put a whole class entirely in train or test.
        for i, idx in enumerate(idx_by_class):
            if idx.size:
                base[i] = min(max(base[i], 1), idx.size - 1)
        remaining = n_train - base.sum()
        order = np.argsort(-(targets - np.floor(targets)), kind="stable")
        for i in order:
            if remaining <= 0:
                break
            if idx_by_class[i].size and base[i] < idx_by_class[i].size - 1:
                base[i] += 1
                remaining -= 1
        train_parts, test_parts = [], []
        for idx, quota in zip(idx_by_class, base):
            if idx.size == 0:
                continue
            perm = idx[rng.permutation(idx.size)]
            train_parts.append(perm[:quota])
            test_parts.append(perm[quota:])
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))

    return (
        ds.subset(train_idx, provenance=f"{ds.provenance} [train]"),
        ds.subset(test_idx, provenance=f"{ds.provenance} [test]"),
    )


# ---------------------------------------------------------------------------
# Empty-seat segmentation.


@dataclass(frozen=True)
class Segment:
    start: int  # first frame index
    stop: int  # exclusive
    label: str

    @property
    def n_frames(self) -> int:
        return self.stop - self.start


def segment_by_empty(
    frames: Sequence[SensorFrame],
    posture_order: Sequence[str],
    empty_threshold_kg: float = 1.0,
) -> list[Segment]:
    """Split a stream at empty-seat boundaries and label occupied runs.

    A frame is occupied when its total force reaches ``empty_threshold_kg``.
    Occupied runs receive labels from ``posture_order`` in order; runs below
    the threshold become Empty segments.
    """
    if not frames:
        raise InvalidInputError("frame stream must be non-empty")
    occupied = [f.total_force_kg >= empty_threshold_kg for f in frames]
    segments: list[Segment] = []
    start = 0
    posture_i = 0
    for i in range(1, len(frames) + 1):
        if i == len(frames) or occupied[i] != occupied[start]:
            if occupied[start]:
                if posture_i >= len(posture_order):
                    raise LabelMismatchError(
                        f"detected more occupied segments than the schedule's "
                        f"{len(posture_order)} entries"
                    )
                label = posture_order[posture_i]
                posture_i += 1
            else:
                label = EMPTY
            segments.append(Segment(start=start, stop=i, label=label))
            start = i
    return segments


def frame_labels(
    frames: Sequence[SensorFrame],
    segments: Sequence[Segment],
    trim: int = 1,
) -> list[str]:
    """Per-frame labels from segments.

    The ``trim`` frames next to each occupancy crossing are relabeled Empty
    to keep sit-down/stand-up transition frames out of the posture classes.
    Stream ends are not crossings, so the very first and last frames are
    only trimmed when an adjacent segment exists.
    """
    labels = [EMPTY] * len(frames)
    for seg in segments:
        for i in range(seg.start, seg.stop):
            labels[i] = seg.label
    if trim > 0:
        for seg in segments:
            if seg.label == EMPTY:
                continue
            if seg.start > 0:
                for i in range(seg.start, min(seg.start + trim, seg.stop)):
                    labels[i] = EMPTY
            if seg.stop < len(frames):
                for i in range(max(seg.stop - trim, seg.start), seg.stop):
                    labels[i] = EMPTY
    return labels


def dataset_from_stream(
    frames: Sequence[SensorFrame],
    posture_order: Sequence[str],
    empty_threshold_kg: float = 1.0,
    trim: int = 1,
    provenance: str = "segmented stream",
) -> LabeledDataset:
    segments = segment_by_empty(frames, posture_order, empty_threshold_kg)
    return frames_to_dataset(frames, labels=frame_labels(frames, segments, trim),
                             provenance=provenance)


# ---------------------------------------------------------------------------
# CSV persistence.


def write_csv(ds: LabeledDataset, path) -> None:
    ts = ds.timestamps_ms
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for i in range(len(ds)):
            t = int(ts[i]) if ts is not None else i
            counts = ",".join(str(int(c)) for c in ds.features[i])
            fh.write(f"{t},{counts},{ds.labels[i]}\n")


def read_csv(path, class_names: tuple[str, ...] = POSTURES) -> LabeledDataset:
    """Parse a dataset CSV; raises ParseError with the offending line number."""
    timestamps: list[int] = []
    rows: list[list[int]] = []
    labels: list[str] = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ParseError(f"expected header {CSV_HEADER!r}", line=1)
        for lineno, ln in enumerate(fh, start=2):
            ln = ln.rstrip("\n")
            if not ln:
                continue
            parts = ln.split(",")
            if len(parts) != NUM_SENSORS + 2:
                raise ParseError(
                    f"expected {NUM_SENSORS + 2} columns, got {len(parts)}", line=lineno
                )
            label = parts[-1]
            if label not in class_names:
                raise InvalidLabelError(f"line {lineno}: unknown label {label!r}")
            try:
                timestamps.append(int(parts[0]))
                rows.append([int(v) for v in parts[1:-1]])
            except ValueError:
                raise ParseError("non-integer count value", line=lineno) from None
            labels.append(label)
    return LabeledDataset(
        features=np.array(rows, dtype=np.int64).reshape(-1, NUM_SENSORS),
        labels=labels,
        class_names=class_names,
        provenance=str(path),
        timestamps_ms=np.array(timestamps, dtype=np.int64),
    )
