"""Dataset containers, archive loaders, normalization, and crop sampling.

Missing values are carried as NaN throughout: loaders preserve them,
unequal-length series are NaN-padded to a common length, and the encoder
zero-fills and masks the affected timestamps.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class TimeSeriesDataset:
    """A collection of ``n`` series of shape ``T x N`` with optional labels.

    ``samples`` is an ``(n, T, N)`` float array; NaN marks missing/padded
    positions.  ``labels``, when present, are contiguous 0-based integers.
    """

    samples: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim == 2:
            self.samples = self.samples[:, :, None]
        if self.samples.ndim != 3:
            raise ValueError(f"samples must be (n, T, N), got shape {self.samples.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise ValueError(
                    f"labels length {self.labels.shape} does not match n={self.n}"
                )
            if self.n:
                present = np.unique(self.labels)
                if present[0] < 0 or not np.array_equal(present, np.arange(len(present))):
                    raise ValueError(
                        f"labels must be contiguous 0-based integers, got classes {present}"
                    )

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    @property
    def num_classes(self) -> int:
        if self.labels is None or self.labels.size == 0:
            return 0
        return int(self.labels.max()) + 1

    @property
    def total_timestamps(self) -> int:
        """n * T, the size measure used by the epoch-count rule."""
        return self.n * self.length


@dataclass
class AnomalySeries:
    """A single labeled series for anomaly detection with a train/eval split."""

    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    train_end: int
    name: str = ""

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        L = len(self.values)
        if len(self.timestamps) != L or len(self.labels) != L:
            raise ValueError("timestamps, values, and labels must share a length")
        if L > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.isin(self.labels, (0, 1)).all():
            bad = self.labels[~np.isin(self.labels, (0, 1))][0]
            raise ValueError(f"labels must be 0/1, found {bad}")
        if not (0 <= self.train_end <= L):
            raise ValueError(f"train_end {self.train_end} out of range [0, {L}]")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class CropPair:
    """Two overlapping half-open windows ``[a1, b1)`` and ``[a2, b2)``.

    Invariant: ``0 <= a1 <= a2 < b1 <= b2 <= T``, so the overlap
    ``[a2, b1)`` is non-empty.
    """

    a1: int
    b1: int
    a2: int
    b2: int

    def __post_init__(self):
        if not (0 <= self.a1 <= self.a2 < self.b1 <= self.b2):
            raise ValueError(
                f"invalid crop pair a1={self.a1} a2={self.a2} b1={self.b1} b2={self.b2}"
            )

    @property
    def overlap(self) -> tuple[int, int]:
        return (self.a2, self.b1)

    @property
    def overlap_length(self) -> int:
        return self.b1 - self.a2


class ParseError(ValueError):
    """Raised when an archive file cannot be parsed."""


def _remap_labels(raw: Sequence) -> np.ndarray:
    """Map raw labels to contiguous 0-based integers (numeric sort order)."""

    def key(v):
        try:
            return (0, float(v))
        except (TypeError, ValueError):
            return (1, str(v))

    classes = sorted(set(raw), key=key)
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[v] for v in raw], dtype=np.int64)


def _parse_float(token: str, where: str) -> float:
    token = token.strip()
    if token in ("?", "NaN", "nan", ""):
        return math.nan
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r} in {where}") from None


def load_ucr_tsv(path: str | os.PathLike) -> TimeSeriesDataset:
    """Load a UCR-style tab-separated file: one series per row, label first.

    All rows must have the same column count; labels are remapped to
    contiguous 0-based integers; NaN cells are preserved.
    """
    rows, raw_labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) < 2:
                raise ParseError(f"row {lineno} of {path} has no values")
            raw_labels.append(parts[0].strip())
            rows.append([_parse_float(tok, f"row {lineno} of {path}") for tok in parts[1:]])
    if not rows:
        raise ParseError(f"{path} contains no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"ragged row {i + 1} in {path}: {len(row)} values, expected {width}")
    samples = np.asarray(rows, dtype=np.float64)[:, :, None]
    return TimeSeriesDataset(samples, _remap_labels(raw_labels), name=os.path.basename(str(path)))


def save_ucr_tsv(dataset: TimeSeriesDataset, path: str | os.PathLike) -> None:
    if dataset.channels != 1:
        raise ValueError("UCR format is univariate")
    labels = dataset.labels if dataset.labels is not None else np.zeros(dataset.n, dtype=int)
    with open(path, "w") as fh:
        for lab, series in zip(labels, dataset.samples[:, :, 0]):
            cells = [str(int(lab))] + [repr(float(v)) for v in series]
            fh.write("\t".join(cells) + "\n")


def load_uea_ts(path: str | os.PathLike) -> TimeSeriesDataset:
    """Load a sktime-style ``.ts`` file.

    The header must declare ``@dimensions`` and ``@classLabel``; data rows
    hold colon-separated dimensions of comma-separated values with the class
    label last.  Unequal-length series are NaN-padded to the maximum length.
    """
    dims = None
    class_labels: Optional[list[str]] = None
    name = os.path.basename(str(path))
    cases: list[list[list[float]]] = []
    raw_labels: list[str] = []
    in_data = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not in_data and line.startswith("@"):
                low = line.lower()
                if low.startswith("@problemname"):
                    name = line.split(maxsplit=1)[1] if " " in line else name
                elif low.startswith("@dimensions") or low.startswith("@dimension "):
                    dims = int(line.split()[1])
                elif low.startswith("@classlabel"):
                    parts = line.split()
                    if len(parts) < 2 or parts[1].lower() not in ("true", "false"):
                        raise ParseError(f"malformed @classLabel at line {lineno} of {path}")
                    class_labels = parts[2:] if parts[1].lower() == "true" else []
                elif low.startswith("@data"):
                    in_data = True
                continue
            if not in_data:
                raise ParseError(f"unexpected content before @data at line {lineno} of {path}")
            chunks = line.split(":")
            if class_labels:
                if len(chunks) < 2:
                    raise ParseError(f"row at line {lineno} of {path} lacks a class label")
                raw_labels.append(chunks[-1].strip())
                chunks = chunks[:-1]
            case = [
                [_parse_float(tok, f"line {lineno} of {path}") for tok in chunk.split(",") if tok.strip() != ""]
                for chunk in chunks
            ]
            if dims is not None and len(case) != dims:
                raise ParseError(
                    f"line {lineno} of {path} has {len(case)} dimensions, header declares {dims}"
                )
            cases.append(case)
    if dims is None:
        raise ParseError(f"{path} header is missing @dimensions")
    if class_labels is None:
        raise ParseError(f"{path} header is missing @classLabel")
    if not cases:
        raise ParseError(f"{path} contains no data rows")
    max_len = max(max(len(d) for d in case) for case in cases)
    samples = np.full((len(cases), max_len, dims), np.nan)
    for i, case in enumerate(cases):
        for d, values in enumerate(case):
            samples[i, : len(values), d] = values
    labels = _remap_labels(raw_labels) if raw_labels else None
    return TimeSeriesDataset(samples, labels, name=name)


def save_uea_ts(dataset: TimeSeriesDataset, path: str | os.PathLike, name: str = "dataset") -> None:
    has_labels = dataset.labels is not None
    classes = sorted(set(dataset.labels.tolist())) if has_labels else []
    with open(path, "w") as fh:
        fh.write(f"@problemName {name}\n")
        fh.write(f"@dimensions {dataset.channels}\n")
        fh.write("@equalLength true\n")
        if has_labels:
            fh.write("@classLabel true " + " ".join(str(c) for c in classes) + "\n")
        else:
            fh.write("@classLabel false\n")
        fh.write("@data\n")
        for i in range(dataset.n):
            dims = [
                ",".join(repr(float(v)) for v in dataset.samples[i, :, d])
                for d in range(dataset.channels)
            ]
            row = ":".join(dims)
            if has_labels:
                row += f":{int(dataset.labels[i])}"
            fh.write(row + "\n")


def load_anomaly_csv(path: str | os.PathLike, split_fraction: float = 0.5) -> AnomalySeries:
    """Load a ``timestamp,value,label`` CSV and split it by time order.

    ``train_end = floor(L * split_fraction)``; the default 0.5 matches the
    half-train / half-eval protocol.
    """
    if not (0.0 < split_fraction < 1.0):
        raise ValueError(f"split_fraction must be in (0, 1), got {split_fraction}")
    timestamps, values, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                float(row[0])
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ParseError(f"non-numeric timestamp at row {lineno} of {path}") from None
            if len(row) < 3:
                raise ParseError(f"row {lineno} of {path} needs timestamp,value,label")
            timestamps.append(int(float(row[0])))
            values.append(_parse_float(row[1], f"row {lineno} of {path}"))
            lab = int(float(row[2]))
            if lab not in (0, 1):
                raise ParseError(f"row {lineno} of {path} has label {lab}, expected 0/1")
            labels.append(lab)
    if not values:
        raise ParseError(f"{path} contains no data rows")
    train_end = int(math.floor(len(values) * split_fraction))
    return AnomalySeries(
        np.array(timestamps), np.array(values), np.array(labels), train_end,
        name=os.path.basename(str(path)),
    )


def save_anomaly_csv(series: AnomalySeries, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "value", "label"])
        for t, v, l in zip(series.timestamps, series.values, series.labels):
            writer.writerow([int(t), repr(float(v)), int(l)])


def channel_stats(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std over all samples and timestamps, ignoring NaN.

    Stds below 1e-8 are clamped to 1 so constant channels map to zero.
    """
    samples = np.asarray(samples, dtype=np.float64)
    mean = np.nanmean(samples, axis=(0, 1))
    std = np.nanstd(samples, axis=(0, 1))
    std = np.where(std < 1e-8, 1.0, std)
    return mean, std


def normalize(
    dataset: TimeSeriesDataset,
    mode: str = "zscore_per_channel",
    stats: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> TimeSeriesDataset:
    """Return a normalized copy of ``dataset``.

    ``zscore_per_channel`` centers and scales each channel; pass ``stats``
    computed from the training split when normalizing held-out data.
    ``none`` is the identity.
    """
    if mode == "none":
        return TimeSeriesDataset(dataset.samples.copy(), dataset.labels, dataset.name)
    if mode != "zscore_per_channel":
        raise ValueError(f"unknown normalization mode {mode!r}")
    mean, std = stats if stats is not None else channel_stats(dataset.samples)
    return TimeSeriesDataset((dataset.samples - mean) / std, dataset.labels, dataset.name)


def sample_crop_pair(T: int, rng: np.random.Generator) -> CropPair:
    """Sample two overlapping windows of a length-``T`` series.

    Window one gets a length uniform in ``[2, T]`` and a uniform start; the
    second window starts uniformly inside window one (guaranteeing overlap
    length >= 1) and ends uniformly in ``[b1, T]``.
    """
    if T < 2:
        raise ValueError(f"need T >= 2 to sample overlapping crops, got T={T}")
    length = int(rng.integers(2, T + 1))
    a1 = int(rng.integers(0, T - length + 1))
    b1 = a1 + length
    a2 = int(rng.integers(a1, b1))
    b2 = int(rng.integers(b1, T + 1))
    return CropPair(a1=a1, b1=b1, a2=a2, b2=b2)


def segment_long_series(x: np.ndarray, max_len: int = 3000) -> list[np.ndarray]:
    """Split ``x`` along its first axis into consecutive windows of <= max_len."""
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    x = np.asarray(x)
    return [x[i : i + max_len] for i in range(0, len(x), max_len)]
