"""Stream ingestion, downsampling, temporal alignment, scaling, correlation,
windowing, and train/test splitting for the three modality streams.

The fNIRS stream is the master clock: it has the lowest rate, so eye and
driving data are bucket-mean downsampled onto its timestamps. Windows are cut
inside label blocks only, never across a block boundary.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DimensionError,
    NumericError,
    ParseError,
    RangeError,
    StratificationError,
    ValidationError,
)

FNIRS_CHANNEL_COUNT = 204

DRIVING_CHANNELS = [
    "car_speed",
    "angular_velocity_x",
    "angular_velocity_y",
    "angular_velocity_z",
    "linear_acceleration_x",
    "linear_acceleration_y",
    "linear_acceleration_z",
    "steering_wheel_angle",
    "throttle",
    "brake",
]

DEFAULT_EYE_CHANNELS = [
    "pupil_diameter_left",
    "pupil_diameter_right",
    "gaze_x",
    "gaze_y",
]

NUM_LEVELS = 3


def fnirs_channel_names() -> List[str]:
    """204 names: ch001_O2, ch001_R, ..., ch102_O2, ch102_R."""
    names = []
    for i in range(1, FNIRS_CHANNEL_COUNT // 2 + 1):
        names.append(f"ch{i:03d}_O2")
        names.append(f"ch{i:03d}_R")
    return names


# ---------------------------------------------------------------------------
# stream types


@dataclass
class Stream:
    """timestamps (n,) strictly increasing; values (n, channels); names."""

    timestamps: np.ndarray
    values: np.ndarray
    names: List[str]

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.names = list(self.names)
        if self.timestamps.ndim != 1:
            raise DimensionError("timestamps must be 1D")
        n = self.timestamps.shape[0]
        if n < 1:
            raise DimensionError("stream is empty")
        if self.values.shape != (n, len(self.names)):
            raise DimensionError(
                f"values are {self.values.shape}, expected ({n}, {len(self.names)})"
            )
        if len(set(self.names)) != len(self.names):
            raise ValidationError("channel names must be unique")
        if not np.isfinite(self.timestamps).all() or not np.isfinite(self.values).all():
            raise NumericError("stream contains non-finite entries")
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            j = int(np.argmax(np.diff(self.timestamps) <= 0))
            raise ValidationError(
                f"timestamps not strictly increasing at index {j + 1}"
            )

    @property
    def n_samples(self) -> int:
        return self.timestamps.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.names)


class FnirsStream(Stream):
    def __post_init__(self):
        super().__post_init__()
        if len(self.names) != FNIRS_CHANNEL_COUNT:
            raise ValidationError(
                f"fNIRS stream has {len(self.names)} channels, expected {FNIRS_CHANNEL_COUNT}"
            )
        bad = [n for n in self.names if not (n.endswith("_O2") or n.endswith("_R"))]
        if bad:
            raise ValidationError(
                f"fNIRS channel names must end in O2 or R: {', '.join(bad[:5])}"
            )


class EyeStream(Stream):
    pass  # any non-empty channel list; the base class enforces that


class DrivingStream(Stream):
    def __post_init__(self):
        super().__post_init__()
        if self.names != DRIVING_CHANNELS:
            raise ValidationError(
                f"driving channels must be exactly {DRIVING_CHANNELS}, got {self.names}"
            )


@dataclass
class LabelInterval:
    start: float
    end: float
    level: int
    block_id: int

    def __post_init__(self):
        if not (self.start < self.end):
            raise ValidationError(f"interval [{self.start}, {self.end}) is empty")
        if self.level not in (0, 1, 2):
            raise ValidationError(f"level must be 0, 1, or 2, got {self.level}")


@dataclass
class LabelTrack:
    """Ordered, non-overlapping [start, end) intervals with levels and block ids."""

    intervals: List[LabelInterval]

    def __post_init__(self):
        if not self.intervals:
            raise ValidationError("label track is empty")
        for a, b in zip(self.intervals, self.intervals[1:]):
            if b.start < a.end:
                raise ValidationError(
                    f"intervals overlap or are unordered at block {b.block_id}"
                )
        ids = [iv.block_id for iv in self.intervals]
        if len(set(ids)) != len(ids):
            raise ValidationError("block ids must be unique")

    def lookup(self, timestamps: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(inside_mask, levels, block_ids) for each timestamp; [start, end)."""
        starts = np.array([iv.start for iv in self.intervals])
        ends = np.array([iv.end for iv in self.intervals])
        levels = np.array([iv.level for iv in self.intervals], dtype=np.int64)
        blocks = np.array([iv.block_id for iv in self.intervals], dtype=np.int64)
        idx = np.searchsorted(starts, timestamps, side="right") - 1
        safe = np.clip(idx, 0, len(starts) - 1)
        inside = (idx >= 0) & (timestamps < ends[safe])
        return inside, levels[safe], blocks[safe]


@dataclass
class AlignedDataset:
    """Fused rows on the master clock: one label and block id per row."""

    timestamps: np.ndarray
    values: np.ndarray
    names: List[str]
    labels: np.ndarray
    block_ids: np.ndarray
    session_id: int = 0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.names = list(self.names)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.block_ids = np.asarray(self.block_ids, dtype=np.int64)
        n = self.timestamps.shape[0]
        if self.values.shape != (n, len(self.names)):
            raise DimensionError(
                f"values are {self.values.shape}, expected ({n}, {len(self.names)})"
            )
        if self.labels.shape != (n,) or self.block_ids.shape != (n,):
            raise DimensionError("labels and block_ids must have one entry per row")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("feature names must be unique")
        if not np.isfinite(self.values).all():
            raise NumericError("aligned values contain non-finite entries")
        if n and (self.labels.min() < 0 or self.labels.max() >= NUM_LEVELS):
            raise ValidationError("labels must lie in {0, 1, 2}")

    @property
    def n_rows(self) -> int:
        return self.timestamps.shape[0]


@dataclass
class Scaler:
    """Per-feature mean/std fitted on training rows only."""

    mean: np.ndarray
    std: np.ndarray
    names: List[str]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.names = list(self.names)
        f = len(self.names)
        if self.mean.shape != (f,) or self.std.shape != (f,):
            raise DimensionError("scaler statistics must have one entry per feature")
        if np.any(self.std <= 0):
            raise ValidationError("scaler std must be positive for every feature")


@dataclass
class CorrelationMatrix:
    names: List[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        f = len(self.names)
        if self.values.shape != (f, f):
            raise DimensionError(f"matrix is {self.values.shape}, expected ({f}, {f})")


@dataclass
class WindowSet:
    """Fixed-length windows: windows (n, channels, length), one label each."""

    windows: np.ndarray
    labels: np.ndarray
    block_ids: np.ndarray
    names: List[str]

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.block_ids = np.asarray(self.block_ids, dtype=np.int64)
        if self.windows.ndim != 3:
            raise DimensionError("windows must be (n, channels, length)")
        n = self.windows.shape[0]
        if self.windows.shape[1] != len(self.names):
            raise DimensionError(
                f"{self.windows.shape[1]} channels for {len(self.names)} names"
            )
        if self.labels.shape != (n,) or self.block_ids.shape != (n,):
            raise DimensionError("labels and block_ids must have one entry per window")

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def subset(self, idx: np.ndarray) -> "WindowSet":
        return WindowSet(self.windows[idx], self.labels[idx], self.block_ids[idx], self.names)


# ---------------------------------------------------------------------------
# CSV ingestion

_STREAM_KINDS = ("fnirs", "eye", "driving")


def load_stream(path, kind: str, expected_names: Optional[Sequence[str]] = None) -> Stream:
    """Parse a stream CSV (header ``timestamp_s,<channels...>``).

    kind selects the validation schema: fnirs (204 O2/R channels), driving
    (the fixed 10-channel list), or eye (any channels, or expected_names when
    given). Errors carry the offending line number.
    """
    if kind not in _STREAM_KINDS:
        raise ValidationError(f"unknown stream kind {kind!r}, expected one of {_STREAM_KINDS}")
    header, rows = _read_csv(path)
    if not header or header[0] != "timestamp_s":
        raise ParseError(f"{path}: line 1: first column must be timestamp_s")
    names = header[1:]
    if kind == "driving" and names != DRIVING_CHANNELS:
        raise ParseError(
            f"{path}: line 1: driving header must be exactly {DRIVING_CHANNELS}"
        )
    if kind == "fnirs":
        if len(names) != FNIRS_CHANNEL_COUNT:
            raise ParseError(
                f"{path}: line 1: {len(names)} channels, expected {FNIRS_CHANNEL_COUNT}"
            )
        bad = [n for n in names if not (n.endswith("_O2") or n.endswith("_R"))]
        if bad:
            raise ParseError(f"{path}: line 1: bad fNIRS channel names: {', '.join(bad[:5])}")
    if kind == "eye":
        if not names:
            raise ParseError(f"{path}: line 1: eye stream needs at least one channel")
        if expected_names is not None and names != list(expected_names):
            raise ParseError(
                f"{path}: line 1: eye header {names} does not match expected {list(expected_names)}"
            )
    if not rows:
        raise ParseError(f"{path}: no data rows")

    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise ParseError(
                f"{path}: line {lineno}: {len(row)} cells, header has {len(header)}"
            )
        try:
            data[i] = [float(cell) for cell in row]
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric cell") from None
    ts = data[:, 0]
    if len(ts) > 1:
        bad = np.nonzero(np.diff(ts) <= 0)[0]
        if bad.size:
            raise ParseError(
                f"{path}: line {int(bad[0]) + 3}: timestamp does not increase"
            )
    cls = {"fnirs": FnirsStream, "eye": EyeStream, "driving": DrivingStream}[kind]
    return cls(ts, data[:, 1:], names)


def load_labels(path) -> LabelTrack:
    """Parse a label track CSV with header start_s,end_s,level,block_id."""
    header, rows = _read_csv(path)
    if header != ["start_s", "end_s", "level", "block_id"]:
        raise ParseError(f"{path}: line 1: header must be start_s,end_s,level,block_id")
    intervals = []
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != 4:
            raise ParseError(f"{path}: line {lineno}: expected 4 cells")
        try:
            intervals.append(
                LabelInterval(float(row[0]), float(row[1]), int(row[2]), int(row[3]))
            )
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric cell") from None
    return LabelTrack(intervals)


def _read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        return header, list(reader)


# ---------------------------------------------------------------------------
# resampling and alignment


def downsample(stream: Stream, target_timestamps: np.ndarray) -> Stream:
    """Bucket-mean resample onto the target clock.

    For each target timestamp t with target period P (median target spacing),
    the output is the mean of source samples in [t - P/2, t + P/2). An empty
    bucket falls back to the nearest source sample (ties toward the earlier
    one). Output timestamps are the target timestamps exactly.
    """
    target = np.asarray(target_timestamps, dtype=np.float64)
    if target.ndim != 1 or target.size == 0:
        raise ValidationError("target timestamps must be a non-empty 1D array")
    if target.size > 1 and np.any(np.diff(target) <= 0):
        raise ValidationError("target timestamps must be strictly increasing")
    ts = stream.timestamps
    if target[0] < ts[0] or target[-1] > ts[-1]:
        raise RangeError(
            f"target range [{target[0]}, {target[-1]}] outside stream coverage "
            f"[{ts[0]}, {ts[-1]}]"
        )
    src_period = np.median(np.diff(ts)) if ts.size > 1 else 0.0
    if target.size > 1:
        period = float(np.median(np.diff(target)))
        if src_period > period * (1 + 1e-9):
            raise ValidationError(
                f"source rate (period {src_period:g}s) is below the target rate "
                f"(period {period:g}s)"
            )
        lo = np.searchsorted(ts, target - period / 2, side="left")
        hi = np.searchsorted(ts, target + period / 2, side="left")
    else:
        # single target: no period exists, use the nearest sample
        lo = hi = np.zeros(1, dtype=np.int64)

    out = np.empty((target.size, stream.n_channels))
    empty = []
    for i in range(target.size):
        if hi[i] > lo[i]:
            out[i] = stream.values[lo[i] : hi[i]].mean(axis=0)
        else:
            empty.append(i)
    if empty:
        nearest = _nearest_indices(ts, target[empty])
        out[empty] = stream.values[nearest]
    return type(stream)(target.copy(), out, stream.names)


def _nearest_indices(ts: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Index of the source sample closest to each query; ties pick the earlier."""
    pos = np.searchsorted(ts, queries)
    left = np.clip(pos - 1, 0, len(ts) - 1)
    right = np.clip(pos, 0, len(ts) - 1)
    d_left = np.abs(queries - ts[left])
    d_right = np.abs(ts[right] - queries)
    return np.where(d_left <= d_right, left, right)


def align(
    fnirs: FnirsStream,
    eye: EyeStream,
    driving: DrivingStream,
    labels: LabelTrack,
    selected_fnirs_names: Optional[Sequence[str]] = None,
    session_id: int = 0,
) -> AlignedDataset:
    """Fuse the three streams on the fNIRS clock.

    The master clock is the fNIRS timestamps restricted to the intersection
    of all three streams' coverage; eye and driving are downsampled onto it.
    Rows outside every label interval are dropped. Column order is fNIRS,
    then eye, then driving.
    """
    streams = (fnirs, eye, driving)
    lo = max(s.timestamps[0] for s in streams)
    hi = min(s.timestamps[-1] for s in streams)
    if lo > hi:
        raise RangeError(f"streams do not overlap in time ({lo} > {hi})")
    mask = (fnirs.timestamps >= lo) & (fnirs.timestamps <= hi)
    master = fnirs.timestamps[mask]
    if master.size == 0:
        raise RangeError("no fNIRS samples inside the stream intersection")

    if selected_fnirs_names is None:
        col_idx = np.arange(fnirs.n_channels)
        fnirs_names = list(fnirs.names)
    else:
        missing = [n for n in selected_fnirs_names if n not in fnirs.names]
        if missing:
            raise ValidationError(f"selected fNIRS channels not found: {', '.join(missing)}")
        col_idx = np.array([fnirs.names.index(n) for n in selected_fnirs_names])
        fnirs_names = list(selected_fnirs_names)

    fnirs_vals = fnirs.values[mask][:, col_idx]
    eye_ds = downsample(eye, master)
    drv_ds = downsample(driving, master)

    inside, levels, blocks = labels.lookup(master)
    values = np.hstack([fnirs_vals, eye_ds.values, drv_ds.values])
    names = fnirs_names + list(eye.names) + list(driving.names)
    return AlignedDataset(
        timestamps=master[inside],
        values=values[inside],
        names=names,
        labels=levels[inside],
        block_ids=blocks[inside],
        session_id=session_id,
    )


def concat_aligned(datasets: Sequence[AlignedDataset]) -> AlignedDataset:
    """Stack per-session datasets row-wise; block ids are offset per session
    so blocks from different sessions never merge."""
    if not datasets:
        raise ValidationError("no datasets to concatenate")
    names = datasets[0].names
    for ds in datasets[1:]:
        if ds.names != names:
            raise ValidationError("datasets have mismatched feature columns")
    offset = 0
    blocks = []
    for ds in datasets:
        blocks.append(ds.block_ids + offset)
        if ds.n_rows:
            offset += int(ds.block_ids.max()) + 1
    return AlignedDataset(
        timestamps=np.concatenate([ds.timestamps for ds in datasets]),
        values=np.vstack([ds.values for ds in datasets]),
        names=names,
        labels=np.concatenate([ds.labels for ds in datasets]),
        block_ids=np.concatenate(blocks),
        session_id=datasets[0].session_id,
    )


# ---------------------------------------------------------------------------
# scaling


def fit_scaler(values: np.ndarray, names: Sequence[str]) -> Scaler:
    """Per-feature mean and population std over the training rows."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(names):
        raise DimensionError(f"rows are {values.shape}, expected (n, {len(names)})")
    if values.shape[0] < 2:
        raise ValidationError("need at least 2 training rows to fit a scaler")
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    dead = np.nonzero(std == 0)[0]
    if dead.size:
        listed = ", ".join(names[i] for i in dead[:10])
        raise ValidationError(f"zero-variance features cannot be standardized: {listed}")
    return Scaler(mean=mean, std=std, names=list(names))


def apply_scaler(scaler: Scaler, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(scaler.names):
        raise DimensionError(
            f"rows are {values.shape}, expected (n, {len(scaler.names)})"
        )
    return (values - scaler.mean) / scaler.std


def invert_scaler(scaler: Scaler, standardized: np.ndarray) -> np.ndarray:
    standardized = np.asarray(standardized, dtype=np.float64)
    if standardized.ndim != 2 or standardized.shape[1] != len(scaler.names):
        raise DimensionError(
            f"rows are {standardized.shape}, expected (n, {len(scaler.names)})"
        )
    return standardized * scaler.std + scaler.mean


# ---------------------------------------------------------------------------
# correlation


def correlation_matrix(values: np.ndarray, names: Sequence[str]) -> CorrelationMatrix:
    """Pairwise Pearson correlations.

    Constant features correlate 0 with everything (their correlation is
    undefined, 0 is the declared convention); the diagonal is then forced to
    exactly 1 for every feature.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(names):
        raise DimensionError(f"rows are {values.shape}, expected (n, {len(names)})")
    if values.shape[0] < 2:
        raise ValidationError("need at least 2 rows for correlations")
    centered = values - values.mean(axis=0)
    std = values.std(axis=0)
    constant = std == 0
    safe_std = np.where(constant, 1.0, std)
    z = centered / safe_std
    corr = (z.T @ z) / values.shape[0]
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(names=list(names), values=corr)


# ---------------------------------------------------------------------------
# windowing and splitting


def window(dataset: AlignedDataset, length: int = 16, stride: int = 8) -> WindowSet:
    """Cut sliding windows inside each block; windows never cross blocks.

    A block shorter than the window length is skipped with a warning. The
    window label is its block's level.
    """
    if length < 5:
        raise ValidationError("window length must be >= 5 (two kernel-3 convolutions)")
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    pieces = []
    labels = []
    blocks = []
    boundaries = np.nonzero(np.diff(dataset.block_ids) != 0)[0] + 1
    run_starts = np.concatenate([[0], boundaries])
    run_ends = np.concatenate([boundaries, [dataset.n_rows]])
    for lo, hi in zip(run_starts, run_ends):
        m = hi - lo
        block_id = int(dataset.block_ids[lo])
        if m < length:
            warnings.warn(
                f"block {block_id} has {m} rows, shorter than the window length "
                f"{length}; skipped",
                stacklevel=2,
            )
            continue
        rows = dataset.values[lo:hi]  # (m, features)
        view = sliding_window_view(rows, length, axis=0)  # (m - L + 1, f, L)
        sel = view[::stride]
        pieces.append(sel)
        labels.extend([int(dataset.labels[lo])] * sel.shape[0])
        blocks.extend([block_id] * sel.shape[0])
    if pieces:
        wins = np.ascontiguousarray(np.concatenate(pieces, axis=0))
    else:
        wins = np.empty((0, len(dataset.names), length))
    return WindowSet(
        windows=wins,
        labels=np.array(labels, dtype=np.int64),
        block_ids=np.array(blocks, dtype=np.int64),
        names=list(dataset.names),
    )


def split(
    windows: WindowSet, ratio: float, seed: int, mode: str = "random"
) -> Tuple[WindowSet, WindowSet]:
    """Partition windows into train and test sets.

    random mode: label-stratified shuffle; per-class train counts follow the
    largest-remainder rule so the total train size is round(ratio * n).
    by_block mode: whole blocks go to one side (leakage-safe), allocated per
    level so both sides see every level where possible.
    """
    n = windows.n_windows
    if n < 2:
        raise ValidationError("need at least 2 windows to split")
    if not (0.0 < ratio < 1.0):
        raise ValidationError("ratio must lie strictly between 0 and 1")
    if mode == "random":
        return _split_random(windows, ratio, seed)
    if mode == "by_block":
        return _split_by_block(windows, ratio, seed)
    raise ValidationError(f"unknown split mode {mode!r}, expected random or by_block")


def _split_random(windows: WindowSet, ratio: float, seed: int):
    n = windows.n_windows
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(windows.labels, return_counts=True)
    total_train = int(round(ratio * n))
    ideal = ratio * counts
    base = np.floor(ideal).astype(int)
    rem = total_train - base.sum()
    if rem > 0:
        # hand leftover slots to the largest fractional remainders
        order = np.lexsort((classes, -(ideal - base)))
        base[order[:rem]] += 1
    elif rem < 0:
        order = np.lexsort((classes, ideal - base))
        base[order[:(-rem)]] -= 1
    train_idx = []
    test_idx = []
    for cls, n_c, k in zip(classes, counts, base):
        if k < 1 or k > n_c - 1:
            raise StratificationError(
                f"class {cls} would be missing from one side "
                f"({k} of {n_c} windows to train)"
            )
        idx = np.nonzero(windows.labels == cls)[0]
        perm = rng.permutation(n_c)
        train_idx.append(idx[perm[:k]])
        test_idx.append(idx[perm[k:]])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return windows.subset(train_idx), windows.subset(test_idx)


def _split_by_block(windows: WindowSet, ratio: float, seed: int):
    rng = np.random.default_rng(seed)
    train_blocks = []
    test_blocks = []
    # allocate whole blocks per level so each side keeps every level
    for level in np.unique(windows.labels):
        blocks = np.unique(windows.block_ids[windows.labels == level])
        n_b = blocks.size
        if n_b == 1:
            train_blocks.append(blocks)  # cannot stratify a single block
            continue
        k = int(round(ratio * n_b))
        k = min(max(k, 1), n_b - 1)
        perm = rng.permutation(n_b)
        train_blocks.append(blocks[perm[:k]])
        test_blocks.append(blocks[perm[k:]])
    train_set = set(np.concatenate(train_blocks).tolist()) if train_blocks else set()
    test_set = set(np.concatenate(test_blocks).tolist()) if test_blocks else set()
    if not train_set or not test_set:
        raise StratificationError("one side of the block split is empty")
    in_train = np.isin(windows.block_ids, sorted(train_set))
    train_idx = np.nonzero(in_train)[0]
    test_idx = np.nonzero(~in_train)[0]
    return windows.subset(train_idx), windows.subset(test_idx)


# ---------------------------------------------------------------------------
# CSV export / import

def _fmt(x: float) -> str:
    return repr(float(x))


def write_stream_csv(path, stream: Stream) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_s"] + stream.names)
        for t, row in zip(stream.timestamps, stream.values):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in row])


def write_labels_csv(path, track: LabelTrack) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["start_s", "end_s", "level", "block_id"])
        for iv in track.intervals:
            writer.writerow([_fmt(iv.start), _fmt(iv.end), iv.level, iv.block_id])


def write_aligned_csv(path, ds: AlignedDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_s", "label", "block_id"] + ds.names)
        for t, label, block, row in zip(ds.timestamps, ds.labels, ds.block_ids, ds.values):
            writer.writerow([_fmt(t), int(label), int(block)] + [_fmt(v) for v in row])


def load_aligned_csv(path, session_id: int = 0) -> AlignedDataset:
    header, rows = _read_csv(path)
    if header[:3] != ["timestamp_s", "label", "block_id"]:
        raise ParseError(
            f"{path}: line 1: header must start with timestamp_s,label,block_id"
        )
    names = header[3:]
    if not names:
        raise ParseError(f"{path}: line 1: no feature columns")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    ts = np.empty(len(rows))
    labels = np.empty(len(rows), dtype=np.int64)
    blocks = np.empty(len(rows), dtype=np.int64)
    values = np.empty((len(rows), len(names)))
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise ParseError(
                f"{path}: line {lineno}: {len(row)} cells, header has {len(header)}"
            )
        try:
            ts[i] = float(row[0])
            labels[i] = int(row[1])
            blocks[i] = int(row[2])
            values[i] = [float(c) for c in row[3:]]
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric cell") from None
    return AlignedDataset(ts, values, names, labels, blocks, session_id=session_id)


def write_correlation_csv(path, corr: CorrelationMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature"] + corr.names)
        for name, row in zip(corr.names, corr.values):
            writer.writerow([name] + [_fmt(v) for v in row])
