"""Domain types and dataset plumbing shared by every stage of the pipeline.

A monitoring record is one timestamped reading of the four current
channels plus temperature and humidity, optionally tagged with a fault
class. Series of such records feed the forecasters; flattened feature
rows feed the classifier. Both travel through one CSV schema (the label
column is optional) so a single loader serves both stages.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_float_vector, check_seed
from .errors import DataFormatError, MissingInputError

# Canonical feature order used everywhere a row becomes a vector.
FEATURE_NAMES = (
    "leakage_current",
    "resistive_current",
    "resistive_fundamental",
    "resistive_third_harmonic",
    "temperature",
    "humidity",
)

CSV_HEADER = (
    "timestamp",
    "leakage_current_mA",
    "resistive_current_mA",
    "resistive_fundamental_mA",
    "resistive_third_harmonic_mA",
    "temperature_C",
    "humidity_pct",
)
CSV_LABEL_COLUMN = "label"

_CURRENT_FIELDS = FEATURE_NAMES[:4]


class FaultClass(enum.Enum):
    """Closed set of insulation states; order fixes all tie-breaks."""

    NORMAL = "Normal"
    AGING = "Aging"
    DAMP = "Damp"
    SURFACE = "Surface"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str) -> "FaultClass":
        for member in cls:
            if member.value == text:
                return member
        valid = "|".join(m.value for m in cls)
        raise DataFormatError(f"unknown fault label {text!r}; expected one of {valid}")

    @property
    def index(self) -> int:
        return _CLASS_INDEX[self]


_CLASS_INDEX = {member: i for i, member in enumerate(FaultClass)}
N_CLASSES = len(FaultClass)
CLASS_ORDER = tuple(FaultClass)


@dataclass(frozen=True)
class MonitoringSample:
    """One timestamped sensor reading.

    Current channels are milliamps; temperature is degrees Celsius;
    humidity is percent relative. Currents must be finite and
    non-negative, humidity within [0, 100].
    """

    timestamp: int
    leakage_current: float
    resistive_current: float
    resistive_fundamental: float
    resistive_third_harmonic: float
    temperature: float
    humidity: float
    label: FaultClass | None = None

    def __post_init__(self):
        for name in _CURRENT_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DataFormatError(
                    f"{name} must be finite and >= 0, got {value!r}"
                )
        if not math.isfinite(self.temperature):
            raise DataFormatError(f"temperature must be finite, got {self.temperature!r}")
        if not (0.0 <= self.humidity <= 100.0):
            raise DataFormatError(
                f"humidity must lie in [0, 100], got {self.humidity!r}"
            )

    def feature_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)


@dataclass
class MonitoringSeries:
    """Ordered sequence of samples from one device; timestamps strictly increase."""

    samples: list[MonitoringSample]
    device_id: str = "unknown"

    def __post_init__(self):
        if len(self.samples) < 1:
            raise DataFormatError("a monitoring series needs at least one sample")
        ts = [s.timestamp for s in self.samples]
        for i in range(1, len(ts)):
            if ts[i] <= ts[i - 1]:
                raise DataFormatError(
                    f"timestamps must be strictly increasing; "
                    f"sample {i} has {ts[i]} after {ts[i - 1]}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def values(self, feature: str) -> np.ndarray:
        """Extract one channel as a float array in sample order."""
        if feature not in FEATURE_NAMES:
            raise DataFormatError(
                f"unknown feature {feature!r}; expected one of {FEATURE_NAMES}"
            )
        return np.array([getattr(s, feature) for s in self.samples], dtype=float)

    def feature_matrix(self) -> np.ndarray:
        """All channels as an (n_samples, 6) matrix in canonical order."""
        return np.vstack([s.feature_vector() for s in self.samples])

    def labels(self) -> list[FaultClass | None]:
        return [s.label for s in self.samples]

    def timestamps(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.samples], dtype=np.int64)

    def sampling_interval(self) -> int:
        """Modal step between consecutive timestamps (series of length 1 -> 0)."""
        ts = self.timestamps()
        if len(ts) < 2:
            return 0
        steps, counts = np.unique(np.diff(ts), return_counts=True)
        return int(steps[np.argmax(counts)])


def load_csv(path) -> MonitoringSeries:
    """Read a monitoring series from the package CSV schema.

    The header must match CSV_HEADER exactly, optionally followed by a
    ``label`` column. Errors name the offending line.
    """
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise MissingInputError(f"data file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        has_label = False
        if tuple(header) == CSV_HEADER:
            pass
        elif tuple(header) == CSV_HEADER + (CSV_LABEL_COLUMN,):
            has_label = True
        else:
            raise DataFormatError(
                f"{path}: unexpected header {header}; expected "
                f"{','.join(CSV_HEADER)}[,{CSV_LABEL_COLUMN}]"
            )

        samples: list[MonitoringSample] = []
        expected = len(CSV_HEADER) + (1 if has_label else 0)
        prev_ts = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != expected:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {expected} fields, got {len(row)}"
                )
            try:
                ts = int(row[0])
                numeric = [float(v) for v in row[1:7]]
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}") from None
            label = FaultClass.parse(row[7].strip()) if has_label else None
            try:
                sample = MonitoringSample(ts, *numeric, label=label)
            except DataFormatError as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}") from None
            if prev_ts is not None and ts <= prev_ts:
                raise DataFormatError(
                    f"{path}: line {lineno}: timestamp {ts} does not increase "
                    f"past {prev_ts}"
                )
            prev_ts = ts
            samples.append(sample)
    if not samples:
        raise DataFormatError(f"{path}: no data rows")
    return MonitoringSeries(samples=samples)


def write_csv(series: MonitoringSeries, path) -> None:
    """Write a series back out; floats use shortest round-trip formatting."""
    has_label = any(s.label is not None for s in series.samples)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(CSV_HEADER) + ([CSV_LABEL_COLUMN] if has_label else [])
        writer.writerow(header)
        for s in series.samples:
            row = [str(s.timestamp)] + [repr(getattr(s, f)) for f in FEATURE_NAMES]
            if has_label:
                row.append(s.label.value if s.label is not None else "Normal")
            writer.writerow(row)


@dataclass
class NormalizationStats:
    """Per-feature extrema captured on training data."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        self.minimum = np.atleast_1d(np.asarray(self.minimum, dtype=float))
        self.maximum = np.atleast_1d(np.asarray(self.maximum, dtype=float))
        if self.minimum.shape != self.maximum.shape:
            raise DataFormatError("normalization min/max shapes differ")
        if np.any(self.maximum < self.minimum):
            raise DataFormatError("normalization max must be >= min per feature")


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Min-max scaling to [0, 1], fitted on training data only.

    A constant feature (max == min) maps every value to 0.5 and cannot be
    inverted; non-constant features invert exactly. Values outside the
    fitted range are allowed and map outside [0, 1].
    """

    def __init__(self):
        self.stats_: NormalizationStats | None = None

    def fit(self, X, y=None):
        arr = np.asarray(X, dtype=float)
        if arr.size == 0:
            raise DataFormatError("cannot fit normalizer on empty data")
        if arr.ndim == 1:
            arr = arr[:, None]
        if not np.all(np.isfinite(arr)):
            raise DataFormatError("normalizer input contains non-finite values")
        self.stats_ = NormalizationStats(arr.min(axis=0), arr.max(axis=0))
        return self

    def transform(self, X):
        stats = self._require_stats()
        arr, squeeze = self._coerce(X, stats)
        span = stats.maximum - stats.minimum
        out = np.empty_like(arr)
        constant = span == 0
        out[:, constant] = 0.5
        nc = ~constant
        out[:, nc] = (arr[:, nc] - stats.minimum[nc]) / span[nc]
        return out[:, 0] if squeeze else out

    def inverse_transform(self, X):
        stats = self._require_stats()
        arr, squeeze = self._coerce(X, stats)
        span = stats.maximum - stats.minimum
        out = np.empty_like(arr)
        constant = span == 0
        # Constant features carry no scale; the only faithful inverse is the
        # training value itself.
        out[:, constant] = stats.minimum[constant]
        nc = ~constant
        out[:, nc] = arr[:, nc] * span[nc] + stats.minimum[nc]
        return out[:, 0] if squeeze else out

    def _require_stats(self) -> NormalizationStats:
        if self.stats_ is None:
            raise DataFormatError("MinMaxNormalizer is not fitted; call fit() first")
        return self.stats_

    def _coerce(self, X, stats):
        arr = np.asarray(X, dtype=float)
        squeeze = arr.ndim == 1 and stats.minimum.shape == (1,)
        if arr.ndim == 1:
            arr = arr[:, None] if squeeze else arr[None, :]
        if arr.shape[1] != stats.minimum.shape[0]:
            raise DataFormatError(
                f"expected {stats.minimum.shape[0]} features, got {arr.shape[1]}"
            )
        return arr.astype(float, copy=True), squeeze


def fit_normalizer(series: MonitoringSeries, features) -> MinMaxNormalizer:
    """Fit a MinMaxNormalizer on the selected channels of a series."""
    if isinstance(features, str):
        features = [features]
    columns = np.column_stack([series.values(f) for f in features])
    return MinMaxNormalizer().fit(columns)


def normalize(x: float, minimum: float, maximum: float) -> float:
    """Scalar min-max map; constant range collapses to 0.5."""
    if maximum < minimum:
        raise DataFormatError("normalize needs max >= min")
    if maximum == minimum:
        return 0.5
    return (x - minimum) / (maximum - minimum)


def denormalize(x: float, minimum: float, maximum: float) -> float:
    if maximum < minimum:
        raise DataFormatError("denormalize needs max >= min")
    if maximum == minimum:
        return minimum
    return x * (maximum - minimum) + minimum


def make_windows(values, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Cut a series into (input window, next value) training pairs.

    Pair i is (values[i : i + window], values[i + window]); a series of
    length N yields exactly N - window pairs.
    """
    if window < 1:
        raise DataFormatError(f"window length must be >= 1, got {window}")
    arr = as_float_vector(values, "values", min_len=window + 1)
    n_pairs = arr.size - window
    X = np.empty((n_pairs, window), dtype=float)
    for i in range(n_pairs):
        X[i] = arr[i : i + window]
    y = arr[window:]
    return X, y.copy()


@dataclass
class DatasetSplit:
    """Random train/test partition of row indices, reproducible by seed."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    train_fraction: float

    n_total: int = field(init=False)

    def __post_init__(self):
        self.train_indices = np.asarray(self.train_indices, dtype=np.intp)
        self.test_indices = np.asarray(self.test_indices, dtype=np.intp)
        self.n_total = self.train_indices.size + self.test_indices.size


def split_dataset(n_rows: int, train_fraction: float, seed: int) -> DatasetSplit:
    """Shuffle row indices and split them round(train_fraction * n) / rest.

    The two sides are disjoint, cover all rows, and are identical for a
    fixed seed. Both sides are kept non-empty.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataFormatError(
            f"train_fraction must lie strictly in (0, 1), got {train_fraction}"
        )
    if n_rows < 2:
        raise DataFormatError(f"need at least 2 rows to split, got {n_rows}")
    seed = check_seed(seed)
    n_train = int(round(train_fraction * n_rows))
    n_train = min(max(n_train, 1), n_rows - 1)
    perm = np.random.default_rng(seed).permutation(n_rows)
    return DatasetSplit(
        train_indices=np.sort(perm[:n_train]),
        test_indices=np.sort(perm[n_train:]),
        seed=seed,
        train_fraction=train_fraction,
    )


def labeled_rows(series: MonitoringSeries) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and integer class labels for the labeled samples."""
    rows = [
        (s.feature_vector(), s.label.index)
        for s in series.samples
        if s.label is not None
    ]
    if not rows:
        raise DataFormatError("series has no labeled samples")
    X = np.vstack([r[0] for r in rows])
    y = np.array([r[1] for r in rows], dtype=np.intp)
    return X, y
