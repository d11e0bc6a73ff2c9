"""Warning decisions over forecast values.

Two detectors: a strict threshold comparison on forecast values, and an
ordinary-least-squares trend slope over a recent window for the case
where values stay below the limit but keep climbing. Events serialize to
one JSON object per line for log shipping.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_vector
from .errors import ConfigError, DataFormatError


class WarningKind(enum.Enum):
    THRESHOLD_BREACH = "ThresholdBreach"
    RISING_TREND = "RisingTrend"


@dataclass(frozen=True)
class ThresholdPolicy:
    """Alarm settings for one monitored variable."""

    variable: str
    threshold: float
    trend_window: int = 12
    slope_limit: float = math.inf  # per-step units; inf disables trend warnings

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ConfigError(f"threshold for {self.variable!r} must be finite")
        if self.trend_window < 2:
            raise ConfigError("trend window must cover at least 2 points")
        if self.slope_limit < 0:
            raise ConfigError("slope limit must be >= 0")


@dataclass(frozen=True)
class WarningEvent:
    device_id: str
    variable: str
    kind: WarningKind
    value: float  # breaching prediction, or fitted slope for trends
    limit: float  # the threshold or slope limit that was exceeded
    horizon_index: int
    timestamp: int  # timestamp the offending prediction refers to

    def to_json(self) -> str:
        return json.dumps(
            {
                "device_id": self.device_id,
                "variable": self.variable,
                "kind": self.kind.value,
                "value": self.value,
                "limit": self.limit,
                "horizon_index": self.horizon_index,
                "timestamp": self.timestamp,
            },
            sort_keys=True,
        )


def evaluate_threshold(
    forecast,
    policy: ThresholdPolicy,
    device_id: str = "unknown",
    timestamps=None,
) -> WarningEvent | None:
    """Breach event at the first forecast value strictly above the threshold.

    Equality is not a breach. ``timestamps`` optionally maps horizon
    indices to data timestamps; otherwise the horizon index is recorded.
    """
    values = as_float_vector(forecast, "forecast")
    above = np.flatnonzero(values > policy.threshold)
    if above.size == 0:
        return None
    idx = int(above[0])
    return WarningEvent(
        device_id=device_id,
        variable=policy.variable,
        kind=WarningKind.THRESHOLD_BREACH,
        value=float(values[idx]),
        limit=policy.threshold,
        horizon_index=idx,
        timestamp=int(timestamps[idx]) if timestamps is not None else idx,
    )


def ols_slope(values) -> float:
    """Least-squares slope of values against their 0-based index."""
    values = as_float_vector(values, "values", min_len=2)
    idx = np.arange(values.size, dtype=float)
    idx -= idx.mean()
    return float(np.dot(idx, values - values.mean()) / np.dot(idx, idx))


def evaluate_trend(
    recent,
    policy: ThresholdPolicy,
    device_id: str = "unknown",
    timestamps=None,
) -> WarningEvent | None:
    """Rising-trend event when the OLS slope over the window exceeds the limit."""
    values = as_float_vector(recent, "recent values")
    if values.size != policy.trend_window:
        raise DataFormatError(
            f"trend evaluation needs exactly {policy.trend_window} values, "
            f"got {values.size}"
        )
    slope = ols_slope(values)
    if not slope > policy.slope_limit:
        return None
    last = values.size - 1
    return WarningEvent(
        device_id=device_id,
        variable=policy.variable,
        kind=WarningKind.RISING_TREND,
        value=slope,
        limit=policy.slope_limit,
        horizon_index=last,
        timestamp=int(timestamps[last]) if timestamps is not None else last,
    )


def write_ndjson(events, path) -> None:
    with open(path, "w") as fh:
        for event in events:
            fh.write(event.to_json())
            fh.write("\n")
