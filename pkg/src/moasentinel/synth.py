"""Seeded synthetic surge-arrester data with fault injection.

Baseline channels follow a daily sinusoid plus AR(1) noise; each fault
scenario adds its signature to specific current channels after an onset
index, and rows are labeled Normal before the onset and with the
scenario's class after it. Severity scales the injected signature, so
severity zero reproduces the fault-free series bit for bit (baseline and
fault randomness come from separate seeded streams).

Scenario signatures:

* AgingDrift     - slow linear+quadratic ramp on resistive current and
                   its third harmonic
* DampStep       - leakage-current level shift modulated by humidity
* SurfaceSpikes  - intermittent positive leakage spikes
* OtherWander    - random walk on the resistive fundamental

None of this models ZnO physics; it exists so the pipeline's
comparative claims can be exercised end to end at desk scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_seed
from .data import FaultClass, MonitoringSample, MonitoringSeries
from .errors import ConfigError


class FaultScenario(enum.Enum):
    NONE = "None"
    AGING_DRIFT = "AgingDrift"
    DAMP_STEP = "DampStep"
    SURFACE_SPIKES = "SurfaceSpikes"
    OTHER_WANDER = "OtherWander"

    @classmethod
    def parse(cls, text: str) -> "FaultScenario":
        for member in cls:
            if member.value == text:
                return member
        valid = "|".join(m.value for m in cls)
        raise ConfigError(f"unknown scenario {text!r}; expected one of {valid}")

    @property
    def fault_class(self) -> FaultClass:
        return _SCENARIO_CLASS[self]


_SCENARIO_CLASS = {
    FaultScenario.NONE: FaultClass.NORMAL,
    FaultScenario.AGING_DRIFT: FaultClass.AGING,
    FaultScenario.DAMP_STEP: FaultClass.DAMP,
    FaultScenario.SURFACE_SPIKES: FaultClass.SURFACE,
    FaultScenario.OTHER_WANDER: FaultClass.OTHER,
}

_CURRENT_FLOOR = 1e-3  # mA; keeps every current channel strictly positive


def _raw_daily_wave(phase):
    return (
        np.sin(phase)
        + 0.75 * np.sin(2.0 * phase + 0.9)
        + 0.6 * np.sin(3.0 * phase + 2.0)
        + 0.5 * np.sin(4.0 * phase + 2.9)
        + 0.4 * np.sin(5.0 * phase + 4.1)
        + 0.3 * np.sin(6.0 * phase + 5.2)
    )


_DAILY_WAVE_PEAK = float(
    np.max(np.abs(_raw_daily_wave(np.linspace(0.0, 2.0 * np.pi, 20001))))
)


def _daily_wave(phase: np.ndarray) -> np.ndarray:
    """Asymmetric daily cycle for the current channels, unit peak.

    A sum of day-period harmonics: heating-driven leakage rises faster
    than it decays, so the cycle is not a pure sine. Low-order linear
    predictors track only the fundamental and lag on the sharp flank,
    while window-based models can learn the full shape.
    """
    return _raw_daily_wave(phase) / _DAILY_WAVE_PEAK


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int = 720
    interval_seconds: int = 3600
    start_timestamp: int = 1_600_000_000
    device_id: str = "MOA-SYN"

    base_leakage_ma: float = 0.8
    base_resistive_ma: float = 0.2
    fundamental_ratio: float = 0.85  # of resistive current
    third_harmonic_ratio: float = 0.25
    base_temperature_c: float = 25.0
    base_humidity_pct: float = 60.0

    temperature_cycle_amplitude: float = 6.0
    humidity_cycle_amplitude: float = 15.0
    current_cycle_fraction: float = 0.1  # daily swing as a fraction of base

    leakage_noise_std: float = 0.02
    resistive_noise_std: float = 0.008
    fundamental_noise_std: float = 0.006
    third_harmonic_noise_std: float = 0.003
    temperature_noise_std: float = 0.8
    humidity_noise_std: float = 3.0
    ar_coefficient: float = 0.7

    scenario: FaultScenario = FaultScenario.NONE
    onset_index: int = 360
    severity: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if self.interval_seconds < 1:
            raise ConfigError("interval_seconds must be >= 1")
        if not 0 <= self.onset_index < self.n_samples:
            raise ConfigError("onset_index must lie within the series")
        if self.severity < 0:
            raise ConfigError("severity must be >= 0")
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ConfigError("ar_coefficient must lie in [0, 1)")
        for name in (
            "base_leakage_ma",
            "base_resistive_ma",
            "temperature_cycle_amplitude",
            "humidity_cycle_amplitude",
            "current_cycle_fraction",
            "leakage_noise_std",
            "resistive_noise_std",
            "fundamental_noise_std",
            "third_harmonic_noise_std",
            "temperature_noise_std",
            "humidity_noise_std",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        check_seed(self.seed)


def _ar1_noise(rng: np.random.Generator, n: int, std: float, ar: float) -> np.ndarray:
    """AR(1) noise with marginal standard deviation ``std``."""
    shocks = rng.normal(0.0, 1.0, size=n)
    out = np.empty(n)
    prev = shocks[0]
    out[0] = prev
    scale = math.sqrt(1.0 - ar * ar)
    for t in range(1, n):
        prev = ar * prev + scale * shocks[t]
        out[t] = prev
    return out * std


def generate(config: GeneratorConfig) -> MonitoringSeries:
    """One labeled monitoring series under the configured scenario."""
    config.validate()
    n = config.n_samples
    rng_base = np.random.default_rng([config.seed, 0])
    rng_fault = np.random.default_rng([config.seed, 1])

    period = 86400.0 / config.interval_seconds
    phase = 2.0 * math.pi * np.arange(n) / period
    cycle = np.sin(phase)  # environmental channels: plain diurnal sine
    current_cycle = _daily_wave(phase)
    ar = config.ar_coefficient

    temperature = (
        config.base_temperature_c
        + config.temperature_cycle_amplitude * cycle
        + _ar1_noise(rng_base, n, config.temperature_noise_std, ar)
    )
    humidity = np.clip(
        config.base_humidity_pct
        - config.humidity_cycle_amplitude * cycle  # humid nights, dry afternoons
        + _ar1_noise(rng_base, n, config.humidity_noise_std, ar),
        0.0,
        100.0,
    )
    swing = config.current_cycle_fraction * current_cycle
    leakage = (
        config.base_leakage_ma * (1.0 + swing)
        + _ar1_noise(rng_base, n, config.leakage_noise_std, ar)
    )
    resistive = (
        config.base_resistive_ma * (1.0 + swing)
        + _ar1_noise(rng_base, n, config.resistive_noise_std, ar)
    )
    base_fundamental = config.fundamental_ratio * config.base_resistive_ma
    base_third = config.third_harmonic_ratio * config.base_resistive_ma
    fundamental = (
        base_fundamental * (1.0 + swing)
        + _ar1_noise(rng_base, n, config.fundamental_noise_std, ar)
    )
    third = (
        base_third * (1.0 + swing)
        + _ar1_noise(rng_base, n, config.third_harmonic_noise_std, ar)
    )

    onset = config.onset_index
    post = n - onset
    s = config.severity
    scenario = config.scenario
    if scenario is not FaultScenario.NONE and post > 0 and s > 0:
        u = np.arange(post) / max(post - 1, 1)  # 0 at onset, 1 at series end
        if scenario is FaultScenario.AGING_DRIFT:
            ramp = s * (0.5 * u + 0.5 * u**2)
            resistive[onset:] += config.base_resistive_ma * ramp
            third[onset:] += base_third * ramp
        elif scenario is FaultScenario.DAMP_STEP:
            shift = s * 0.35 * config.base_leakage_ma
            leakage[onset:] += shift * (0.5 + 0.5 * humidity[onset:] / 100.0)
        elif scenario is FaultScenario.SURFACE_SPIKES:
            spikes = rng_fault.random(post) < 0.7
            magnitude = s * config.base_leakage_ma * (
                0.5 + rng_fault.exponential(0.5, size=post)
            )
            leakage[onset:] += spikes * magnitude
        elif scenario is FaultScenario.OTHER_WANDER:
            steps = rng_fault.normal(0.0, s * 0.03 * base_fundamental, size=post)
            fundamental[onset:] += np.cumsum(steps)

    for channel in (leakage, resistive, fundamental, third):
        np.maximum(channel, _CURRENT_FLOOR, out=channel)

    fault_label = scenario.fault_class
    samples = []
    for t in range(n):
        label = FaultClass.NORMAL
        if scenario is not FaultScenario.NONE and t >= onset:
            label = fault_label
        samples.append(
            MonitoringSample(
                timestamp=config.start_timestamp + t * config.interval_seconds,
                leakage_current=float(leakage[t]),
                resistive_current=float(resistive[t]),
                resistive_fundamental=float(fundamental[t]),
                resistive_third_harmonic=float(third[t]),
                temperature=float(temperature[t]),
                humidity=float(humidity[t]),
                label=label,
            )
        )
    return MonitoringSeries(samples=samples, device_id=config.device_id)


def derive_seed(*parts: int) -> int:
    """Collapse an integer tuple into one reproducible 31-bit seed."""
    return int(np.random.default_rng(list(parts)).integers(0, 2**31 - 1))


def generate_corpus(
    series_per_class: int,
    template: GeneratorConfig,
    seed: int,
    rows_per_series: int = 40,
) -> tuple[np.ndarray, np.ndarray]:
    """Class-balanced labeled feature rows drawn from generated series.

    For each fault class, ``series_per_class`` series are generated with
    derived seeds; each contributes ``rows_per_series`` feature rows.
    Faulted series are sampled from the later post-onset region (the
    faults develop gradually, so rows right at the onset carry almost no
    signal); the Normal class samples anywhere.
    """
    if series_per_class < 1:
        raise ConfigError("series_per_class must be >= 1")
    if rows_per_series < 1:
        raise ConfigError("rows_per_series must be >= 1")
    seed = check_seed(seed)
    X_rows = []
    y_rows = []
    for class_idx, scenario in enumerate(FaultScenario):
        for i in range(series_per_class):
            config = replace(
                template,
                scenario=scenario,
                seed=derive_seed(seed, class_idx, i),
            )
            series = generate(config)
            matrix = series.feature_matrix()
            if scenario is FaultScenario.NONE:
                eligible = np.arange(len(series))
            else:
                margin = (config.n_samples - config.onset_index) // 3
                eligible = np.arange(config.onset_index + margin, config.n_samples)
            picker = np.random.default_rng([seed, class_idx, i, 2])
            rows = picker.choice(
                eligible, size=min(rows_per_series, eligible.size), replace=False
            )
            X_rows.append(matrix[np.sort(rows)])
            y_rows.append(
                np.full(rows.size, scenario.fault_class.index, dtype=np.intp)
            )
    return np.vstack(X_rows), np.concatenate(y_rows)


def corpus_series(X: np.ndarray, y: np.ndarray, template: GeneratorConfig) -> MonitoringSeries:
    """Repackage corpus rows as a labeled series (sequential timestamps) for CSV."""
    samples = [
        MonitoringSample(
            timestamp=template.start_timestamp + t * template.interval_seconds,
            leakage_current=float(row[0]),
            resistive_current=float(row[1]),
            resistive_fundamental=float(row[2]),
            resistive_third_harmonic=float(row[3]),
            temperature=float(row[4]),
            humidity=float(row[5]),
            label=list(FaultClass)[int(label)],
        )
        for t, (row, label) in enumerate(zip(X, y))
    ]
    return MonitoringSeries(samples=samples, device_id=template.device_id)
