"""
MQ-7 carbon monoxide sensor model.

The sensor sits in a voltage divider with a load resistor RL. The ADC reads
the voltage across RL, from which the sensor resistance Rs follows:

    v   = counts / adc_max * vcc
    Rs  = RL * (vcc - v) / v
    ppm = a * (Rs / R0) ** b

The firmware goes counts -> ppm; the simulator goes ppm -> counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import numpy as np

logger = logging.getLogger(__name__)


class SensorRangeError(ValueError):
    """ADC counts outside the open interval where the curve is defined."""


class SaturatedLow(SensorRangeError):
    """Zero counts: zero voltage, Rs unbounded."""


class SaturatedHigh(SensorRangeError):
    """Full-scale counts: Rs is zero."""


@dataclass(frozen=True)
class SensorCurve:
    """
    Power-law calibration curve of an MQ-series sensor.

    Attributes:
        a (float): ppm at Rs == R0.
        b (float): Log-log slope, strictly negative.
        r0 (float): Baseline resistance in clean air, ohms.
        rl (float): Load resistance, ohms.
        vcc (float): Supply voltage.
        adc_max (int): Full-scale ADC count.
    """

    a: float = 99.0
    b: float = -1.5
    r0: float = 10000.0
    rl: float = 10000.0
    vcc: float = 5.0
    adc_max: int = 1023

    def __post_init__(self) -> None:
        for name in ("a", "r0", "rl", "vcc"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive number, got {value!r}")
        if not (isinstance(self.b, (int, float)) and math.isfinite(self.b) and self.b < 0):
            raise ValueError(f"b must be a negative number, got {self.b!r}")
        if isinstance(self.adc_max, bool) or not isinstance(self.adc_max, int) or self.adc_max < 1:
            raise ValueError(f"adc_max must be an integer >= 1, got {self.adc_max!r}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SensorCurve":
        """Build a curve from a `sensor` config object; missing keys take defaults."""
        unknown = set(data) - {"a", "b", "r0", "rl", "vcc", "adc_max"}
        if unknown:
            raise ValueError(f"unknown sensor keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "r0": self.r0,
            "rl": self.rl,
            "vcc": self.vcc,
            "adc_max": self.adc_max,
        }


@dataclass(frozen=True)
class ChannelSpec:
    """One analog input: an id, a calibration curve and a label such as 'CO'."""

    channel_id: int = 0
    curve: SensorCurve = field(default_factory=SensorCurve)
    label: str = "CO"

    def __post_init__(self) -> None:
        if isinstance(self.channel_id, bool) or not isinstance(self.channel_id, int):
            raise ValueError(f"channel_id must be an integer, got {self.channel_id!r}")
        if self.channel_id < 0:
            raise ValueError(f"channel_id must be non-negative, got {self.channel_id}")
        if not self.label:
            raise ValueError("channel label must not be empty")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChannelSpec":
        curve = SensorCurve.from_dict(data.get("sensor", {}))
        return cls(
            channel_id=data.get("channel_id", 0),
            curve=curve,
            label=data.get("label", "CO"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {"channel_id": self.channel_id, "label": self.label, "sensor": self.curve.to_dict()}


def adc_to_ppm(counts: int, curve: SensorCurve) -> float:
    """
    Convert raw ADC counts to a concentration.

    Args:
        counts (int): Reading in the open interval (0, adc_max).
        curve (SensorCurve): Calibration to apply.

    Returns:
        float: Concentration in ppm, finite and positive.

    Raises:
        SaturatedLow: counts == 0.
        SaturatedHigh: counts == adc_max.
        SensorRangeError: counts outside [0, adc_max].
    """
    if counts < 0 or counts > curve.adc_max:
        raise SensorRangeError(f"counts {counts} outside [0, {curve.adc_max}]")
    if counts == 0:
        raise SaturatedLow("zero counts: sensor resistance unbounded")
    if counts == curve.adc_max:
        raise SaturatedHigh("full-scale counts: sensor resistance is zero")

    v = counts / curve.adc_max * curve.vcc
    rs = curve.rl * (curve.vcc - v) / v
    return curve.a * (rs / curve.r0) ** curve.b


def ppm_to_adc(ppm: float, curve: SensorCurve) -> int:
    """
    Inverse of adc_to_ppm, rounded to the nearest count.

    The result is clamped to [1, adc_max - 1] so it always converts back.
    """
    if not ppm > 0:
        raise ValueError(f"ppm must be positive, got {ppm}")
    rs = curve.r0 * (ppm / curve.a) ** (1.0 / curve.b)
    counts = curve.adc_max * curve.rl / (rs + curve.rl)
    return int(np.clip(np.rint(counts), 1, curve.adc_max - 1))


def sample_with_noise(
    ppm_true: float,
    curve: SensorCurve,
    noise_sd: float,
    rng: np.random.Generator,
) -> int:
    """
    Counts the ADC would report for `ppm_true`, with Gaussian read noise.

    Args:
        ppm_true (float): Ground-truth concentration.
        curve (SensorCurve): Calibration of the simulated sensor.
        noise_sd (float): Standard deviation of the noise, in counts.
        rng (np.random.Generator): Seeded generator.

    Returns:
        int: Noisy counts clamped to [1, adc_max - 1].
    """
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    counts = ppm_to_adc(ppm_true, curve)
    if noise_sd == 0:
        return counts
    noisy = counts + int(np.rint(rng.normal(0.0, noise_sd)))
    return int(np.clip(noisy, 1, curve.adc_max - 1))


def calibrate_r0(counts: int, reference_ppm: float, curve: SensorCurve) -> SensorCurve:
    """
    Derive R0 from a reading taken at a known concentration.

    MQ sensors are usually calibrated in clean air after burn-in: the measured
    Rs at the reference concentration fixes R0 for the given a and b.

    Returns:
        SensorCurve: `curve` with r0 replaced.
    """
    if not reference_ppm > 0:
        raise ValueError(f"reference_ppm must be positive, got {reference_ppm}")
    if counts <= 0:
        raise SaturatedLow("cannot calibrate from zero counts")
    if counts >= curve.adc_max:
        raise SaturatedHigh("cannot calibrate from full-scale counts")
    v = counts / curve.adc_max * curve.vcc
    rs = curve.rl * (curve.vcc - v) / v
    ratio = (reference_ppm / curve.a) ** (1.0 / curve.b)
    r0 = rs / ratio
    logger.info("calibrated r0=%.1f ohm from %d counts at %.3f ppm", r0, counts, reference_ppm)
    return replace(curve, r0=r0)


def recalibrate_ppm(counts: Iterable[int], curve: SensorCurve) -> list[float | None]:
    """Re-derive ppm from stored raw counts with a new curve; saturated counts give None."""
    result: list[float | None] = []
    for c in counts:
        try:
            result.append(adc_to_ppm(c, curve))
        except SensorRangeError:
            result.append(None)
    return result
