"""
Simulation scenarios: the SimConfig dataclass and its JSON form.

A scenario file mirrors SimConfig with snake_case keys; omitted keys take the
defaults of `default_scenario()`, unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any

from mqttwire import RetryPolicy
from sensor import ChannelSpec, SensorCurve

from .energy import EnergyProfile
from .field import PollutionField, PollutionSource
from .mobility import MobilityTrace
from .zones import WifiZone

# 2020-09-01T10:00:00Z
DEFAULT_START_MS = 1_598_954_400_000
DEFAULT_SSID = "ardueco-dock"


class ScenarioError(ValueError):
    """A scenario value is invalid; `field` names it."""

    def __init__(self, field_name: str, message: str) -> None:
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class RideSpec:
    """A scripted ride for one device, used instead of generated rides."""

    device: int
    start_s: float
    trace: MobilityTrace

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RideSpec":
        trace_data = {k: v for k, v in data.items() if k not in ("device", "start_s")}
        return cls(int(data["device"]), float(data["start_s"]), MobilityTrace.from_dict(trace_data))

    def to_dict(self) -> dict[str, Any]:
        return {"device": self.device, "start_s": self.start_s, **self.trace.to_dict()}


def _default_zones() -> tuple[WifiZone, ...]:
    return (
        WifiZone("stazione", DEFAULT_SSID, 45.4180, 11.8800, 120.0),
        WifiZone("prato", DEFAULT_SSID, 45.3985, 11.8765, 120.0),
        WifiZone("portello", DEFAULT_SSID, 45.4095, 11.8930, 120.0),
    )


def _default_field() -> PollutionField:
    return PollutionField(
        background_ppm=1.0,
        sources=(
            PollutionSource(45.4120, 11.8790, amplitude_ppm=30.0, sigma_m=250.0),
            PollutionSource(45.4040, 11.8880, amplitude_ppm=15.0, sigma_m=400.0),
        ),
    )


def _default_channels() -> tuple[ChannelSpec, ...]:
    return (ChannelSpec(0, SensorCurve(adc_max=4095), "CO"),)


@dataclass(frozen=True)
class SimConfig:
    """
    Everything a simulation run depends on.

    Attributes:
        seed (int): Root of every random stream.
        n_devices (int): Fleet size.
        duration_s (int): Window in which rides may start.
        drain_s (int): Extra time after the last ride for uploads to finish.
        drop_probability (float): PUBLISH/PUBACK loss probability.
        latency_ms (tuple[int, int]): Link latency range.
        noise_sd (float): ADC read noise in counts.
        qos (int): Upload QoS.
        sample_period_s (int): Device sampling period.
        gps_fix_delay_s (int): Seconds without a fix at the start of each ride.
        upload_retry_s (int): Wait before pressing the button again after a failed upload.
        start_ms (int): Wall-clock epoch ms of simulation time 0.
        ssid (str): Network the devices are configured for.
        auth_token (str | None): Token devices send; also required by the broker when set.
        field (PollutionField): Ground-truth CO.
        zones (tuple[WifiZone, ...]): Dock zones.
        channels (tuple[ChannelSpec, ...]): Sensor channels of every device.
        energy (EnergyProfile): Battery model.
        retry (RetryPolicy): QoS 1 retransmission policy.
        rides (tuple[RideSpec, ...] | None): Scripted rides; generated when None.
        speed_mps (tuple[float, float]): Generated ride speed range.
        waypoints_per_ride (int): Intermediate waypoints of generated rides.
        pause_s (tuple[int, int]): Parked time between generated rides.
        roam_m (float): Reach of generated rides around their start zone.
    """

    seed: int = 1
    n_devices: int = 10
    duration_s: int = 3600
    drain_s: int = 600
    drop_probability: float = 0.0
    latency_ms: tuple[int, int] = (20, 120)
    noise_sd: float = 2.0
    qos: int = 1
    sample_period_s: int = 5
    gps_fix_delay_s: int = 0
    upload_retry_s: int = 30
    start_ms: int = DEFAULT_START_MS
    ssid: str = DEFAULT_SSID
    auth_token: str | None = None
    field: PollutionField = dc_field(default_factory=_default_field)
    zones: tuple[WifiZone, ...] = dc_field(default_factory=_default_zones)
    channels: tuple[ChannelSpec, ...] = dc_field(default_factory=_default_channels)
    energy: EnergyProfile = dc_field(default_factory=EnergyProfile)
    retry: RetryPolicy = dc_field(default_factory=RetryPolicy)
    rides: tuple[RideSpec, ...] | None = None
    speed_mps: tuple[float, float] = (3.0, 6.0)
    waypoints_per_ride: int = 3
    pause_s: tuple[int, int] = (60, 300)
    roam_m: float = 1500.0

    def __post_init__(self) -> None:
        if self.n_devices < 1:
            raise ScenarioError("n_devices", "must be >= 1")
        if self.duration_s <= 0:
            raise ScenarioError("duration_s", "must be positive")
        if self.drain_s < 0:
            raise ScenarioError("drain_s", "must be >= 0")
        if not 0.0 <= self.drop_probability < 1.0:
            raise ScenarioError("drop_probability", "must be in [0, 1)")
        low, high = self.latency_ms
        if low < 0 or high < low:
            raise ScenarioError("latency_ms", "must be [min, max] with 0 <= min <= max")
        if self.noise_sd < 0:
            raise ScenarioError("noise_sd", "must be >= 0")
        if self.qos not in (0, 1):
            raise ScenarioError("qos", "must be 0 or 1")
        if self.sample_period_s <= 0:
            raise ScenarioError("sample_period_s", "must be positive")
        if self.gps_fix_delay_s < 0:
            raise ScenarioError("gps_fix_delay_s", "must be >= 0")
        if self.upload_retry_s <= 0:
            raise ScenarioError("upload_retry_s", "must be positive")
        if not self.zones:
            raise ScenarioError("zones", "at least one dock zone is needed")
        if not self.channels:
            raise ScenarioError("channels", "at least one channel is needed")
        if self.speed_mps[0] <= 0 or self.speed_mps[1] < self.speed_mps[0]:
            raise ScenarioError("speed_mps", "must be [min, max] with 0 < min <= max")
        if self.waypoints_per_ride < 0:
            raise ScenarioError("waypoints_per_ride", "must be >= 0")
        if self.pause_s[0] < 0 or self.pause_s[1] < self.pause_s[0]:
            raise ScenarioError("pause_s", "must be [min, max] with 0 <= min <= max")
        for i, ride in enumerate(self.rides or ()):
            if not 0 <= ride.device < self.n_devices:
                raise ScenarioError(f"rides[{i}].device", f"must be in 0..{self.n_devices - 1}")
            if ride.start_s < 0:
                raise ScenarioError(f"rides[{i}].start_s", "must be >= 0")

    @property
    def device_ids(self) -> list[str]:
        width = max(3, len(str(self.n_devices)))
        return [f"bike-{i + 1:0{width}d}" for i in range(self.n_devices)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "n_devices": self.n_devices,
            "duration_s": self.duration_s,
            "drain_s": self.drain_s,
            "drop_probability": self.drop_probability,
            "latency_ms": list(self.latency_ms),
            "noise_sd": self.noise_sd,
            "qos": self.qos,
            "sample_period_s": self.sample_period_s,
            "gps_fix_delay_s": self.gps_fix_delay_s,
            "upload_retry_s": self.upload_retry_s,
            "start_ms": self.start_ms,
            "ssid": self.ssid,
            "auth_token": self.auth_token,
            "field": self.field.to_dict(),
            "zones": [z.to_dict() for z in self.zones],
            "channels": [c.to_dict() for c in self.channels],
            "energy": self.energy.to_dict(),
            "retry": {f.name: getattr(self.retry, f.name) for f in fields(self.retry)},
            "rides": None if self.rides is None else [r.to_dict() for r in self.rides],
            "speed_mps": list(self.speed_mps),
            "waypoints_per_ride": self.waypoints_per_ride,
            "pause_s": list(self.pause_s),
            "roam_m": self.roam_m,
        }


_SCALARS = {
    "seed": int, "n_devices": int, "duration_s": int, "drain_s": int,
    "drop_probability": float, "noise_sd": float, "qos": int, "sample_period_s": int,
    "gps_fix_delay_s": int, "upload_retry_s": int, "start_ms": int, "ssid": str,
    "waypoints_per_ride": int, "roam_m": float,
}
_PAIRS = {"latency_ms": int, "speed_mps": float, "pause_s": int}


def _scalar(name: str, value: Any, kind: type) -> Any:
    if isinstance(value, bool):
        raise ScenarioError(name, f"expected {kind.__name__}, got boolean")
    if kind is int and not isinstance(value, int):
        raise ScenarioError(name, f"expected integer, got {type(value).__name__}")
    if kind is float and not isinstance(value, (int, float)):
        raise ScenarioError(name, f"expected number, got {type(value).__name__}")
    if kind is str and not isinstance(value, str):
        raise ScenarioError(name, f"expected string, got {type(value).__name__}")
    return kind(value)


def _nested(name: str, build: Any, value: Any) -> Any:
    try:
        return build(value)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(name, str(e)) from None


def scenario_from_dict(data: Any) -> SimConfig:
    """
    Build a SimConfig from a decoded scenario document.

    Raises:
        ScenarioError: Naming the first offending field.
    """
    if not isinstance(data, dict):
        raise ScenarioError("scenario", "must be a JSON object")
    known = {f.name for f in fields(SimConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ScenarioError(unknown[0], "unknown key")

    values: dict[str, Any] = {}
    for name, value in data.items():
        if name in _SCALARS:
            values[name] = _scalar(name, value, _SCALARS[name])
        elif name in _PAIRS:
            if not isinstance(value, list) or len(value) != 2:
                raise ScenarioError(name, "expected [min, max]")
            values[name] = tuple(_scalar(name, v, _PAIRS[name]) for v in value)
        elif name == "auth_token":
            values[name] = None if value is None else _scalar(name, value, str)
        elif name == "field":
            values[name] = _nested(name, PollutionField.from_dict, value)
        elif name == "zones":
            values[name] = _nested(name, lambda v: tuple(WifiZone.from_dict(z) for z in v), value)
        elif name == "channels":
            values[name] = _nested(
                name, lambda v: tuple(ChannelSpec.from_dict(c) for c in v), value
            )
        elif name == "energy":
            values[name] = _nested(name, EnergyProfile.from_dict, value)
        elif name == "retry":
            values[name] = _nested(name, RetryPolicy.from_dict, value)
        elif name == "rides":
            values[name] = None if value is None else _nested(
                name, lambda v: tuple(RideSpec.from_dict(r) for r in v), value
            )
    return SimConfig(**values)


def load_scenario(path: str | Path) -> SimConfig:
    """
    Read a scenario file.

    Raises:
        OSError: If the file cannot be read.
        ScenarioError: If it is not valid JSON or fails validation.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("scenario", f"not valid JSON: {e}") from None
    return scenario_from_dict(data)


def default_scenario(**overrides: Any) -> SimConfig:
    """10 devices, 3 dock zones, 2 CO sources, one simulated hour."""
    return replace(SimConfig(), **overrides)
