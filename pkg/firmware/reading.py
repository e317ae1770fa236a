"""
One sample as written to the SD logs and carried in MQTT data messages.

Line format (one JSON object per line)::

    {"ride": "1a2b3c4d", "seq": 0, "t": 5.0, "utc": "2020-09-01T10:00:05.000Z",
     "fix": true, "lat": 52.52, "lon": 13.405,
     "ch": [{"id": 0, "adc": 512, "ppm": 99.29}]}

lat/lon are null when fix is false; ppm is null when the ADC saturated.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

RIDE_ID_PATTERN = re.compile(r"^[0-9a-f]{8}$")
_LINE_KEYS = ("ride", "seq", "t", "utc", "fix", "lat", "lon", "ch")


class ReadingFormatError(ValueError):
    """A log line or payload is not a valid reading."""


@dataclass(frozen=True)
class ChannelReading:
    channel_id: int
    adc: int
    ppm: float | None

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.channel_id, "adc": self.adc, "ppm": self.ppm}


@dataclass(frozen=True)
class Reading:
    """
    A timestamped, optionally geotagged sample of every channel.

    Attributes:
        ride_id (str): 8 lowercase hex digits chosen at boot.
        seq (int): Position within the ride, from 0.
        t (float): Seconds since boot.
        utc (str): Wall-clock time, ISO 8601 with milliseconds.
        fix_valid (bool): Whether lat/lon come from a valid GPS fix.
        lat (float | None): Degrees, None without a fix.
        lon (float | None): Degrees, None without a fix.
        channels (tuple[ChannelReading, ...]): One entry per sensor channel.
    """

    ride_id: str
    seq: int
    t: float
    utc: str
    fix_valid: bool
    lat: float | None
    lon: float | None
    channels: tuple[ChannelReading, ...]

    def __post_init__(self) -> None:
        if not RIDE_ID_PATTERN.match(self.ride_id):
            raise ReadingFormatError(
                f"ride id must be 8 lowercase hex digits, got {self.ride_id!r}"
            )
        if self.seq < 0:
            raise ReadingFormatError("seq must be >= 0")
        if self.t < 0:
            raise ReadingFormatError("t must be >= 0")
        if self.fix_valid:
            if self.lat is None or self.lon is None:
                raise ReadingFormatError("a fixed reading needs lat and lon")
            if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
                raise ReadingFormatError(f"position out of range: {self.lat}, {self.lon}")
        elif self.lat is not None or self.lon is not None:
            raise ReadingFormatError("a reading without fix must not carry a position")
        if not self.channels:
            raise ReadingFormatError("a reading needs at least one channel")
        for channel in self.channels:
            if channel.adc < 0:
                raise ReadingFormatError(f"channel {channel.channel_id}: negative adc")

    @property
    def ppm(self) -> float | None:
        """Concentration of the first channel."""
        return self.channels[0].ppm

    def to_dict(self) -> dict[str, Any]:
        return {
            "ride": self.ride_id,
            "seq": self.seq,
            "t": self.t,
            "utc": self.utc,
            "fix": self.fix_valid,
            "lat": self.lat,
            "lon": self.lon,
            "ch": [c.to_dict() for c in self.channels],
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Any) -> "Reading":
        """
        Build a reading from decoded JSON.

        Raises:
            ReadingFormatError: On missing keys or wrong types.
        """
        if not isinstance(data, dict):
            raise ReadingFormatError("reading must be a JSON object")
        missing = [k for k in _LINE_KEYS if k not in data]
        if missing:
            raise ReadingFormatError(f"missing keys: {', '.join(missing)}")
        if not isinstance(data["ride"], str) or not isinstance(data["utc"], str):
            raise ReadingFormatError("ride and utc must be strings")
        if not _is_int(data["seq"]) or not _is_number(data["t"]):
            raise ReadingFormatError("seq must be an integer and t a number")
        if not isinstance(data["fix"], bool):
            raise ReadingFormatError("fix must be a boolean")
        for key in ("lat", "lon"):
            if data[key] is not None and not _is_number(data[key]):
                raise ReadingFormatError(f"{key} must be a number or null")
        if not isinstance(data["ch"], list):
            raise ReadingFormatError("ch must be a list")

        channels = []
        for raw in data["ch"]:
            if not isinstance(raw, dict):
                raise ReadingFormatError(f"bad channel entry: {raw!r}")
            if not (_is_int(raw.get("id")) and _is_int(raw.get("adc"))):
                raise ReadingFormatError(f"bad channel entry: {raw!r}")
            ppm = raw.get("ppm")
            if ppm is not None and not _is_number(ppm):
                raise ReadingFormatError("ppm must be a number or null")
            channels.append(
                ChannelReading(raw["id"], raw["adc"], None if ppm is None else float(ppm))
            )

        return cls(
            ride_id=data["ride"],
            seq=data["seq"],
            t=float(data["t"]),
            utc=data["utc"],
            fix_valid=data["fix"],
            lat=None if data["lat"] is None else float(data["lat"]),
            lon=None if data["lon"] is None else float(data["lon"]),
            channels=tuple(channels),
        )

    @classmethod
    def from_line(cls, line: str | bytes) -> "Reading":
        try:
            data = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ReadingFormatError(f"not JSON: {e}") from None
        return cls.from_dict(data)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
