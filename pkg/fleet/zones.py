"""
Wi-Fi dock zones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .field import distance_m


@dataclass(frozen=True)
class WifiZone:
    zone_id: str
    ssid: str
    lat: float
    lon: float
    radius_m: float

    def __post_init__(self) -> None:
        if self.radius_m <= 0:
            raise ValueError(f"zone {self.zone_id}: radius_m must be positive")
        if not self.ssid:
            raise ValueError(f"zone {self.zone_id}: ssid must not be empty")

    def contains(self, lat: float, lon: float) -> bool:
        return distance_m(self.lat, self.lon, lat, lon) <= self.radius_m

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "WifiZone":
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "zone_id": self.zone_id,
            "ssid": self.ssid,
            "lat": self.lat,
            "lon": self.lon,
            "radius_m": self.radius_m,
        }


def visible_ssids(zones: Sequence[WifiZone], lat: float, lon: float) -> list[str]:
    """SSIDs of every zone covering the point, in zone order, without repeats."""
    seen: list[str] = []
    for zone in zones:
        if zone.contains(lat, lon) and zone.ssid not in seen:
            seen.append(zone.ssid)
    return seen
