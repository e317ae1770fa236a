"""
Bike rides: straight legs between waypoints at constant speed, generated by
a random-waypoint model between dock zones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .field import distance_m, offset_position
from .zones import WifiZone


@dataclass(frozen=True)
class MobilityTrace:
    """
    Attributes:
        waypoints (tuple[tuple[float, float], ...]): (lat, lon) points, at least two.
        speed_mps (float): Constant ground speed.
        start_zone (str | None): Dock zone the ride leaves from.
        end_zone (str | None): Dock zone the ride ends in.
    """

    waypoints: tuple[tuple[float, float], ...]
    speed_mps: float
    start_zone: str | None = None
    end_zone: str | None = None

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("a trace needs at least two waypoints")
        if self.speed_mps <= 0:
            raise ValueError("speed_mps must be positive")

    @property
    def cumulative_m(self) -> np.ndarray:
        legs = [distance_m(*a, *b) for a, b in zip(self.waypoints, self.waypoints[1:])]
        return np.concatenate(([0.0], np.cumsum(legs)))

    @property
    def length_m(self) -> float:
        return float(self.cumulative_m[-1])

    @property
    def duration_s(self) -> float:
        return self.length_m / self.speed_mps

    @property
    def duration_ticks(self) -> int:
        """Whole seconds needed to reach the last waypoint."""
        return max(1, math.ceil(round(self.duration_s, 6)))

    def position_at(self, elapsed_s: float) -> tuple[float, float]:
        """Position after `elapsed_s` seconds; held at the ends."""
        travelled = min(max(elapsed_s, 0.0) * self.speed_mps, self.length_m)
        cumulative = self.cumulative_m
        lats = [w[0] for w in self.waypoints]
        lons = [w[1] for w in self.waypoints]
        lat = float(np.interp(travelled, cumulative, lats))
        lon = float(np.interp(travelled, cumulative, lons))
        return lat, lon

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MobilityTrace":
        return cls(
            waypoints=tuple((float(p[0]), float(p[1])) for p in data["waypoints"]),
            speed_mps=float(data["speed_mps"]),
            start_zone=data.get("start_zone"),
            end_zone=data.get("end_zone"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "waypoints": [list(p) for p in self.waypoints],
            "speed_mps": self.speed_mps,
            "start_zone": self.start_zone,
            "end_zone": self.end_zone,
        }


def random_point_in_zone(
    zone: WifiZone, rng: np.random.Generator, fraction: float = 0.5
) -> tuple[float, float]:
    """Uniform point within `fraction` of the zone radius."""
    r = zone.radius_m * fraction * math.sqrt(rng.random())
    theta = rng.uniform(0.0, 2 * math.pi)
    return offset_position(zone.lat, zone.lon, r * math.sin(theta), r * math.cos(theta))


def random_waypoint_trace(
    zones: Sequence[WifiZone],
    rng: np.random.Generator,
    start_zone: WifiZone | None = None,
    waypoints: int = 3,
    speed_mps: tuple[float, float] = (3.0, 6.0),
    roam_m: float = 1500.0,
) -> MobilityTrace:
    """
    A ride from a dock zone through random waypoints to a dock zone.

    Args:
        zones: Candidate dock zones.
        rng: Generator for every random choice.
        start_zone: Where the bike is parked; random if None.
        waypoints (int): Intermediate points.
        speed_mps: Speed range.
        roam_m (float): Half-width of the square around the start zone that
            intermediate points are drawn from.

    Returns:
        MobilityTrace: Starting inside `start_zone`, ending inside a random zone.
    """
    if not zones:
        raise ValueError("at least one zone is needed")
    if start_zone is None:
        start_zone = zones[int(rng.integers(len(zones)))]
    end_zone = zones[int(rng.integers(len(zones)))]

    points = [random_point_in_zone(start_zone, rng)]
    for _ in range(waypoints):
        north, east = rng.uniform(-roam_m, roam_m, size=2)
        points.append(offset_position(start_zone.lat, start_zone.lon, float(north), float(east)))
    points.append(random_point_in_zone(end_zone, rng))

    return MobilityTrace(
        waypoints=tuple(points),
        speed_mps=float(rng.uniform(*speed_mps)),
        start_zone=start_zone.zone_id,
        end_zone=end_zone.zone_id,
    )
