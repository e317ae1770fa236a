"""
Synthetic CO field: a background level plus Gaussian sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

EARTH_RADIUS_M = 6371008.8


def distance_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Equirectangular distance in meters; accurate at city scale."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    x = np.radians(lon2 - lon1) * np.cos((phi1 + phi2) / 2)
    y = phi2 - phi1
    return float(EARTH_RADIUS_M * np.hypot(x, y))


def offset_position(lat: float, lon: float, north_m: float, east_m: float) -> tuple[float, float]:
    """Move a point by a metric offset (same approximation as `distance_m`)."""
    new_lat = lat + np.degrees(north_m / EARTH_RADIUS_M)
    new_lon = lon + np.degrees(east_m / (EARTH_RADIUS_M * np.cos(np.radians(lat))))
    return float(new_lat), float(new_lon)


@dataclass(frozen=True)
class TimeProfile:
    """Amplitude multiplier over time, linearly interpolated and held at the ends."""

    times_s: tuple[float, ...]
    factors: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.times_s or len(self.times_s) != len(self.factors):
            raise ValueError("times_s and factors must be non-empty and the same length")
        if any(b <= a for a, b in zip(self.times_s, self.times_s[1:])):
            raise ValueError("times_s must be strictly increasing")
        if any(f < 0 for f in self.factors):
            raise ValueError("factors must be >= 0")

    def factor(self, t: float) -> float:
        return float(np.interp(t, self.times_s, self.factors))


@dataclass(frozen=True)
class PollutionSource:
    lat: float
    lon: float
    amplitude_ppm: float
    sigma_m: float
    profile: TimeProfile | None = None

    def __post_init__(self) -> None:
        if self.amplitude_ppm < 0:
            raise ValueError("amplitude_ppm must be >= 0")
        if self.sigma_m <= 0:
            raise ValueError("sigma_m must be positive")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"source position out of range: {self.lat}, {self.lon}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PollutionSource":
        fields = dict(data)
        profile = fields.pop("profile", None)
        if profile is not None:
            fields["profile"] = TimeProfile(tuple(profile["times_s"]), tuple(profile["factors"]))
        return cls(**fields)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "lat": self.lat,
            "lon": self.lon,
            "amplitude_ppm": self.amplitude_ppm,
            "sigma_m": self.sigma_m,
        }
        if self.profile is not None:
            data["profile"] = {
                "times_s": list(self.profile.times_s),
                "factors": list(self.profile.factors),
            }
        return data


@dataclass(frozen=True)
class PollutionField:
    background_ppm: float = 1.0
    sources: tuple[PollutionSource, ...] = ()

    def __post_init__(self) -> None:
        if self.background_ppm < 0:
            raise ValueError("background_ppm must be >= 0")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PollutionField":
        return cls(
            background_ppm=data.get("background_ppm", 1.0),
            sources=tuple(PollutionSource.from_dict(s) for s in data.get("sources", [])),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "background_ppm": self.background_ppm,
            "sources": [s.to_dict() for s in self.sources],
        }


def field_sample(field: PollutionField, lat: float, lon: float, t: float = 0.0) -> float:
    """
    Ground-truth CO concentration.

    Args:
        field (PollutionField): The field.
        lat (float): Latitude, degrees.
        lon (float): Longitude, degrees.
        t (float): Seconds since simulation start (drives time profiles).

    Returns:
        float: background + sum of amplitude * exp(-d^2 / (2 sigma^2)).
    """
    if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
        raise ValueError(f"position out of range: {lat}, {lon}")
    if not field.sources:
        return field.background_ppm
    d = np.array([distance_m(lat, lon, s.lat, s.lon) for s in field.sources])
    sigma = np.array([s.sigma_m for s in field.sources])
    amplitude = np.array([
        s.amplitude_ppm * (s.profile.factor(t) if s.profile is not None else 1.0)
        for s in field.sources
    ])
    return float(field.background_ppm + np.sum(amplitude * np.exp(-(d ** 2) / (2 * sigma ** 2))))
