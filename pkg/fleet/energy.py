"""
Battery accounting with optional deep sleep between rides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class EnergyProfile:
    """
    Attributes:
        active_ma (float): Draw while sampling or uploading.
        sleep_ma (float): Draw in deep sleep.
        battery_mah (float): Capacity.
        deep_sleep_enabled (bool): Without it, idle time draws active_ma.
    """

    active_ma: float = 150.0
    sleep_ma: float = 5.0
    battery_mah: float = 2000.0
    deep_sleep_enabled: bool = False

    def __post_init__(self) -> None:
        if self.active_ma <= 0 or self.sleep_ma <= 0 or self.battery_mah <= 0:
            raise ValueError("active_ma, sleep_ma and battery_mah must be positive")
        if self.sleep_ma > self.active_ma:
            raise ValueError("sleep_ma must not exceed active_ma")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EnergyProfile":
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "active_ma": self.active_ma,
            "sleep_ma": self.sleep_ma,
            "battery_mah": self.battery_mah,
            "deep_sleep_enabled": self.deep_sleep_enabled,
        }


@dataclass(frozen=True)
class EnergyReport:
    consumed_mah: float
    remaining_mah: float
    lifetime_h: float
    depleted: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "consumed_mah": self.consumed_mah,
            "remaining_mah": self.remaining_mah,
            "lifetime_h": self.lifetime_h,
            "depleted": self.depleted,
        }


def energy_account(profile: EnergyProfile, active_s: float, sleep_s: float) -> EnergyReport:
    """
    Charge used over `active_s` busy and `sleep_s` idle seconds.

    Lifetime is the battery capacity over the average current of this mix;
    with no elapsed time it is the all-active lifetime.
    """
    if active_s < 0 or sleep_s < 0:
        raise ValueError("durations must be >= 0")
    idle_ma = profile.sleep_ma if profile.deep_sleep_enabled else profile.active_ma
    consumed = (profile.active_ma * active_s + idle_ma * sleep_s) / 3600
    total_h = (active_s + sleep_s) / 3600
    average_ma = consumed / total_h if total_h > 0 else profile.active_ma
    return EnergyReport(
        consumed_mah=consumed,
        remaining_mah=max(profile.battery_mah - consumed, 0.0),
        lifetime_h=profile.battery_mah / average_ma,
        depleted=consumed > profile.battery_mah,
    )
