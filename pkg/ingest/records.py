"""
Server-side record types: stored readings, ride summaries and grid cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from firmware import Reading, ReadingFormatError


class DuplicateRecordError(ValueError):
    """A record with the same (device_id, ride_id, seq) is already stored."""


class RideNotFoundError(KeyError):
    """No reading or header has been seen for this ride."""


@dataclass(frozen=True)
class IngestRecord:
    """
    A reading as the server keeps it.

    Attributes:
        device_id (str): Device that published it (from the topic).
        reading (Reading): The reading row.
        server_received_at (int): Arrival time, ms.
    """

    device_id: str
    reading: Reading
    server_received_at: int

    def __post_init__(self) -> None:
        if not self.device_id:
            raise ValueError("device_id must not be empty")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.device_id, self.reading.ride_id, self.reading.seq)

    @property
    def sort_key(self) -> tuple[str, int, str]:
        return (self.reading.ride_id, self.reading.seq, self.device_id)

    @property
    def ride_id(self) -> str:
        return self.reading.ride_id

    @property
    def seq(self) -> int:
        return self.reading.seq

    @property
    def ppm(self) -> float | None:
        return self.reading.ppm

    def to_dict(self) -> dict[str, Any]:
        data = self.reading.to_dict()
        data["device_id"] = self.device_id
        data["server_received_at"] = self.server_received_at
        return data

    @classmethod
    def from_dict(cls, data: Any) -> "IngestRecord":
        if not isinstance(data, dict):
            raise ReadingFormatError("record must be a JSON object")
        fields = dict(data)
        device_id = fields.pop("device_id", None)
        received = fields.pop("server_received_at", None)
        received_ok = isinstance(received, int) and not isinstance(received, bool)
        if not isinstance(device_id, str) or not received_ok:
            raise ReadingFormatError("record needs device_id and integer server_received_at")
        return cls(device_id, Reading.from_dict(fields), received)


class RideStatus(Enum):
    PENDING = "pending"
    COMPLETE = "complete"
    OVERCOMPLETE = "overcomplete"


@dataclass(frozen=True)
class RideSummary:
    """
    How much of a ride has arrived compared with what its headers announced.

    Attributes:
        ride_id (str): The ride.
        device_id (str): Its device.
        expected_count (int | None): Largest first_seq + count over its headers.
        received_count (int): Distinct readings stored.
        first_utc (str | None): Earliest reading time seen.
        last_utc (str | None): Latest reading time seen.
    """

    ride_id: str
    device_id: str
    expected_count: int | None
    received_count: int
    first_utc: str | None = None
    last_utc: str | None = None

    @property
    def status(self) -> RideStatus:
        if self.expected_count is not None:
            if self.received_count == self.expected_count:
                return RideStatus.COMPLETE
            if self.received_count > self.expected_count:
                return RideStatus.OVERCOMPLETE
        return RideStatus.PENDING

    def to_dict(self) -> dict[str, Any]:
        return {
            "ride_id": self.ride_id,
            "device_id": self.device_id,
            "expected_count": self.expected_count,
            "received_count": self.received_count,
            "first_utc": self.first_utc,
            "last_utc": self.last_utc,
            "status": self.status.value,
        }


@dataclass(frozen=True)
class GridCell:
    cell_id: str
    count: int
    mean_ppm: float
    min_ppm: float
    max_ppm: float

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("a cell holds at least one reading")

    def to_dict(self) -> dict[str, Any]:
        return {
            "cell_id": self.cell_id,
            "count": self.count,
            "mean_ppm": self.mean_ppm,
            "min_ppm": self.min_ppm,
            "max_ppm": self.max_ppm,
        }
