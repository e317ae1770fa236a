"""
Append-only reading store.

`JsonlReadingStore` keeps one IngestRecord per line in a text file and an
in-memory index rebuilt when the file is opened. Two sidecars live next to
it: `<store>.sessions` holds every accepted count header and
`<store>.quarantine` every payload that could not be parsed (base64) with the
reason. `MemoryReadingStore` has the same interface without files.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable

from firmware import ReadingFormatError

from .records import DuplicateRecordError, IngestRecord

logger = logging.getLogger(__name__)


class StoreError(OSError):
    """The store file could not be read or written."""


def utc_to_ms(utc: str) -> int:
    """Parse a reading timestamp such as 2020-09-01T10:00:05.000Z into epoch ms."""
    stamp = datetime.fromisoformat(utc.replace("Z", "+00:00"))
    return int(round(stamp.timestamp() * 1000))


@dataclass(frozen=True)
class StoreFilter:
    """
    Query dimensions; a record must match every one that is set.

    Attributes:
        bbox (tuple[float, float, float, float] | None): (min_lon, min_lat, max_lon, max_lat),
            inclusive. Records without a fix never match a bbox.
        start_ms (int | None): Earliest reading time, inclusive.
        end_ms (int | None): Latest reading time, inclusive.
        ride_id (str | None): Only this ride.
        device_id (str | None): Only this device.
    """

    bbox: tuple[float, float, float, float] | None = None
    start_ms: int | None = None
    end_ms: int | None = None
    ride_id: str | None = None
    device_id: str | None = None

    def __post_init__(self) -> None:
        if self.bbox is not None:
            min_lon, min_lat, max_lon, max_lat = self.bbox
            if min_lon > max_lon or min_lat > max_lat:
                raise ValueError(f"bbox minimum exceeds maximum: {self.bbox}")

    def matches(self, record: IngestRecord) -> bool:
        reading = record.reading
        if self.ride_id is not None and reading.ride_id != self.ride_id:
            return False
        if self.device_id is not None and record.device_id != self.device_id:
            return False
        if self.bbox is not None:
            if not reading.fix_valid or reading.lat is None or reading.lon is None:
                return False
            min_lon, min_lat, max_lon, max_lat = self.bbox
            if not (min_lon <= reading.lon <= max_lon and min_lat <= reading.lat <= max_lat):
                return False
        if self.start_ms is not None or self.end_ms is not None:
            at = utc_to_ms(reading.utc)
            if self.start_ms is not None and at < self.start_ms:
                return False
            if self.end_ms is not None and at > self.end_ms:
                return False
        return True


@dataclass(frozen=True)
class QuarantineEntry:
    topic: str
    payload: bytes
    reason: str
    received_at: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "topic": self.topic,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
            "reason": self.reason,
            "received_at": self.received_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QuarantineEntry":
        payload = base64.b64decode(data["payload_b64"])
        return cls(data["topic"], payload, data["reason"], data["received_at"])


class ReadingStore(ABC):
    """Interface shared by the store backends. Appends and queries are thread-safe."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._records: dict[tuple[str, str, int], IngestRecord] = {}
        self._headers: list[dict[str, Any]] = []
        self._quarantine: dict[tuple[str, bytes], QuarantineEntry] = {}

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def __contains__(self, key: object) -> bool:
        with self._lock:
            return key in self._records

    def append(self, record: IngestRecord) -> None:
        """
        Durably add one record.

        Raises:
            DuplicateRecordError: If its (device_id, ride_id, seq) is already stored.
            StoreError: If the write fails; the record is then not stored.
        """
        with self._lock:
            if record.key in self._records:
                raise DuplicateRecordError(f"already stored: {record.key}")
            self._persist_record(record)
            self._records[record.key] = record

    def query(self, store_filter: StoreFilter | None = None) -> list[IngestRecord]:
        """Matching records ordered by (ride_id, seq, device_id)."""
        with self._lock:
            records = list(self._records.values())
        if store_filter is not None:
            records = [r for r in records if store_filter.matches(r)]
        return sorted(records, key=lambda r: r.sort_key)

    def add_header(self, header: dict[str, Any]) -> None:
        with self._lock:
            self._persist_header(header)
            self._headers.append(dict(header))

    def headers(self) -> list[dict[str, Any]]:
        with self._lock:
            return [dict(h) for h in self._headers]

    def quarantine(self, entry: QuarantineEntry) -> bool:
        """
        Keep a payload that could not be ingested. The same payload on the same
        topic is kept once, with the reason and time of its first arrival.

        Returns:
            bool: False when this (topic, payload) was already quarantined.
        """
        key = (entry.topic, entry.payload)
        with self._lock:
            if key in self._quarantine:
                return False
            self._persist_quarantine(entry)
            self._quarantine[key] = entry
            return True

    def quarantined(self) -> list[QuarantineEntry]:
        with self._lock:
            return list(self._quarantine.values())

    def close(self) -> None:
        pass

    def __enter__(self) -> "ReadingStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    @abstractmethod
    def _persist_record(self, record: IngestRecord) -> None: ...

    @abstractmethod
    def _persist_header(self, header: dict[str, Any]) -> None: ...

    @abstractmethod
    def _persist_quarantine(self, entry: QuarantineEntry) -> None: ...


class MemoryReadingStore(ReadingStore):
    """Keeps everything in memory; used by the simulator and tests."""

    def _persist_record(self, record: IngestRecord) -> None:
        pass

    def _persist_header(self, header: dict[str, Any]) -> None:
        pass

    def _persist_quarantine(self, entry: QuarantineEntry) -> None:
        pass


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


class JsonlReadingStore(ReadingStore):
    """
    JSON-lines file store.

    Args:
        path (str | Path): Store file; created if missing.
        fsync (bool): Flush every append to disk before returning.

    Raises:
        StoreError: If the file cannot be opened or read.
    """

    def __init__(self, path: str | Path, fsync: bool = False) -> None:
        super().__init__()
        self.path = Path(path)
        self.sessions_path = _sidecar(self.path, ".sessions")
        self.quarantine_path = _sidecar(self.path, ".quarantine")
        self.fsync = fsync
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            for rows, target in (
                (self._load_lines(self.path), "records"),
                (self._load_lines(self.sessions_path), "headers"),
                (self._load_lines(self.quarantine_path), "quarantine"),
            ):
                self._index(rows, target)
        except OSError as e:
            raise StoreError(f"cannot open store {self.path}: {e}") from e
        logger.info("store %s opened with %d records", self.path, len(self._records))

    def __repr__(self) -> str:
        return f"JsonlReadingStore({str(self.path)!r}, records={len(self)})"

    @staticmethod
    def _load_lines(path: Path) -> list[str]:
        """Complete lines of `path`; a torn trailing line is cut off the file."""
        if not path.exists():
            path.touch()
            return []
        text = path.read_text(encoding="utf-8")
        if text and not text.endswith("\n"):
            keep = text.rfind("\n") + 1
            logger.warning("%s: dropping torn trailing line (%d bytes)", path, len(text) - keep)
            with path.open("r+", encoding="utf-8") as fh:
                fh.truncate(len(text[:keep].encode("utf-8")))
            text = text[:keep]
        return [line for line in text.split("\n") if line]

    def _index(self, lines: Iterable[str], target: str) -> None:
        for number, line in enumerate(lines, start=1):
            try:
                data = json.loads(line)
                if target == "records":
                    record = IngestRecord.from_dict(data)
                    self._records.setdefault(record.key, record)
                elif target == "headers":
                    self._headers.append(data)
                else:
                    entry = QuarantineEntry.from_dict(data)
                    self._quarantine.setdefault((entry.topic, entry.payload), entry)
            except (json.JSONDecodeError, ReadingFormatError, KeyError, TypeError, ValueError) as e:
                logger.warning("%s line %d unreadable, skipped: %s", target, number, e)

    def _write_line(self, path: Path, data: dict[str, Any]) -> None:
        line = json.dumps(data, separators=(",", ":")) + "\n"
        try:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())
        except OSError as e:
            raise StoreError(f"cannot append to {path}: {e}") from e

    def _persist_record(self, record: IngestRecord) -> None:
        self._write_line(self.path, record.to_dict())

    def _persist_header(self, header: dict[str, Any]) -> None:
        self._write_line(self.sessions_path, header)

    def _persist_quarantine(self, entry: QuarantineEntry) -> None:
        self._write_line(self.quarantine_path, entry.to_dict())


def open_store(path: str | Path | None) -> ReadingStore:
    """A JSON-lines store at `path`, or an in-memory one for None."""
    if path is None:
        return MemoryReadingStore()
    return JsonlReadingStore(path)
