"""
Per-message ingest handler.

Subscribed to `ardueco/+/session` and `ardueco/+/data` (or hooked straight
into the broker), it stores readings exactly once per (device, ride, seq) and
tracks each ride against the counts its headers announced.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable

from firmware import Reading, ReadingFormatError
from firmware.reading import RIDE_ID_PATTERN
from mqttwire import Broker

from .records import DuplicateRecordError, IngestRecord, RideNotFoundError, RideSummary
from .store import MemoryReadingStore, QuarantineEntry, ReadingStore

logger = logging.getLogger(__name__)

TOPIC_PATTERN = re.compile(r"^ardueco/([^/]+)/(session|data)$")
SESSION_FILTER = "ardueco/+/session"
DATA_FILTER = "ardueco/+/data"


def _wall_clock_ms() -> int:
    return int(time.time() * 1000)


def parse_header(payload: bytes) -> dict[str, Any]:
    """
    Validate a count header.

    Raises:
        ValueError: With the reason the header is unusable.
    """
    try:
        header = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ValueError(f"header is not JSON: {e}") from None
    if not isinstance(header, dict):
        raise ValueError("header must be a JSON object")
    ride_id = header.get("ride_id")
    if not isinstance(ride_id, str) or not RIDE_ID_PATTERN.match(ride_id):
        raise ValueError(f"bad ride_id {ride_id!r}")
    if not isinstance(header.get("device_id"), str):
        raise ValueError("header needs a device_id")
    for key, default in (("count", None), ("first_seq", 0)):
        value = header.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ValueError(f"{key} must be a non-negative integer")
    return {
        "ride_id": ride_id,
        "device_id": header["device_id"],
        "count": header["count"],
        "first_seq": header.get("first_seq", 0),
    }


@dataclass
class _RideTally:
    expected: int | None = None
    received: int = 0
    first_utc: str | None = None
    last_utc: str | None = None


class IngestService:
    """
    Stores readings and keeps ride completeness up to date.

    Attributes:
        store (ReadingStore): Where records, headers and quarantined payloads go.
        ignored_topics (int): Messages whose topic is not an ardueco topic.
        duplicates (int): Data messages already stored (at-least-once redelivery).
    """

    def __init__(
        self, store: ReadingStore | None = None, clock: Callable[[], int] = _wall_clock_ms
    ) -> None:
        self.store = store if store is not None else MemoryReadingStore()
        self.clock = clock
        self.ignored_topics = 0
        self.duplicates = 0
        self._lock = threading.Lock()
        self._rides: dict[tuple[str, str], _RideTally] = {}
        for record in self.store.query():
            self._count(record)
        for header in self.store.headers():
            self._apply_header(header)

    @property
    def quarantined(self) -> int:
        return len(self.store.quarantined())

    def attach(self, broker: Broker) -> None:
        """Receive every publish the broker accepts."""
        broker.add_hook(self.on_message)

    def _tally(self, device_id: str, ride_id: str) -> _RideTally:
        return self._rides.setdefault((device_id, ride_id), _RideTally())

    def _count(self, record: IngestRecord) -> None:
        tally = self._tally(record.device_id, record.ride_id)
        tally.received += 1
        utc = record.reading.utc
        if tally.first_utc is None or utc < tally.first_utc:
            tally.first_utc = utc
        if tally.last_utc is None or utc > tally.last_utc:
            tally.last_utc = utc

    def _apply_header(self, header: dict[str, Any]) -> None:
        tally = self._tally(header["device_id"], header["ride_id"])
        announced = header.get("first_seq", 0) + header["count"]
        tally.expected = announced if tally.expected is None else max(tally.expected, announced)

    def _quarantine(self, topic: str, payload: bytes, reason: str, now: int) -> None:
        if self.store.quarantine(QuarantineEntry(topic, bytes(payload), reason, now)):
            logger.warning("quarantined message on %s: %s", topic, reason)
        else:
            logger.debug("message on %s already quarantined", topic)

    def on_message(self, topic: str, payload: bytes, received_at: int | None = None) -> None:
        """
        Handle one published message. Never raises on payload content.

        Args:
            topic (str): `ardueco/<device_id>/session` or `ardueco/<device_id>/data`.
            payload (bytes): Count header or reading line.
            received_at (int | None): Arrival time in ms; the clock is read when None.

        Raises:
            StoreError: If the store cannot persist the message; nothing is recorded.
        """
        match = TOPIC_PATTERN.match(topic)
        if match is None:
            with self._lock:
                self.ignored_topics += 1
            logger.debug("ignoring topic %s", topic)
            return
        device_id, kind = match.groups()
        now = self.clock() if received_at is None else received_at

        with self._lock:
            if kind == "session":
                try:
                    header = parse_header(payload)
                except ValueError as e:
                    self._quarantine(topic, payload, str(e), now)
                    return
                if header["device_id"] != device_id:
                    reason = f"header device {header['device_id']!r} on topic of {device_id!r}"
                    self._quarantine(topic, payload, reason, now)
                    return
                self.store.add_header(header)
                self._apply_header(header)
                logger.debug(
                    "%s: ride %s announces %d", device_id, header["ride_id"], header["count"]
                )
                return

            try:
                reading = Reading.from_line(payload)
            except ReadingFormatError as e:
                self._quarantine(topic, payload, str(e), now)
                return
            record = IngestRecord(device_id, reading, now)
            try:
                self.store.append(record)
            except DuplicateRecordError:
                self.duplicates += 1
                logger.debug("%s: duplicate %s/%d", device_id, reading.ride_id, reading.seq)
                return
            self._count(record)

    def ride_completeness(self, ride_id: str, device_id: str) -> RideSummary:
        """
        Current summary of one ride.

        Raises:
            RideNotFoundError: If neither a header nor a reading of the ride was seen.
        """
        with self._lock:
            tally = self._rides.get((device_id, ride_id))
            if tally is None:
                raise RideNotFoundError(f"{device_id}/{ride_id}")
            return RideSummary(
                ride_id, device_id, tally.expected, tally.received, tally.first_utc, tally.last_utc
            )

    def summaries(self) -> list[RideSummary]:
        """Every known ride, ordered by (ride_id, device_id)."""
        with self._lock:
            keys = sorted(self._rides, key=lambda k: (k[1], k[0]))
        return [self.ride_completeness(ride_id, device_id) for device_id, ride_id in keys]
