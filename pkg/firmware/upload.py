"""
Button-triggered upload of the cache log.

For every ride found in the cache, the device publishes a count header on
the session topic::

    {"ride_id": "1a2b3c4d", "device_id": "bike-001", "count": 3, "first_seq": 0}

followed by exactly `count` cache lines, in order, on the data topic. The
cache is deleted and recreated only after every publish is acknowledged; any
delivery failure leaves it untouched and puts the device in UPLOAD_ERROR.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

from mqttwire import (
    ClientSession,
    ConnectionRefused,
    Delivered,
    MqttError,
    SessionState,
)

from .device import DeviceState, InvalidPhaseError, Phase
from .reading import Reading, ReadingFormatError
from .sdcard import CACHE_LOG, VirtualSd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RideBatch:
    """Consecutive cache lines belonging to one ride."""

    ride_id: str
    first_seq: int
    lines: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.lines)

    def header(self, device_id: str) -> dict:
        return {
            "ride_id": self.ride_id,
            "device_id": device_id,
            "count": self.count,
            "first_seq": self.first_seq,
        }


@dataclass(frozen=True)
class UploadProgress:
    """
    Where an upload stands.

    Attributes:
        messages (tuple[tuple[str, bytes], ...]): Every (topic, payload) to send, in order.
        sent (int): How many of them have been published.
        acked (int): QoS 1 acknowledgments received.
        qos (int): QoS of the upload.
    """

    messages: tuple[tuple[str, bytes], ...]
    sent: int = 0
    acked: int = 0
    qos: int = 1

    @property
    def total(self) -> int:
        return len(self.messages)

    @property
    def done(self) -> bool:
        return self.sent == self.total and (self.qos == 0 or self.acked == self.total)


def group_cache(lines: list[str], fallback_ride_id: str, fallback_seq: int) -> list[RideBatch]:
    """
    Split cache lines into per-ride batches, keeping their order.

    An empty cache yields one empty batch for the current ride so the upload
    still announces `count = 0`. A line that does not parse stays with the
    batch it sits in.
    """
    if not lines:
        return [RideBatch(fallback_ride_id, fallback_seq, ())]

    batches: list[RideBatch] = []
    current: list[str] = []
    ride_id, first_seq = None, 0
    for line in lines:
        try:
            reading = Reading.from_line(line)
        except ReadingFormatError as e:
            logger.warning("unparseable cache line kept in upload: %s", e)
            current.append(line)
            continue
        if reading.ride_id != ride_id:
            if current:
                batches.append(RideBatch(ride_id or fallback_ride_id, first_seq, tuple(current)))
            ride_id, first_seq, current = reading.ride_id, reading.seq, []
        current.append(line)
    if current:
        batches.append(RideBatch(ride_id or fallback_ride_id, first_seq, tuple(current)))
    return batches


def _fail(
    state: DeviceState, session: ClientSession, now: int, reason: str
) -> tuple[DeviceState, list[bytes]]:
    assert state.config is not None
    logger.warning("%s: upload failed, cache kept: %s", state.config.device_id, reason)
    frames = []
    if session.state is SessionState.CONNECTED:
        frames.append(session.disconnect(now))
    return replace(state, phase=Phase.UPLOAD_ERROR, upload=None), frames


def _pump(
    state: DeviceState, sd: VirtualSd, session: ClientSession, now: int
) -> tuple[DeviceState, list[bytes]]:
    """Publish as much as the window allows; finish when everything is acknowledged."""
    progress = state.upload
    assert progress is not None and state.config is not None
    frames: list[bytes] = []
    sent = progress.sent
    while sent < progress.total and (progress.qos == 0 or session.can_publish):
        topic, payload = progress.messages[sent]
        frames.append(session.publish(topic, payload, progress.qos, now))
        sent += 1
    progress = replace(progress, sent=sent)

    if not progress.done:
        return replace(state, upload=progress), frames

    sd.recreate(CACHE_LOG)
    frames.append(session.disconnect(now))
    logger.info("%s: upload complete, %d messages", state.config.device_id, progress.total)
    return replace(state, phase=Phase.SAMPLING, upload=None), frames


def run_upload(
    state: DeviceState, sd: VirtualSd, session: ClientSession, now: int
) -> tuple[DeviceState, list[bytes]]:
    """
    Start uploading the cache over an established session.

    Args:
        state (DeviceState): Must be CONNECTING.
        sd (VirtualSd): The card holding the cache.
        session (ClientSession): Connected client session.
        now (int): Current time, ms.

    Returns:
        (new state, frames to send). With QoS 0 the upload completes here.

    Raises:
        InvalidPhaseError: If the device is not CONNECTING.
    """
    config = state.require(Phase.CONNECTING)
    if session.state is not SessionState.CONNECTED:
        raise InvalidPhaseError(f"session is {session.state.value}, not connected")
    assert state.ride_id is not None

    messages: list[tuple[str, bytes]] = []
    for batch in group_cache(sd.read_lines(CACHE_LOG), state.ride_id, state.next_seq):
        header = json.dumps(batch.header(config.device_id), separators=(",", ":"))
        messages.append((config.topic_session, header.encode()))
        messages.extend((config.topic_data, line.encode()) for line in batch.lines)
    logger.info("%s: uploading %d messages", config.device_id, len(messages))

    progress = UploadProgress(tuple(messages), qos=config.qos)
    return _pump(replace(state, phase=Phase.UPLOADING, upload=progress), sd, session, now)


def upload_receive(
    state: DeviceState, sd: VirtualSd, session: ClientSession, data: bytes, now: int
) -> tuple[DeviceState, list[bytes]]:
    """Feed bytes from the broker into an upload in progress."""
    state.require(Phase.UPLOADING)
    try:
        events, frames = session.receive(data, now)
    except MqttError as e:
        return _fail(state, session, now, str(e))

    progress = state.upload
    assert progress is not None
    for event in events:
        if isinstance(event, ConnectionRefused):
            return _fail(state, session, now, "connection refused")
        if isinstance(event, Delivered):
            progress = replace(progress, acked=progress.acked + 1)
    state, more = _pump(replace(state, upload=progress), sd, session, now)
    return state, frames + more


def upload_tick(
    state: DeviceState, sd: VirtualSd, session: ClientSession, now: int
) -> tuple[DeviceState, list[bytes]]:
    """Drive retransmissions; a publish that runs out of retries fails the upload."""
    state.require(Phase.UPLOADING)
    frames, failures = session.tick(now)
    if failures:
        state, more = _fail(state, session, now, f"{len(failures)} publishes unacknowledged")
        return state, frames + more
    state, more = _pump(state, sd, session, now)
    return state, frames + more


def abort_upload(state: DeviceState, reason: str) -> DeviceState:
    """Give up on a connection attempt or upload without touching the cache."""
    config = state.require(Phase.CONNECTING, Phase.UPLOADING)
    logger.warning("%s: upload aborted: %s", config.device_id, reason)
    return replace(state, phase=Phase.UPLOAD_ERROR, upload=None)
