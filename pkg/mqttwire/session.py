"""
Client-side MQTT session: connection state, QoS 1 in-flight tracking and
retransmission with exponential backoff.

The session does no I/O. Methods take the current time in milliseconds and
return the frames to put on the wire; the caller owns the transport. A
session belongs to one logical connection at a time and is not thread-safe.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Union

from .codec import StreamDecoder, encode
from .packets import (
    Connack,
    Connect,
    Disconnect,
    MqttError,
    Packet,
    Pingreq,
    Pingresp,
    ProtocolViolation,
    Puback,
    Publish,
    Suback,
    Subscribe,
)

logger = logging.getLogger(__name__)


class NotConnectedError(MqttError, RuntimeError):
    """Publish attempted on a session that is not connected."""


class InflightWindowFullError(MqttError, RuntimeError):
    """Backpressure: the QoS 1 window is full until an acknowledgment arrives."""


class SessionState(Enum):
    IDLE = "idle"
    CONNECTING = "connecting"
    CONNECTED = "connected"
    CLOSED = "closed"


@dataclass(frozen=True)
class RetryPolicy:
    """
    Retransmission settings for QoS 1 publishes.

    Attributes:
        retry_timeout_ms (int): Wait before the first retransmission.
        backoff_factor (int): Multiplier applied per retransmission.
        max_backoff_multiple (int): Cap on the wait, as a multiple of the base.
        max_retries (int): Retransmissions allowed before giving up.
        window (int): Maximum publishes awaiting acknowledgment.
    """

    retry_timeout_ms: int = 1000
    backoff_factor: int = 2
    max_backoff_multiple: int = 8
    max_retries: int = 8
    window: int = 16

    def __post_init__(self) -> None:
        if self.retry_timeout_ms <= 0:
            raise ValueError("retry_timeout_ms must be positive")
        if self.backoff_factor < 1 or self.max_backoff_multiple < 1:
            raise ValueError("backoff_factor and max_backoff_multiple must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RetryPolicy":
        return replace(cls(), **data)

    def wait_ms(self, send_count: int) -> int:
        """Time to wait after the `send_count`-th transmission."""
        multiple = min(self.backoff_factor ** (send_count - 1), self.max_backoff_multiple)
        return self.retry_timeout_ms * multiple


@dataclass
class InflightEntry:
    packet: Publish
    send_count: int
    next_retry_at: int


@dataclass(frozen=True)
class Connected:
    pass


@dataclass(frozen=True)
class ConnectionRefused:
    pass


@dataclass(frozen=True)
class Delivered:
    packet_id: int
    topic: str


@dataclass(frozen=True)
class DeliveryFailed:
    packet_id: int
    topic: str
    send_count: int


@dataclass(frozen=True)
class MessageReceived:
    topic: str
    payload: bytes
    qos: int


SessionEvent = Union[Connected, ConnectionRefused, Delivered, DeliveryFailed, MessageReceived]


class ClientSession:
    """
    State of one client connection.

    Attributes:
        state (SessionState): idle, connecting, connected or closed.
        inflight (dict[int, InflightEntry]): Unacknowledged QoS 1 publishes by packet id.
        next_packet_id (int): Next candidate id; never 0.
    """

    def __init__(
        self,
        client_id: str,
        keep_alive_s: int = 60,
        auth_token: str | None = None,
        policy: RetryPolicy | None = None,
    ) -> None:
        self.client_id = client_id
        self.keep_alive_s = keep_alive_s
        self.auth_token = auth_token
        self.policy = policy or RetryPolicy()
        self.state = SessionState.IDLE
        self.inflight: dict[int, InflightEntry] = {}
        self.next_packet_id = 1
        self.retransmissions = 0
        self._decoder = StreamDecoder()
        self._last_sent_at = 0

    def __repr__(self) -> str:
        return (
            f"ClientSession({self.client_id!r}, {self.state.value}, "
            f"inflight={len(self.inflight)})"
        )

    @property
    def can_publish(self) -> bool:
        return self.state is SessionState.CONNECTED and len(self.inflight) < self.policy.window

    def _send(self, packet: Packet, now: int) -> bytes:
        self._last_sent_at = now
        return encode(packet)

    def connect(self, now: int) -> bytes:
        """Start the connection; returns the CONNECT frame."""
        if self.state is not SessionState.IDLE:
            raise ProtocolViolation(f"connect from state {self.state.value}")
        self.state = SessionState.CONNECTING
        packet = Connect(self.client_id, keep_alive_s=self.keep_alive_s, auth_token=self.auth_token)
        return self._send(packet, now)

    def _allocate_packet_id(self) -> int:
        candidate = self.next_packet_id
        for _ in range(0xFFFF):
            if candidate not in self.inflight:
                self.next_packet_id = candidate % 0xFFFF + 1
                return candidate
            candidate = candidate % 0xFFFF + 1
        raise InflightWindowFullError("no free packet id")

    def publish(self, topic: str, payload: bytes, qos: int, now: int) -> bytes:
        """
        Publish a message.

        QoS 0 is fire-and-forget. QoS 1 gets a packet id and stays in flight
        until its PUBACK arrives or the retries run out.

        Returns:
            bytes: The PUBLISH frame.

        Raises:
            NotConnectedError: If the session is not connected.
            InflightWindowFullError: If the QoS 1 window is full.
        """
        if self.state is not SessionState.CONNECTED:
            raise NotConnectedError(f"cannot publish in state {self.state.value}")
        if qos == 0:
            return self._send(Publish(topic, payload, qos=0), now)
        if len(self.inflight) >= self.policy.window:
            raise InflightWindowFullError(f"{len(self.inflight)} publishes awaiting ack")
        packet_id = self._allocate_packet_id()
        packet = Publish(topic, payload, qos=1, packet_id=packet_id)
        self.inflight[packet_id] = InflightEntry(
            packet=packet, send_count=1, next_retry_at=now + self.policy.wait_ms(1)
        )
        return self._send(packet, now)

    def subscribe(self, topic_filters: list[tuple[str, int]], now: int) -> bytes:
        if self.state is not SessionState.CONNECTED:
            raise NotConnectedError(f"cannot subscribe in state {self.state.value}")
        return self._send(Subscribe(self._allocate_packet_id(), tuple(topic_filters)), now)

    def tick(self, now: int) -> tuple[list[bytes], list[DeliveryFailed]]:
        """
        Retransmit overdue publishes and keep the connection alive.

        Every entry past its retry time is resent with dup set and its wait
        doubled (capped). An entry that already used all its retries is
        dropped and reported as a failure.

        Returns:
            (frames to send, delivery failures)
        """
        frames: list[bytes] = []
        failures: list[DeliveryFailed] = []
        due = sorted(
            (e for e in self.inflight.values() if e.next_retry_at <= now),
            key=lambda e: (e.next_retry_at, e.packet.packet_id),
        )
        for entry in due:
            packet_id = entry.packet.packet_id
            assert packet_id is not None
            if entry.send_count - 1 >= self.policy.max_retries:
                del self.inflight[packet_id]
                failures.append(DeliveryFailed(packet_id, entry.packet.topic, entry.send_count))
                logger.warning(
                    "%s: publish %d on %s failed after %d sends",
                    self.client_id, packet_id, entry.packet.topic, entry.send_count,
                )
                continue
            entry.packet = replace(entry.packet, dup=True)
            entry.send_count += 1
            entry.next_retry_at = now + self.policy.wait_ms(entry.send_count)
            self.retransmissions += 1
            logger.debug("%s: retransmit %d (send %d)", self.client_id, packet_id, entry.send_count)
            frames.append(self._send(entry.packet, now))

        if (
            self.state is SessionState.CONNECTED
            and self.keep_alive_s > 0
            and now - self._last_sent_at >= self.keep_alive_s * 1000
        ):
            frames.append(self._send(Pingreq(), now))
        return frames, failures

    def receive(self, data: bytes, now: int) -> tuple[list[SessionEvent], list[bytes]]:
        """Feed bytes from the broker; returns events and any frames to answer with."""
        events: list[SessionEvent] = []
        frames: list[bytes] = []
        for packet in self._decoder.feed(data):
            new_events, new_frames = self.handle(packet, now)
            events.extend(new_events)
            frames.extend(new_frames)
        return events, frames

    def handle(self, packet: Packet, now: int) -> tuple[list[SessionEvent], list[bytes]]:
        """Apply one decoded packet from the broker."""
        if isinstance(packet, Connack):
            if self.state is not SessionState.CONNECTING:
                logger.debug("%s: ignoring CONNACK in state %s", self.client_id, self.state.value)
                return [], []
            if packet.accepted:
                self.state = SessionState.CONNECTED
                return [Connected()], []
            self.state = SessionState.CLOSED
            return [ConnectionRefused()], []

        if isinstance(packet, Puback):
            entry = self.inflight.pop(packet.packet_id, None)
            if entry is None:
                # ack for a retransmission that was already acknowledged
                return [], []
            return [Delivered(packet.packet_id, entry.packet.topic)], []

        if isinstance(packet, Publish):
            event = MessageReceived(packet.topic, packet.payload, packet.qos)
            if packet.qos == 1:
                assert packet.packet_id is not None
                return [event], [self._send(Puback(packet.packet_id), now)]
            return [event], []

        if isinstance(packet, (Pingresp, Suback)):
            return [], []

        raise ProtocolViolation(f"unexpected {type(packet).__name__} from broker")

    def disconnect(self, now: int) -> bytes:
        """Close the session; anything still in flight is abandoned."""
        self.state = SessionState.CLOSED
        if self.inflight:
            logger.info(
                "%s: disconnecting with %d unacked publishes", self.client_id, len(self.inflight)
            )
        self.inflight.clear()
        return self._send(Disconnect(), now)
