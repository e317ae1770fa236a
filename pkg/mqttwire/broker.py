"""
Broker-side protocol handling.

The broker is transport-agnostic: `feed()` takes the bytes received on one
connection and returns what to send back on it, plus publishes to forward to
other connections. The TCP server and the simulator both drive it.

Message hooks are called for every PUBLISH with (topic, payload) before it is
acknowledged. A hook that raises withholds the PUBACK, so a QoS 1 sender keeps
the message and retransmits it.
Duplicate QoS 1 publishes are forwarded again; deduplication is left to the
consumer.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable

from .codec import StreamDecoder
from .packets import (
    SUBACK_FAILURE,
    Connack,
    Connect,
    Disconnect,
    MalformedPacketError,
    Packet,
    Pingreq,
    Pingresp,
    Puback,
    Publish,
    Suback,
    Subscribe,
)
from .topics import is_valid_topic_filter, topic_matches

logger = logging.getLogger(__name__)

MessageHook = Callable[[str, bytes], None]
Authenticator = Callable[[str, str | None], bool]


@dataclass(frozen=True)
class Delivery:
    """A publish to forward to another connection."""

    connection_id: str
    packet: Publish


@dataclass
class BrokerResult:
    responses: list[Packet] = field(default_factory=list)
    deliveries: list[Delivery] = field(default_factory=list)
    close: bool = False

    def extend(self, other: "BrokerResult") -> None:
        self.responses.extend(other.responses)
        self.deliveries.extend(other.deliveries)
        self.close = self.close or other.close


class BrokerConnection:
    """Per-connection state kept by the broker."""

    def __init__(self, connection_id: str) -> None:
        self.connection_id = connection_id
        self.client_id: str | None = None
        self.connected = False
        self.closed = False
        self.subscriptions: dict[str, int] = {}
        self.decoder = StreamDecoder()
        self._next_packet_id = 1

    def __repr__(self) -> str:
        return f"BrokerConnection({self.connection_id!r}, client={self.client_id!r})"

    def allocate_packet_id(self) -> int:
        packet_id = self._next_packet_id
        self._next_packet_id = packet_id % 0xFFFF + 1
        return packet_id


class Broker:
    """
    Routes publishes between connections and to registered hooks.

    Each connection's packets must be handled in arrival order; different
    connections may be handled from different threads.
    """

    def __init__(self, authenticator: Authenticator | None = None) -> None:
        self.authenticator = authenticator
        self._lock = threading.Lock()
        self._connections: dict[str, BrokerConnection] = {}
        self._hooks: list[MessageHook] = []
        self.publishes_received = 0
        self.hook_failures = 0

    def add_hook(self, hook: MessageHook) -> None:
        self._hooks.append(hook)

    def open_connection(self, connection_id: str) -> BrokerConnection:
        conn = BrokerConnection(connection_id)
        with self._lock:
            self._connections[connection_id] = conn
        return conn

    def close_connection(self, conn: BrokerConnection) -> None:
        conn.closed = True
        with self._lock:
            self._connections.pop(conn.connection_id, None)

    @property
    def connection_count(self) -> int:
        with self._lock:
            return len(self._connections)

    def feed(self, conn: BrokerConnection, data: bytes, now: int) -> BrokerResult:
        """
        Decode and handle every complete packet in `data`.

        A malformed packet closes the connection.
        """
        result = BrokerResult()
        try:
            packets = conn.decoder.feed(data)
        except MalformedPacketError as e:
            logger.warning("%s: malformed packet, closing: %s", conn.connection_id, e)
            self.close_connection(conn)
            result.close = True
            return result
        for packet in packets:
            result.extend(self.handle(conn, packet, now))
            if result.close:
                break
        return result

    def _violation(self, conn: BrokerConnection, reason: str) -> BrokerResult:
        logger.warning("%s: protocol violation, closing: %s", conn.connection_id, reason)
        self.close_connection(conn)
        return BrokerResult(close=True)

    def handle(self, conn: BrokerConnection, packet: Packet, now: int) -> BrokerResult:
        """
        Handle one packet from `conn`.

        Args:
            conn (BrokerConnection): The connection it arrived on.
            packet (Packet): The decoded packet.
            now (int): Current time in milliseconds.

        Returns:
            BrokerResult: Packets to send back, publishes to forward, and
            whether to close the connection.
        """
        if conn.closed:
            return BrokerResult(close=True)

        if isinstance(packet, Connect):
            if conn.connected:
                return self._violation(conn, "second CONNECT")
            return self._handle_connect(conn, packet)
        if not conn.connected:
            return self._violation(conn, f"{type(packet).__name__} before CONNECT")

        if isinstance(packet, Publish):
            return self._handle_publish(conn, packet)
        if isinstance(packet, Subscribe):
            return self._handle_subscribe(conn, packet)
        if isinstance(packet, Puback):
            return BrokerResult()
        if isinstance(packet, Pingreq):
            return BrokerResult(responses=[Pingresp()])
        if isinstance(packet, Disconnect):
            logger.debug("%s: client disconnected", conn.connection_id)
            self.close_connection(conn)
            return BrokerResult(close=True)
        return self._violation(conn, f"unexpected {type(packet).__name__} from client")

    def _handle_connect(self, conn: BrokerConnection, packet: Connect) -> BrokerResult:
        authenticate = self.authenticator
        if authenticate is not None and not authenticate(packet.client_id, packet.auth_token):
            logger.warning("%s: refused client %r", conn.connection_id, packet.client_id)
            self.close_connection(conn)
            return BrokerResult(responses=[Connack(accepted=False)], close=True)
        conn.connected = True
        conn.client_id = packet.client_id
        logger.info("%s: client %r connected", conn.connection_id, packet.client_id)
        return BrokerResult(responses=[Connack(accepted=True)])

    def _handle_subscribe(self, conn: BrokerConnection, packet: Subscribe) -> BrokerResult:
        granted: list[int] = []
        with self._lock:
            for topic_filter, qos in packet.topic_filters:
                if is_valid_topic_filter(topic_filter):
                    conn.subscriptions[topic_filter] = min(qos, 1)
                    granted.append(min(qos, 1))
                else:
                    granted.append(SUBACK_FAILURE)
        return BrokerResult(responses=[Suback(packet.packet_id, tuple(granted))])

    def _handle_publish(self, conn: BrokerConnection, packet: Publish) -> BrokerResult:
        with self._lock:
            self.publishes_received += 1

        for hook in self._hooks:
            try:
                hook(packet.topic, packet.payload)
            except Exception:
                logger.exception(
                    "%s: message hook failed for %s, publish not acknowledged",
                    conn.connection_id, packet.topic,
                )
                with self._lock:
                    self.hook_failures += 1
                return BrokerResult()

        result = BrokerResult()
        if packet.qos == 1:
            assert packet.packet_id is not None
            result.responses.append(Puback(packet.packet_id))
        with self._lock:
            for other in self._connections.values():
                granted = [
                    q for f, q in other.subscriptions.items() if topic_matches(f, packet.topic)
                ]
                if not granted:
                    continue
                qos = min(packet.qos, max(granted))
                packet_id = other.allocate_packet_id() if qos == 1 else None
                forwarded = Publish(packet.topic, packet.payload, qos=qos, packet_id=packet_id)
                result.deliveries.append(Delivery(other.connection_id, forwarded))
        return result
