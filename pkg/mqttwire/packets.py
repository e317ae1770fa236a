"""
MQTT 3.1.1 packet types supported by the broker and the device client.

Subset: QoS 0 and 1 only, no retained messages, no wills, clean sessions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Union


class MqttError(Exception):
    """Base class for protocol errors."""


class MalformedPacketError(MqttError, ValueError):
    """Bytes that do not form a valid packet of the supported subset."""


class ProtocolViolation(MqttError):
    """A well-formed packet that is not allowed in the current connection state."""


class PacketType(IntEnum):
    CONNECT = 1
    CONNACK = 2
    PUBLISH = 3
    PUBACK = 4
    SUBSCRIBE = 8
    SUBACK = 9
    PINGREQ = 12
    PINGRESP = 13
    DISCONNECT = 14


SUBACK_FAILURE = 0x80


def _check_packet_id(packet_id: int) -> None:
    if not 1 <= packet_id <= 0xFFFF:
        raise ValueError(f"packet_id must be in 1..65535, got {packet_id}")


def is_valid_topic_name(topic: str) -> bool:
    """Publish topics: non-empty, no wildcards, no NUL."""
    return bool(topic) and not any(c in topic for c in "+#\x00")


@dataclass(frozen=True)
class Connect:
    client_id: str
    keep_alive_s: int = 60
    auth_token: str | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.keep_alive_s <= 0xFFFF:
            raise ValueError(f"keep_alive_s must fit 16 bits, got {self.keep_alive_s}")


@dataclass(frozen=True)
class Connack:
    accepted: bool = True


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes = b""
    qos: int = 0
    packet_id: int | None = None
    dup: bool = False

    def __post_init__(self) -> None:
        if not is_valid_topic_name(self.topic):
            raise ValueError(f"invalid publish topic: {self.topic!r}")
        if self.qos not in (0, 1):
            raise ValueError(f"qos must be 0 or 1, got {self.qos}")
        if self.qos == 1:
            if self.packet_id is None:
                raise ValueError("qos 1 publish needs a packet_id")
            _check_packet_id(self.packet_id)
        else:
            if self.packet_id is not None:
                raise ValueError("qos 0 publish must not carry a packet_id")
            if self.dup:
                raise ValueError("qos 0 publish must not set dup")


@dataclass(frozen=True)
class Puback:
    packet_id: int

    def __post_init__(self) -> None:
        _check_packet_id(self.packet_id)


@dataclass(frozen=True)
class Subscribe:
    """Topic filters with their requested QoS, e.g. `(("ardueco/+/data", 1),)`."""

    packet_id: int
    topic_filters: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        _check_packet_id(self.packet_id)
        if not self.topic_filters:
            raise ValueError("subscribe needs at least one topic filter")
        for topic_filter, qos in self.topic_filters:
            if not topic_filter:
                raise ValueError("topic filter must not be empty")
            if qos not in (0, 1, 2):
                raise ValueError(f"requested qos must be 0..2, got {qos}")


@dataclass(frozen=True)
class Suback:
    packet_id: int
    granted: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_packet_id(self.packet_id)
        for code in self.granted:
            if code not in (0, 1, 2, SUBACK_FAILURE):
                raise ValueError(f"invalid suback return code {code}")


@dataclass(frozen=True)
class Pingreq:
    pass


@dataclass(frozen=True)
class Pingresp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Union[Connect, Connack, Publish, Puback, Subscribe, Suback, Pingreq, Pingresp, Disconnect]
