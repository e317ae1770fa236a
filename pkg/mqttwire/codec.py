"""
Byte-level encoder/decoder for the supported MQTT 3.1.1 packets.

Every packet starts with a fixed header: one byte of type (high nibble) and
flags (low nibble), then the remaining length as a 1-4 byte varint carrying
7 bits per byte, least significant group first, high bit set on every byte
but the last. Strings and packet ids are big-endian 16-bit prefixed.
"""

from __future__ import annotations

import struct

from .packets import (
    Connack,
    Connect,
    Disconnect,
    MalformedPacketError,
    MqttError,
    Packet,
    PacketType,
    Pingreq,
    Pingresp,
    Puback,
    Publish,
    Suback,
    Subscribe,
)

MAX_REMAINING_LENGTH = 268_435_455  # 2**28 - 1
PROTOCOL_NAME = "MQTT"
PROTOCOL_LEVEL = 4

_CLEAN_SESSION = 0x02
_USERNAME_FLAG = 0x80
_UNSUPPORTED_CONNECT_FLAGS = 0x7C  # will, will qos, will retain, password
_CONNACK_REFUSED_NOT_AUTHORIZED = 5


class RemainingLengthError(MqttError, ValueError):
    """Remaining length outside 0..2**28-1."""


class PacketTooLargeError(MqttError, ValueError):
    """The encoded body does not fit the remaining-length field."""


class NeedMoreData:
    """Returned by the decoders when the buffer ends before the packet does."""

    _instance: "NeedMoreData | None" = None

    def __new__(cls) -> "NeedMoreData":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NEED_MORE_DATA"

    def __bool__(self) -> bool:
        return False


NEED_MORE_DATA = NeedMoreData()


def encode_remaining_length(n: int) -> bytes:
    """
    Encode a remaining length as the MQTT varint.

    Args:
        n (int): Length in 0..2**28-1.

    Returns:
        bytes: 1 to 4 bytes.

    Raises:
        RemainingLengthError: If n is out of range.
    """
    if not 0 <= n <= MAX_REMAINING_LENGTH:
        raise RemainingLengthError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        digit, n = n % 128, n // 128
        if n > 0:
            out.append(digit | 0x80)
        else:
            out.append(digit)
            return bytes(out)


def decode_remaining_length(buf: bytes, offset: int = 0) -> tuple[int, int] | NeedMoreData:
    """
    Decode the varint starting at `buf[offset]`.

    Returns:
        (value, bytes used), or NEED_MORE_DATA if the varint is cut short.

    Raises:
        MalformedPacketError: If the varint runs past 4 bytes.
    """
    value = 0
    multiplier = 1
    for used in range(1, 5):
        index = offset + used - 1
        if index >= len(buf):
            return NEED_MORE_DATA
        byte = buf[index]
        value += (byte & 0x7F) * multiplier
        if not byte & 0x80:
            return value, used
        multiplier *= 128
    raise MalformedPacketError("remaining length varint longer than 4 bytes")


def _string(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise PacketTooLargeError(f"string of {len(raw)} bytes exceeds 65535")
    return struct.pack("!H", len(raw)) + raw


def _body(packet: Packet) -> tuple[int, bytes]:
    """Return (first byte, variable header + payload)."""
    if isinstance(packet, Publish):
        first = (PacketType.PUBLISH << 4) | (int(packet.dup) << 3) | (packet.qos << 1)
        body = _string(packet.topic)
        if packet.qos == 1:
            assert packet.packet_id is not None
            body += struct.pack("!H", packet.packet_id)
        return first, body + packet.payload
    if isinstance(packet, Puback):
        return PacketType.PUBACK << 4, struct.pack("!H", packet.packet_id)
    if isinstance(packet, Connect):
        flags = _CLEAN_SESSION | (_USERNAME_FLAG if packet.auth_token is not None else 0)
        header = struct.pack("!BBH", PROTOCOL_LEVEL, flags, packet.keep_alive_s)
        body = _string(PROTOCOL_NAME) + header
        body += _string(packet.client_id)
        if packet.auth_token is not None:
            body += _string(packet.auth_token)
        return PacketType.CONNECT << 4, body
    if isinstance(packet, Connack):
        code = 0 if packet.accepted else _CONNACK_REFUSED_NOT_AUTHORIZED
        return PacketType.CONNACK << 4, bytes([0, code])
    if isinstance(packet, Subscribe):
        body = struct.pack("!H", packet.packet_id)
        for topic_filter, qos in packet.topic_filters:
            body += _string(topic_filter) + bytes([qos])
        return (PacketType.SUBSCRIBE << 4) | 0x02, body
    if isinstance(packet, Suback):
        return PacketType.SUBACK << 4, struct.pack("!H", packet.packet_id) + bytes(packet.granted)
    if isinstance(packet, Pingreq):
        return PacketType.PINGREQ << 4, b""
    if isinstance(packet, Pingresp):
        return PacketType.PINGRESP << 4, b""
    if isinstance(packet, Disconnect):
        return PacketType.DISCONNECT << 4, b""
    raise TypeError(f"not a packet: {packet!r}")


def encode(packet: Packet) -> bytes:
    """
    Encode a packet to its wire bytes.

    Raises:
        PacketTooLargeError: If the body exceeds the maximum remaining length.
    """
    first, body = _body(packet)
    if len(body) > MAX_REMAINING_LENGTH:
        raise PacketTooLargeError(f"packet body of {len(body)} bytes is too large")
    return bytes([first]) + encode_remaining_length(len(body)) + body


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedPacketError("packet body ends early")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("!H", self.take(2))[0]

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedPacketError("string is not valid UTF-8") from None

    def rest(self) -> bytes:
        chunk = self.data[self.pos:]
        self.pos = len(self.data)
        return chunk

    def at_end(self) -> bool:
        return self.pos == len(self.data)

    def finish(self) -> None:
        if not self.at_end():
            raise MalformedPacketError("trailing bytes after packet body")


def _decode_connect(r: _Reader) -> Connect:
    if r.string() != PROTOCOL_NAME:
        raise MalformedPacketError("protocol name must be 'MQTT'")
    if r.u8() != PROTOCOL_LEVEL:
        raise MalformedPacketError("only protocol level 4 (3.1.1) is supported")
    flags = r.u8()
    if flags & 0x01:
        raise MalformedPacketError("reserved connect flag set")
    if not flags & _CLEAN_SESSION:
        raise MalformedPacketError("persistent sessions are not supported")
    if flags & _UNSUPPORTED_CONNECT_FLAGS:
        raise MalformedPacketError("wills and passwords are not supported")
    keep_alive = r.u16()
    client_id = r.string()
    token = r.string() if flags & _USERNAME_FLAG else None
    r.finish()
    return Connect(client_id=client_id, keep_alive_s=keep_alive, auth_token=token)


def _decode_body(ptype: PacketType, flags: int, body: bytes) -> Packet:
    r = _Reader(body)
    if ptype is PacketType.PUBLISH:
        if flags & 0x01:
            raise MalformedPacketError("retained messages are not supported")
        qos = (flags >> 1) & 0x03
        if qos > 1:
            raise MalformedPacketError(f"qos {qos} is not supported")
        dup = bool(flags & 0x08)
        topic = r.string()
        packet_id = r.u16() if qos == 1 else None
        return Publish(topic=topic, payload=r.rest(), qos=qos, packet_id=packet_id, dup=dup)

    expected_flags = 0x02 if ptype is PacketType.SUBSCRIBE else 0x00
    if flags != expected_flags:
        raise MalformedPacketError(f"invalid flags {flags:#x} for {ptype.name}")

    if ptype is PacketType.PUBACK:
        packet: Packet = Puback(r.u16())
    elif ptype is PacketType.CONNECT:
        return _decode_connect(r)
    elif ptype is PacketType.CONNACK:
        r.u8()
        packet = Connack(accepted=r.u8() == 0)
    elif ptype is PacketType.SUBSCRIBE:
        packet_id = r.u16()
        filters = []
        while not r.at_end():
            topic_filter = r.string()
            filters.append((topic_filter, r.u8()))
        packet = Subscribe(packet_id=packet_id, topic_filters=tuple(filters))
    elif ptype is PacketType.SUBACK:
        packet_id = r.u16()
        packet = Suback(packet_id=packet_id, granted=tuple(r.rest()))
    elif ptype is PacketType.PINGREQ:
        packet = Pingreq()
    elif ptype is PacketType.PINGRESP:
        packet = Pingresp()
    else:
        packet = Disconnect()
    r.finish()
    return packet


def decode(buf: bytes) -> tuple[Packet, int] | NeedMoreData:
    """
    Decode one packet from the front of `buf`.

    Args:
        buf (bytes): Received bytes, possibly holding a partial packet.

    Returns:
        (packet, bytes consumed), or NEED_MORE_DATA if the packet is incomplete.

    Raises:
        MalformedPacketError: Reserved or unsupported type, flag violations,
            bad varint, or a body that does not parse.
    """
    if not buf:
        return NEED_MORE_DATA
    type_nibble, flags = buf[0] >> 4, buf[0] & 0x0F
    if type_nibble in (0, 15):
        raise MalformedPacketError(f"reserved packet type {type_nibble}")
    try:
        ptype = PacketType(type_nibble)
    except ValueError:
        raise MalformedPacketError(f"unsupported packet type {type_nibble}") from None
    if len(buf) < 2:
        return NEED_MORE_DATA

    length = decode_remaining_length(buf, 1)
    if isinstance(length, NeedMoreData):
        return NEED_MORE_DATA
    remaining, used = length
    total = 1 + used + remaining
    if len(buf) < total:
        return NEED_MORE_DATA

    try:
        packet = _decode_body(ptype, flags, bytes(buf[1 + used:total]))
    except MalformedPacketError:
        raise
    except ValueError as e:
        raise MalformedPacketError(str(e)) from None
    return packet, total


class StreamDecoder:
    """Accumulates bytes from a stream and yields whole packets."""

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[Packet]:
        self._buffer.extend(data)
        packets: list[Packet] = []
        while True:
            result = decode(self._buffer)
            if isinstance(result, NeedMoreData):
                return packets
            packet, consumed = result
            del self._buffer[:consumed]
            packets.append(packet)

    @property
    def pending(self) -> int:
        return len(self._buffer)
