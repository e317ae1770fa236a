"""
Unit tests for the MQTT packet codec and topic matching.
"""

import numpy as np
import pytest  # type: ignore
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from mqttwire import (
    NEED_MORE_DATA,
    Connack,
    Connect,
    Disconnect,
    MalformedPacketError,
    Pingreq,
    Pingresp,
    Puback,
    Publish,
    RemainingLengthError,
    StreamDecoder,
    Suback,
    Subscribe,
    decode,
    decode_remaining_length,
    encode,
    encode_remaining_length,
    is_valid_topic_filter,
    topic_matches,
)


TOPIC_CHARS = list("abcdefxyz0189-_/é")
FILTER_CHARS = TOPIC_CHARS + ["+", "#"]


def random_text(rng: np.random.Generator, chars: list[str], low: int, high: int) -> str:
    return "".join(rng.choice(chars, size=int(rng.integers(low, high + 1))))


def random_packet(rng: np.random.Generator):
    """One packet of a random supported kind with random fields."""
    kind = int(rng.integers(0, 12))
    packet_id = int(rng.integers(1, 0x10000))
    if kind == 0:
        token = random_text(rng, TOPIC_CHARS, 0, 12) if rng.random() < 0.5 else None
        return Connect(random_text(rng, TOPIC_CHARS, 0, 23), int(rng.integers(0, 0x10000)), token)
    if kind == 1:
        return Connack(accepted=bool(rng.random() < 0.5))
    if kind in (2, 3, 4):
        size = 20_000 if rng.random() < 0.01 else int(rng.integers(0, 300))
        payload = rng.bytes(size)
        topic = random_text(rng, TOPIC_CHARS, 1, 40)
        if kind == 2:
            return Publish(topic, payload)
        return Publish(topic, payload, qos=1, packet_id=packet_id, dup=kind == 4)
    if kind == 5:
        return Puback(packet_id)
    if kind == 6:
        filters = tuple(
            (random_text(rng, FILTER_CHARS, 1, 20), int(rng.integers(0, 3)))
            for _ in range(int(rng.integers(1, 4)))
        )
        return Subscribe(packet_id, filters)
    if kind == 7:
        granted = tuple(int(g) for g in rng.choice([0, 1, 2, 0x80], size=int(rng.integers(0, 5))))
        return Suback(packet_id, granted)
    return [Pingreq(), Pingresp(), Disconnect(), Disconnect()][kind - 8]


class TestRemainingLength:
    """Test the variable-length integer of the fixed header."""

    def test_boundaries(self) -> None:
        """Test the byte count changes exactly at powers of 128."""
        assert encode_remaining_length(0) == b"\x00"
        assert encode_remaining_length(127) == b"\x7f"
        assert encode_remaining_length(128) == b"\x80\x01"
        assert encode_remaining_length(16_383) == b"\xff\x7f"
        assert encode_remaining_length(16_384) == b"\x80\x80\x01"
        assert encode_remaining_length(268_435_455) == b"\xff\xff\xff\x7f"

    def test_bijection_below_two_to_the_21(self) -> None:
        """Test every length up to three bytes decodes to itself."""
        for n in range(2 ** 21):
            raw = encode_remaining_length(n)
            assert decode_remaining_length(raw) == (n, len(raw))

    def test_out_of_range(self) -> None:
        """Test lengths outside 0..2**28-1 are rejected."""
        with pytest.raises(RemainingLengthError):  # type: ignore
            encode_remaining_length(2 ** 28)
        with pytest.raises(RemainingLengthError):  # type: ignore
            encode_remaining_length(-1)

    def test_truncated_varint(self) -> None:
        """Test a continuation bit at the end of the buffer needs more data."""
        assert decode_remaining_length(b"\x80\x80") is NEED_MORE_DATA

    def test_five_byte_varint_is_malformed(self) -> None:
        """Test a varint longer than four bytes is rejected."""
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode_remaining_length(b"\xff\xff\xff\xff\x01")


class TestPackets:
    """Test encoding and decoding of each supported packet."""

    @pytest.mark.parametrize("packet", [  # type: ignore
        Connect("bike-001", keep_alive_s=30),
        Connect("bike-001", auth_token="token"),
        Connack(accepted=True),
        Connack(accepted=False),
        Publish("ardueco/bike-001/data", b'{"seq":0}', qos=0),
        Publish("ardueco/bike-001/data", b"x" * 300, qos=1, packet_id=65535, dup=True),
        Puback(7),
        Subscribe(1, (("ardueco/+/data", 1), ("ardueco/#", 0))),
        Suback(1, (1, 0x80)),
        Pingreq(),
        Pingresp(),
        Disconnect(),
    ])
    def test_decodes_to_same_packet(self, packet) -> None:
        """Test each packet kind survives the wire."""
        raw = encode(packet)
        assert decode(raw) == (packet, len(raw))

    def test_canonical_bytes(self) -> None:
        """Test a few packets against their well-known encodings."""
        assert encode(Pingreq()) == b"\xc0\x00"
        assert encode(Disconnect()) == b"\xe0\x00"
        assert encode(Puback(1)) == b"\x40\x02\x00\x01"
        assert encode(Connack()) == b"\x20\x02\x00\x00"

    def test_partial_packet(self) -> None:
        """Test every strict prefix of a packet needs more data."""
        raw = encode(Publish("a/b", b"hello", qos=1, packet_id=3))
        for cut in range(len(raw)):
            assert decode(raw[:cut]) is NEED_MORE_DATA

    def test_reserved_type(self) -> None:
        """Test type 0 and 15 are malformed."""
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode(b"\x00\x00")
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode(b"\xf0\x00")

    def test_lone_reserved_byte(self) -> None:
        """Test a reserved or unknown type is rejected from its first byte alone."""
        for first in (b"\x00", b"\xf0", b"\x50", b"\xa2"):
            with pytest.raises(MalformedPacketError):  # type: ignore
                decode(first)
        with pytest.raises(MalformedPacketError):  # type: ignore
            StreamDecoder().feed(b"\x00")

    def test_random_packets(self) -> None:
        """Test 10,000 seeded random packets of every kind decode to themselves."""
        rng = np.random.default_rng(1883)
        kinds = set()
        for _ in range(10_000):
            packet = random_packet(rng)
            kinds.add((type(packet), getattr(packet, "qos", None), getattr(packet, "dup", None)))
            raw = encode(packet)
            assert decode(raw) == (packet, len(raw))
        assert len(kinds) == 11

    def test_qos2_publish_rejected(self) -> None:
        """Test QoS 2 is outside the supported subset."""
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode(b"\x34\x07\x00\x03a/b\x00\x01")

    def test_bad_flags(self) -> None:
        """Test a PUBACK with flag bits set is malformed."""
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode(b"\x41\x02\x00\x01")

    def test_packet_id_zero_rejected(self) -> None:
        """Test packet id 0 is not allowed."""
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode(b"\x40\x02\x00\x00")
        with pytest.raises(ValueError):  # type: ignore
            Puback(0)

    def test_trailing_body_bytes(self) -> None:
        """Test a body longer than its packet needs is rejected."""
        with pytest.raises(MalformedPacketError):  # type: ignore
            decode(b"\x40\x03\x00\x01\x00")

    def test_wildcard_publish_topic_rejected(self) -> None:
        """Test publish topics cannot contain wildcards."""
        with pytest.raises(ValueError):  # type: ignore
            Publish("ardueco/+/data", b"")


class TestStreamDecoder:
    """Test reassembly of packets split across reads."""

    def test_byte_by_byte(self) -> None:
        """Test a stream fed one byte at a time yields every packet once."""
        packets = [Connect("c"), Publish("t", b"p", qos=1, packet_id=1), Disconnect()]
        stream = b"".join(encode(p) for p in packets)
        decoder = StreamDecoder()
        out = []
        for i in range(len(stream)):
            out.extend(decoder.feed(stream[i:i + 1]))
        assert out == packets
        assert decoder.pending == 0

    def test_several_packets_in_one_read(self) -> None:
        """Test a read holding two and a half packets."""
        stream = encode(Pingreq()) + encode(Puback(2)) + encode(Puback(3))[:2]
        decoder = StreamDecoder()
        assert decoder.feed(stream) == [Pingreq(), Puback(2)]
        assert decoder.pending == 2

    def test_random_splits(self) -> None:
        """Test a stream of 10,000 random packets cut at random points comes back whole."""
        rng = np.random.default_rng(7)
        packets = [random_packet(rng) for _ in range(10_000)]
        stream = b"".join(encode(p) for p in packets)
        decoder = StreamDecoder()
        out = []
        pos = 0
        while pos < len(stream):
            step = int(rng.integers(1, 64))
            out.extend(decoder.feed(stream[pos:pos + step]))
            pos += step
        assert out == packets
        assert decoder.pending == 0


class TestTopics:
    """Test topic filters."""

    def test_matching(self) -> None:
        """Test single- and multi-level wildcards."""
        assert topic_matches("ardueco/+/data", "ardueco/bike-001/data")
        assert not topic_matches("ardueco/+/data", "ardueco/bike-001/session")
        assert not topic_matches("ardueco/+", "ardueco/bike-001/data")
        assert topic_matches("ardueco/#", "ardueco/bike-001/data")
        assert topic_matches("ardueco/#", "ardueco")
        assert topic_matches("#", "anything/at/all")

    def test_filter_validation(self) -> None:
        """Test wildcards must occupy whole levels."""
        assert is_valid_topic_filter("ardueco/+/data")
        assert is_valid_topic_filter("ardueco/#")
        assert not is_valid_topic_filter("ardueco/#/data")
        assert not is_valid_topic_filter("ardueco/bike+/data")
        assert not is_valid_topic_filter("")
