"""
NMEA-0183 sentence handling for the GPS module.

A sentence looks like::

    $GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47

  - `$` starts the frame
  - the address field (`GPGGA`) is a 2-char talker id followed by the type tag
  - the checksum is the XOR of every byte between `$` and `*`, written as two
    uppercase hex digits

Only GGA and RMC carry fixes here; every other kind parses to
`SentenceKind.OTHER` and is ignored by the firmware.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass
from enum import Enum
from functools import reduce

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400


class NmeaError(ValueError):
    """Base class for NMEA parsing errors."""


class MalformedSentenceError(NmeaError):
    """The line is not a `$...*HH` frame."""


class ChecksumMismatchError(NmeaError):
    """The frame is well formed but its checksum does not match."""


class FieldParseError(NmeaError):
    """A field that must be numeric or a hemisphere letter is not."""


class SentenceKind(Enum):
    GGA = "GGA"
    RMC = "RMC"
    OTHER = "other"


@dataclass(frozen=True)
class RawSentence:
    """
    A checksummed NMEA sentence split into its fields.

    Attributes:
        talker (str): 2-char talker id (e.g. 'GP').
        kind (SentenceKind): GGA, RMC or OTHER.
        fields (tuple[str, ...]): Fields after the address, empty fields kept.
        checksum (int): 8-bit checksum parsed from the trailing hex pair.
    """

    talker: str
    kind: SentenceKind
    fields: tuple[str, ...]
    checksum: int


@dataclass(frozen=True)
class GpsFix:
    """
    A position fix.

    Attributes:
        utc_time (float): Seconds of the UTC day.
        latitude (float): Decimal degrees, -90..90.
        longitude (float): Decimal degrees, -180..180.
        quality (int): GGA fix quality, 0 means no fix.
        satellites (int): Satellites in use.
        valid (bool): Whether the coordinates may be used.
    """

    utc_time: float
    latitude: float
    longitude: float
    quality: int = 1
    satellites: int = 8
    valid: bool = True

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if self.quality < 0:
            raise ValueError(f"quality must be non-negative, got {self.quality}")
        if self.satellites < 0:
            raise ValueError(f"satellites must be non-negative, got {self.satellites}")
        if self.valid and self.quality < 1:
            raise ValueError("a valid fix needs quality >= 1")
        if not 0.0 <= self.utc_time < SECONDS_PER_DAY:
            raise ValueError(f"utc_time must be seconds of day, got {self.utc_time}")


def compute_checksum(payload: str) -> int:
    """XOR of all bytes of the text between `$` and `*`."""
    return reduce(operator.xor, payload.encode("ascii"), 0)


def _split_frame(line: str) -> tuple[str, int]:
    line = line.rstrip("\r\n")
    if not line.startswith("$"):
        raise MalformedSentenceError(f"sentence must start with '$': {line[:20]!r}")
    star = line.rfind("*")
    if star < 0 or len(line) - star != 3:
        raise MalformedSentenceError(f"sentence must end with '*HH': {line[-8:]!r}")
    hex_pair = line[star + 1:]
    try:
        transmitted = int(hex_pair, 16)
    except ValueError:
        raise MalformedSentenceError(f"checksum is not hex: {hex_pair!r}") from None
    payload = line[1:star]
    try:
        payload.encode("ascii")
    except UnicodeEncodeError:
        raise MalformedSentenceError("sentence contains non-ASCII bytes") from None
    return payload, transmitted


def verify_checksum(line: str) -> bool:
    """
    Check a sentence's checksum.

    Args:
        line (str): A complete sentence, optionally CRLF-terminated.

    Returns:
        bool: True iff the XOR of the payload bytes equals the trailing hex pair.

    Raises:
        MalformedSentenceError: If there is no leading `$` or trailing `*HH`.
    """
    payload, transmitted = _split_frame(line)
    return compute_checksum(payload) == transmitted


def parse_sentence(line: str) -> RawSentence:
    """
    Split a checksummed sentence into talker, kind and fields.

    Unknown sentence types are returned with kind OTHER rather than rejected.

    Raises:
        MalformedSentenceError: Frame violation or an address shorter than 3 chars.
        ChecksumMismatchError: Checksum does not match the payload.
    """
    payload, transmitted = _split_frame(line)
    actual = compute_checksum(payload)
    if actual != transmitted:
        raise ChecksumMismatchError(
            f"checksum mismatch: computed {actual:02X}, sentence says {transmitted:02X}"
        )

    address, *fields = payload.split(",")
    if len(address) < 3:
        raise MalformedSentenceError(f"address field too short: {address!r}")

    tag = address[2:]
    try:
        kind = SentenceKind(tag)
    except ValueError:
        kind = SentenceKind.OTHER
    return RawSentence(talker=address[:2], kind=kind, fields=tuple(fields), checksum=transmitted)


def _parse_coordinate(value: str, hemisphere: str, positive: str, negative: str) -> float:
    try:
        raw = float(value)
    except ValueError:
        raise FieldParseError(f"coordinate is not numeric: {value!r}") from None
    if raw < 0:
        raise FieldParseError(f"coordinate must be unsigned: {value!r}")
    degrees = int(raw // 100)
    minutes = raw - degrees * 100
    if minutes >= 60.0:
        raise FieldParseError(f"minutes out of range in {value!r}")
    decimal = degrees + minutes / 60.0
    if hemisphere == positive:
        return decimal
    if hemisphere == negative:
        return -decimal
    raise FieldParseError(f"hemisphere must be {positive} or {negative}, got {hemisphere!r}")


def _parse_time(value: str) -> float:
    if not value:
        return 0.0
    try:
        hours = int(value[0:2])
        minutes = int(value[2:4])
        seconds = float(value[4:])
    except ValueError:
        raise FieldParseError(f"time is not hhmmss.ss: {value!r}") from None
    total = hours * 3600 + minutes * 60 + seconds
    if not 0.0 <= total < SECONDS_PER_DAY:
        raise FieldParseError(f"time out of range: {value!r}")
    return total


def _parse_int(value: str, name: str) -> int:
    if not value:
        return 0
    try:
        return int(value)
    except ValueError:
        raise FieldParseError(f"{name} is not an integer: {value!r}") from None


def _field(fields: tuple[str, ...], index: int) -> str:
    return fields[index] if index < len(fields) else ""


def extract_fix(sentence: RawSentence) -> GpsFix | None:
    """
    Turn a GGA or RMC sentence into a GpsFix.

    Coordinates in ddmm.mmmm are converted to decimal degrees with the sign
    taken from the hemisphere letter. GGA quality 0 or RMC status 'V' yields
    valid=False; if the coordinate fields are empty in that case the fix sits
    at (0, 0) and must not be used.

    Args:
        sentence (RawSentence): A parsed sentence.

    Returns:
        GpsFix | None: The fix, or None for kinds that carry no position.

    Raises:
        FieldParseError: Non-numeric coordinates, or empty ones on a valid fix.
    """
    fields = sentence.fields
    if sentence.kind is SentenceKind.GGA:
        time_f, lat_f, ns_f, lon_f, ew_f = (_field(fields, i) for i in range(5))
        quality = _parse_int(_field(fields, 5), "quality")
        satellites = _parse_int(_field(fields, 6), "satellites")
    elif sentence.kind is SentenceKind.RMC:
        time_f = _field(fields, 0)
        status = _field(fields, 1)
        lat_f, ns_f, lon_f, ew_f = (_field(fields, i) for i in range(2, 6))
        quality = 1 if status == "A" else 0
        satellites = 0
    else:
        return None

    valid = quality >= 1
    if not (lat_f and lon_f):
        if valid:
            raise FieldParseError("fix reported but coordinate fields are empty")
        latitude = longitude = 0.0
    else:
        latitude = _parse_coordinate(lat_f, ns_f, "N", "S")
        longitude = _parse_coordinate(lon_f, ew_f, "E", "W")

    try:
        return GpsFix(
            utc_time=_parse_time(time_f),
            latitude=latitude,
            longitude=longitude,
            quality=quality,
            satellites=satellites,
            valid=valid,
        )
    except ValueError as e:
        raise FieldParseError(str(e)) from None


def _format_coordinate(value: float, degree_digits: int) -> str:
    # integer ten-thousandths of a minute, so rounding carries into degrees
    total = round(abs(value) * 60 * 10000)
    degrees, rest = divmod(total, 60 * 10000)
    whole_minutes, fraction = divmod(rest, 10000)
    return f"{degrees:0{degree_digits}d}{whole_minutes:02d}.{fraction:04d}"


def _format_time(utc_time: float) -> str:
    centis = round(utc_time * 100) % (SECONDS_PER_DAY * 100)
    hours, rest = divmod(centis, 360000)
    minutes, rest = divmod(rest, 6000)
    seconds, hundredths = divmod(rest, 100)
    return f"{hours:02d}{minutes:02d}{seconds:02d}.{hundredths:02d}"


def _check_bounds(fix: GpsFix) -> None:
    if not (-90.0 <= fix.latitude <= 90.0 and -180.0 <= fix.longitude <= 180.0):
        raise ValueError(f"coordinates out of range: ({fix.latitude}, {fix.longitude})")


def _frame(payload: str) -> str:
    return f"${payload}*{compute_checksum(payload):02X}"


def render_gga(fix: GpsFix, talker: str = "GP") -> str:
    """
    Render a fix as a GGA sentence (without the CRLF terminator).

    Invalid fixes keep their coordinates but carry quality '0'.

    Raises:
        ValueError: If the coordinates are out of range.
    """
    _check_bounds(fix)
    lat = _format_coordinate(fix.latitude, 2)
    lon = _format_coordinate(fix.longitude, 3)
    ns = "N" if fix.latitude >= 0 else "S"
    ew = "E" if fix.longitude >= 0 else "W"
    quality = fix.quality if fix.valid else 0
    hdop = "0.9" if fix.valid else ""
    payload = (
        f"{talker}GGA,{_format_time(fix.utc_time)},{lat},{ns},{lon},{ew},"
        f"{quality},{fix.satellites:02d},{hdop},0.0,M,0.0,M,,"
    )
    return _frame(payload)


def render_no_fix_gga(utc_time: float, talker: str = "GP") -> str:
    """GGA line as a module emits it before its first fix: no coordinates, quality 0."""
    return _frame(f"{talker}GGA,{_format_time(utc_time)},,,,,0,00,,,M,,M,,")


def render_rmc(fix: GpsFix, date: str = "010920", talker: str = "GP") -> str:
    """
    Render a fix as an RMC sentence.

    Args:
        fix (GpsFix): The fix to encode.
        date (str): ddmmyy date field.
        talker (str): Talker id.
    """
    _check_bounds(fix)
    status = "A" if fix.valid else "V"
    lat = _format_coordinate(fix.latitude, 2)
    lon = _format_coordinate(fix.longitude, 3)
    ns = "N" if fix.latitude >= 0 else "S"
    ew = "E" if fix.longitude >= 0 else "W"
    payload = (
        f"{talker}RMC,{_format_time(fix.utc_time)},{status},"
        f"{lat},{ns},{lon},{ew},0.0,0.0,{date},,"
    )
    return _frame(payload)


def read_fix(line: str) -> GpsFix | None:
    """
    Parse a raw GPS line into a fix, swallowing anything unusable.

    This is what the firmware calls every sample: a corrupted or irrelevant
    line simply means no fix this time.
    """
    try:
        return extract_fix(parse_sentence(line))
    except NmeaError as e:
        logger.debug("discarding GPS line: %s", e)
        return None
