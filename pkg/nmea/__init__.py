"""
NMEA-0183 parsing and rendering for the simulated GPS module.
"""

from .sentence import (
    ChecksumMismatchError,
    FieldParseError,
    GpsFix,
    MalformedSentenceError,
    NmeaError,
    RawSentence,
    SentenceKind,
    compute_checksum,
    extract_fix,
    parse_sentence,
    read_fix,
    render_gga,
    render_no_fix_gga,
    render_rmc,
    verify_checksum,
)

__all__ = [
    'ChecksumMismatchError',
    'FieldParseError',
    'GpsFix',
    'MalformedSentenceError',
    'NmeaError',
    'RawSentence',
    'SentenceKind',
    'compute_checksum',
    'extract_fix',
    'parse_sentence',
    'read_fix',
    'render_gga',
    'render_no_fix_gga',
    'render_rmc',
    'verify_checksum',
]
