"""
Base-32 geohash cell keys.

Bits alternate longitude, latitude, starting with longitude; each bit halves
the current interval and is 1 when the point lies in the upper half.
"""

from __future__ import annotations

BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"
_DECODE = {c: i for i, c in enumerate(BASE32)}

MIN_PRECISION = 1
MAX_PRECISION = 12


def check_precision(precision: int) -> None:
    if not MIN_PRECISION <= precision <= MAX_PRECISION:
        raise ValueError(f"precision must be in {MIN_PRECISION}..{MAX_PRECISION}, got {precision}")


def encode(lat: float, lon: float, precision: int = 7) -> str:
    """
    Geohash of a point.

    Args:
        lat (float): Latitude in [-90, 90].
        lon (float): Longitude in [-180, 180].
        precision (int): Number of characters, 1..12.

    Returns:
        str: The cell key.
    """
    check_precision(precision)
    if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
        raise ValueError(f"position out of range: {lat}, {lon}")

    lat_range = [-90.0, 90.0]
    lon_range = [-180.0, 180.0]
    chars = []
    even = True
    for _ in range(precision):
        value = 0
        for _ in range(5):
            rng, x = (lon_range, lon) if even else (lat_range, lat)
            mid = (rng[0] + rng[1]) / 2
            if x >= mid:
                value = (value << 1) | 1
                rng[0] = mid
            else:
                value <<= 1
                rng[1] = mid
            even = not even
        chars.append(BASE32[value])
    return "".join(chars)


def bounds(cell_id: str) -> tuple[float, float, float, float]:
    """(min_lat, min_lon, max_lat, max_lon) of a cell."""
    if not cell_id:
        raise ValueError("empty geohash")
    check_precision(len(cell_id))
    lat_range = [-90.0, 90.0]
    lon_range = [-180.0, 180.0]
    even = True
    for char in cell_id:
        try:
            value = _DECODE[char]
        except KeyError:
            raise ValueError(f"invalid geohash character {char!r}") from None
        for shift in range(4, -1, -1):
            rng = lon_range if even else lat_range
            mid = (rng[0] + rng[1]) / 2
            if (value >> shift) & 1:
                rng[0] = mid
            else:
                rng[1] = mid
            even = not even
    return lat_range[0], lon_range[0], lat_range[1], lon_range[1]
