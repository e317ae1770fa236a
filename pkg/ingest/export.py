"""
GeoJSON (RFC 7946) export of stored readings.

Every fixed reading becomes a Point with its ride color. Rides can also be
drawn as LineStrings in seq order, and a grid aggregation as one Polygon per
cell. Positions are [lon, lat].
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from typing import Any, Iterable

from .geohash import bounds
from .records import GridCell, IngestRecord

PALETTE = (
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0",
    "#f032e6", "#bcf60c", "#008080", "#9a6324", "#800000", "#000075",
)


def _palette_slot(ride_id: str, style_seed: int) -> int:
    digest = hashlib.sha256(f"{style_seed}:{ride_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % len(PALETTE)


def ride_colors(ride_ids: Iterable[str], style_seed: int = 0) -> dict[str, str]:
    """
    Color per ride.

    Rides take their hashed palette slot in ride-id order; a taken slot moves
    on to the next free one, so up to len(PALETTE) rides get distinct colors.
    A color is therefore relative to the rides colored together: rides with
    smaller ids can push a ride off its hashed slot, rides with larger ids
    never change it. The same rides and seed always give the same colors.
    """
    colors: dict[str, str] = {}
    taken: set[int] = set()
    for ride_id in sorted(set(ride_ids)):
        slot = _palette_slot(ride_id, style_seed)
        if len(taken) < len(PALETTE):
            while slot in taken:
                slot = (slot + 1) % len(PALETTE)
        taken.add(slot)
        colors[ride_id] = PALETTE[slot]
    return colors


def _point(record: IngestRecord, color: str) -> dict[str, Any]:
    reading = record.reading
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [reading.lon, reading.lat]},
        "properties": {
            "ride": reading.ride_id,
            "device": record.device_id,
            "seq": reading.seq,
            "ppm": reading.ppm,
            "adc": reading.channels[0].adc,
            "utc": reading.utc,
            "color": color,
        },
    }


def _has_position(record: IngestRecord) -> bool:
    reading = record.reading
    return reading.fix_valid and reading.lat is not None and reading.lon is not None


def _cell(cell: GridCell) -> dict[str, Any]:
    min_lat, min_lon, max_lat, max_lon = bounds(cell.cell_id)
    ring = [
        [min_lon, min_lat],
        [max_lon, min_lat],
        [max_lon, max_lat],
        [min_lon, max_lat],
        [min_lon, min_lat],
    ]
    properties = cell.to_dict()
    properties["layer"] = "grid"
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [ring]},
        "properties": properties,
    }


def build_feature_collection(
    records: Iterable[IngestRecord],
    style_seed: int = 0,
    tracks: bool = False,
    grid: list[GridCell] | None = None,
) -> dict[str, Any]:
    """The export as a dict; see `export_geojson`."""
    fixed = sorted(
        (r for r in records if _has_position(r)),
        key=lambda r: r.sort_key,
    )
    colors = ride_colors((r.ride_id for r in fixed), style_seed)
    features = [_point(r, colors[r.ride_id]) for r in fixed]

    if tracks:
        by_ride: dict[tuple[str, str], list[IngestRecord]] = defaultdict(list)
        for record in fixed:
            by_ride[(record.ride_id, record.device_id)].append(record)
        for (ride_id, device_id), rows in sorted(by_ride.items()):
            if len(rows) < 2:
                continue
            features.append({
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[r.reading.lon, r.reading.lat] for r in rows],
                },
                "properties": {
                    "ride": ride_id,
                    "device": device_id,
                    "color": colors[ride_id],
                    "layer": "track",
                },
            })

    for cell in grid or []:
        features.append(_cell(cell))
    return {"type": "FeatureCollection", "features": features}


def export_geojson(
    records: Iterable[IngestRecord],
    style_seed: int = 0,
    tracks: bool = False,
    grid: list[GridCell] | None = None,
) -> str:
    """
    Render records as a GeoJSON FeatureCollection.

    Args:
        records: Records to draw; readings without a fix are skipped.
        style_seed (int): Changes the ride color assignment.
        tracks (bool): Add one LineString per ride with at least two fixes.
        grid (list[GridCell] | None): Cells to add as Polygons.

    Returns:
        str: The document; identical input gives identical text.
    """
    return json.dumps(build_feature_collection(records, style_seed, tracks, grid), indent=1)
