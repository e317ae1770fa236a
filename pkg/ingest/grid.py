"""
Spatial aggregation of fixed readings into geohash cells.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

import numpy as np

from .geohash import check_precision, encode
from .records import GridCell, IngestRecord

DEFAULT_PRECISION = 7


def aggregate_grid(
    records: Iterable[IngestRecord], precision: int = DEFAULT_PRECISION
) -> list[GridCell]:
    """
    Per-cell statistics of the first channel's ppm.

    Readings without a fix, or whose first channel saturated (ppm is None),
    are left out.

    Args:
        records: Records to aggregate.
        precision (int): Geohash length, 1..12.

    Returns:
        list[GridCell]: Sorted by cell id.
    """
    check_precision(precision)
    values: dict[str, list[float]] = defaultdict(list)
    for record in records:
        reading = record.reading
        if not reading.fix_valid or reading.lat is None or reading.lon is None:
            continue
        if reading.ppm is None:
            continue
        values[encode(reading.lat, reading.lon, precision)].append(reading.ppm)

    cells = []
    for cell_id in sorted(values):
        ppm = np.asarray(values[cell_id], dtype=float)
        low, high = float(ppm.min()), float(ppm.max())
        mean = float(np.clip(ppm.mean(), low, high))
        cells.append(GridCell(cell_id, int(ppm.size), mean, low, high))
    return cells
