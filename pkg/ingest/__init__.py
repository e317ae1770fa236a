"""
Server side: message handler, reading store, grid aggregation and GeoJSON export.
"""

from .export import PALETTE, build_feature_collection, export_geojson, ride_colors
from .geohash import bounds as geohash_bounds
from .geohash import encode as geohash_encode
from .grid import DEFAULT_PRECISION, aggregate_grid
from .records import (
    DuplicateRecordError,
    GridCell,
    IngestRecord,
    RideNotFoundError,
    RideStatus,
    RideSummary,
)
from .service import DATA_FILTER, SESSION_FILTER, TOPIC_PATTERN, IngestService, parse_header
from .store import (
    JsonlReadingStore,
    MemoryReadingStore,
    QuarantineEntry,
    ReadingStore,
    StoreError,
    StoreFilter,
    open_store,
    utc_to_ms,
)

__all__ = [
    'PALETTE', 'build_feature_collection', 'export_geojson', 'ride_colors',
    'geohash_bounds', 'geohash_encode',
    'DEFAULT_PRECISION', 'aggregate_grid',
    'DuplicateRecordError', 'GridCell', 'IngestRecord', 'RideNotFoundError', 'RideStatus',
    'RideSummary',
    'DATA_FILTER', 'SESSION_FILTER', 'TOPIC_PATTERN', 'IngestService', 'parse_header',
    'JsonlReadingStore', 'MemoryReadingStore', 'QuarantineEntry', 'ReadingStore', 'StoreError',
    'StoreFilter', 'open_store', 'utc_to_ms',
]
