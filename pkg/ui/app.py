"""
Flask read API over a reading store.

Serves rides, filtered readings, the GeoJSON map and the concentration grid
as JSON so a map front end can poll them.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from flask import Flask, Response, jsonify, request  # type: ignore

from ingest import (
    DEFAULT_PRECISION,
    IngestService,
    JsonlReadingStore,
    MemoryReadingStore,
    ReadingStore,
    StoreFilter,
    aggregate_grid,
    build_feature_collection,
)

STORE_ENV = "ARDUECO_STORE"

JsonResponse = Union[Response, Tuple[Response, int]]


class BadQuery(ValueError):
    """A query string parameter could not be parsed."""


def _int_arg(name: str) -> Optional[int]:
    raw = request.args.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise BadQuery(f"{name} must be an integer, got {raw!r}") from None


def _bbox_arg() -> Optional[Tuple[float, float, float, float]]:
    raw = request.args.get("bbox")
    if raw is None:
        return None
    parts = raw.split(",")
    if len(parts) != 4:
        raise BadQuery("bbox must be min_lon,min_lat,max_lon,max_lat")
    try:
        min_lon, min_lat, max_lon, max_lat = (float(p) for p in parts)
    except ValueError:
        raise BadQuery(f"bbox values must be numbers, got {raw!r}") from None
    return min_lon, min_lat, max_lon, max_lat


def _precision_arg() -> int:
    precision = _int_arg("precision")
    if precision is None:
        return DEFAULT_PRECISION
    if not 1 <= precision <= 12:
        raise BadQuery("precision must be in 1..12")
    return precision


def _store_filter() -> StoreFilter:
    try:
        return StoreFilter(
            bbox=_bbox_arg(),
            start_ms=_int_arg("start"),
            end_ms=_int_arg("end"),
            ride_id=request.args.get("ride"),
            device_id=request.args.get("device"),
        )
    except BadQuery:
        raise
    except ValueError as e:
        raise BadQuery(str(e)) from None


def create_app(store: Union[ReadingStore, str, Path, None] = None) -> Flask:
    """
    Build the API application.

    Args:
        store: A store instance, a JSON-lines store path, or None to use
            $ARDUECO_STORE (an empty in-memory store when unset).

    Returns:
        Flask: The configured application.
    """
    if store is None:
        env_path = os.environ.get(STORE_ENV)
        store = JsonlReadingStore(env_path) if env_path else MemoryReadingStore()
    elif not isinstance(store, ReadingStore):
        store = JsonlReadingStore(store)

    app: Flask = Flask(__name__)
    app.config["JSON_SORT_KEYS"] = False
    app.config["READING_STORE"] = store

    def current_store() -> ReadingStore:
        return app.config["READING_STORE"]

    @app.errorhandler(BadQuery)  # type: ignore
    def bad_query(error: BadQuery) -> JsonResponse:
        return jsonify({"error": str(error)}), 400

    @app.errorhandler(404)  # type: ignore
    def not_found(error: Any) -> JsonResponse:
        return jsonify({"error": "Not found"}), 404

    @app.errorhandler(500)  # type: ignore
    def server_error(error: Any) -> JsonResponse:
        return jsonify({"error": "Server error"}), 500

    @app.route("/api/rides")  # type: ignore
    def rides() -> JsonResponse:
        """Completeness summary of every ride in the store."""
        service = IngestService(current_store())
        return jsonify({"rides": [s.to_dict() for s in service.summaries()]})

    @app.route("/api/readings")  # type: ignore
    def readings() -> JsonResponse:
        """Stored readings matching ?bbox=&start=&end=&ride=&device=."""
        records = current_store().query(_store_filter())
        return jsonify({"count": len(records), "readings": [r.to_dict() for r in records]})

    @app.route("/api/geojson")  # type: ignore
    def geojson() -> JsonResponse:
        """The map, filtered like /api/readings; ?tracks=1 adds ride lines."""
        records = current_store().query(_store_filter())
        style_seed = _int_arg("style_seed") or 0
        tracks = request.args.get("tracks", "0") not in ("0", "false", "")
        grid = None
        if request.args.get("precision") is not None:
            grid = aggregate_grid(records, _precision_arg())
        collection: Dict[str, Any] = build_feature_collection(
            records, style_seed=style_seed, tracks=tracks, grid=grid
        )
        return Response(json.dumps(collection), mimetype="application/geo+json")

    @app.route("/api/grid")  # type: ignore
    def grid() -> JsonResponse:
        """Per-cell CO statistics at ?precision= (default 7)."""
        cells = aggregate_grid(current_store().query(_store_filter()), _precision_arg())
        return jsonify({"cells": [c.to_dict() for c in cells]})

    return app


if __name__ == "__main__":  # type: ignore
    print("Starting ArduECO read API...")
    print("Visit: http://localhost:5000/api/rides")
    create_app().run(host="0.0.0.0", port=5000)
