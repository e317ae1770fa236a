"""
Tests for the Flask read API.
"""

import json
import pytest  # type: ignore
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from ingest import IngestService, MemoryReadingStore
from ui.app import create_app

T0 = 1_598_954_400_000


def reading_line(ride: str, seq: int, lat: float, lon: float, ppm: float) -> bytes:
    return json.dumps({
        "ride": ride,
        "seq": seq,
        "t": 5.0 * (seq + 1),
        "utc": f"2020-09-01T10:00:{5 * (seq + 1):02d}.000Z",
        "fix": True,
        "lat": lat,
        "lon": lon,
        "ch": [{"id": 0, "adc": 512, "ppm": ppm}],
    }).encode()


@pytest.fixture
def client():
    store = MemoryReadingStore()
    service = IngestService(store, clock=lambda: T0)
    header = {"ride_id": "aaaa0001", "device_id": "bike-001", "count": 2, "first_seq": 0}
    service.on_message("ardueco/bike-001/session", json.dumps(header).encode())
    service.on_message("ardueco/bike-001/data", reading_line("aaaa0001", 0, 45.40, 11.87, 2.0))
    service.on_message("ardueco/bike-001/data", reading_line("aaaa0001", 1, 45.41, 11.88, 4.0))
    service.on_message("ardueco/bike-002/data", reading_line("bbbb0002", 0, 46.00, 12.00, 8.0))
    app = create_app(store)
    app.config["TESTING"] = True
    return app.test_client()


class TestApi:
    """Test the JSON endpoints."""

    def test_rides(self, client) -> None:
        """Test ride summaries with their completeness."""
        rides = client.get("/api/rides").get_json()["rides"]
        by_id = {r["ride_id"]: r for r in rides}
        assert by_id["aaaa0001"]["expected_count"] == 2
        assert by_id["aaaa0001"]["received_count"] == 2
        assert by_id["bbbb0002"]["expected_count"] is None

    def test_readings_filters(self, client) -> None:
        """Test device, ride and bbox filters."""
        assert client.get("/api/readings").get_json()["count"] == 3
        assert client.get("/api/readings?device=bike-002").get_json()["count"] == 1
        assert client.get("/api/readings?ride=aaaa0001").get_json()["count"] == 2
        doc = client.get("/api/readings?bbox=11.86,45.39,11.875,45.405").get_json()
        assert doc["count"] == 1
        assert doc["readings"][0]["seq"] == 0

    def test_time_filter(self, client) -> None:
        """Test start and end are inclusive epoch milliseconds."""
        doc = client.get(f"/api/readings?start={T0 + 10_000}&end={T0 + 10_000}").get_json()
        assert doc["count"] == 1
        assert doc["readings"][0]["ride"] == "aaaa0001"

    def test_geojson(self, client) -> None:
        """Test the map endpoint serves GeoJSON with optional tracks."""
        response = client.get("/api/geojson?tracks=1")
        assert response.status_code == 200
        assert response.mimetype == "application/geo+json"
        kinds = [f["geometry"]["type"] for f in json.loads(response.data)["features"]]
        assert kinds.count("Point") == 3
        assert kinds.count("LineString") == 1

    def test_grid(self, client) -> None:
        """Test coarse cells merge nearby readings."""
        cells = client.get("/api/grid?precision=2").get_json()["cells"]
        assert sum(c["count"] for c in cells) == 3
        assert max(c["max_ppm"] for c in cells) == 8.0

    def test_bad_queries(self, client) -> None:
        """Test malformed parameters answer 400 with a message."""
        for url in (
            "/api/readings?bbox=1,2,3",
            "/api/readings?bbox=5,0,1,1",
            "/api/readings?start=soon",
            "/api/grid?precision=13",
        ):
            response = client.get(url)
            assert response.status_code == 400
            assert "error" in response.get_json()

    def test_unknown_route(self, client) -> None:
        """Test unknown paths answer JSON 404."""
        response = client.get("/api/nothing")
        assert response.status_code == 404
        assert response.get_json() == {"error": "Not found"}

    def test_store_path(self, tmp_path: Path) -> None:
        """Test the app opens a JSON-lines store from a path."""
        app = create_app(tmp_path / "readings.jsonl")
        assert app.test_client().get("/api/readings").get_json() == {"count": 0, "readings": []}
