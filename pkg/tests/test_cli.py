"""
Tests for the command-line interface.
"""

import json
import pytest  # type: ignore
import socket
import sys
import threading
import time
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from cli.cli import STORE_ENV, main
from cli.output import write_output
from ingest import JsonlReadingStore
from mqttwire import Connack, Connect, Disconnect, Puback, Publish, StreamDecoder, encode


def reading_line(seq: int, ride: str = "1a2b3c4d") -> str:
    return json.dumps({
        "ride": ride,
        "seq": seq,
        "t": 5.0 * (seq + 1),
        "utc": f"2020-09-01T10:00:{5 * (seq + 1):02d}.000Z",
        "fix": True,
        "lat": 45.4064 + 0.0001 * seq,
        "lon": 11.8768,
        "ch": [{"id": 0, "adc": 512, "ppm": 99.29}],
    })


@pytest.fixture
def perm_log(tmp_path: Path) -> Path:
    path = tmp_path / "perm_log.txt"
    lines = [reading_line(0), reading_line(1), "", reading_line(2), "not a reading"]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def params_file(tmp_path: Path, **overrides: object) -> Path:
    doc = {
        "ssid": "ardueco-dock",
        "password": "secret",
        "endpoint_host": "broker.local",
        "endpoint_port": 1883,
        "topic_session": "ardueco/bike-001/session",
        "topic_data": "ardueco/bike-001/data",
        "device_id": "bike-001",
    }
    doc.update(overrides)
    path = tmp_path / "params.json"
    path.write_text(json.dumps({k: v for k, v in doc.items() if v is not None}), encoding="utf-8")
    return path


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def upload(port: int, seqs: list[int], timeout: float = 5.0) -> list:
    """Connect as bike-001, publish the readings at QoS 1 and return what came back."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            sock = socket.create_connection(("127.0.0.1", port), timeout=1)
            break
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)
    with sock:
        sock.sendall(encode(Connect("bike-001")))
        for seq in seqs:
            payload = reading_line(seq).encode()
            packet = Publish("ardueco/bike-001/data", payload, qos=1, packet_id=seq + 1)
            sock.sendall(encode(packet))
        decoder = StreamDecoder()
        packets: list = []
        sock.settimeout(0.5)
        while len(packets) < len(seqs) + 1 and time.monotonic() < deadline:
            try:
                data = sock.recv(4096)
            except socket.timeout:
                continue
            if not data:
                break
            packets.extend(decoder.feed(data))
        sock.sendall(encode(Disconnect()))
    return packets


def serve_and_upload(store: Path, seqs: list[int]) -> tuple[int, list]:
    port = free_port()
    codes: list[int] = []
    argv = [
        "serve", "--host", "127.0.0.1", "--port", str(port), "--store", str(store),
        "--duration", "2",
    ]
    thread = threading.Thread(target=lambda: codes.append(main(argv)))
    thread.start()
    try:
        packets = upload(port, seqs)
    finally:
        thread.join(timeout=10)
    assert not thread.is_alive()
    return codes[0], packets


class TestValidateConfig:
    """Test the validate-config command."""

    def test_valid(self, tmp_path: Path, capsys) -> None:
        """Test a good params.json exits 0."""
        assert main(["validate-config", "--params", str(params_file(tmp_path))]) == 0
        assert "OK" in capsys.readouterr().out

    def test_problems_listed(self, tmp_path: Path, capsys) -> None:
        """Test every problem is printed and the exit code is 1."""
        path = params_file(tmp_path, ssid=None, endpoint_port=0)
        assert main(["validate-config", "--params", str(path)]) == 1
        out = capsys.readouterr().out
        assert "ssid" in out
        assert "endpoint_port" in out
        assert "would not boot" in out

    def test_not_json(self, tmp_path: Path, capsys) -> None:
        """Test a broken file is reported, not raised."""
        path = tmp_path / "params.json"
        path.write_text("{ssid:", encoding="utf-8")
        assert main(["validate-config", "--params", str(path)]) == 1
        assert "not valid JSON" in capsys.readouterr().out

    def test_missing_file(self, tmp_path: Path, capsys) -> None:
        """Test an unreadable path is a domain error."""
        assert main(["validate-config", "--params", str(tmp_path / "nope.json")]) == 1
        assert capsys.readouterr().err.startswith("Error:")


class TestReplayExportStats:
    """Test commands working on a reading store."""

    def test_replay(self, tmp_path: Path, perm_log: Path, capsys) -> None:
        """Test a log is ingested, blank lines skipped and garbage quarantined."""
        store = tmp_path / "readings.jsonl"
        argv = [
            "replay", "--perm-log", str(perm_log), "--store", str(store), "--device-id", "bike-001",
        ]
        assert main(argv) == 0
        out = capsys.readouterr().out
        assert "1a2b3c4d  bike-001  3/?  pending" in out
        assert "3 ingested, 0 duplicates, 1 quarantined" in out
        first = store.read_bytes()

        assert main(argv) == 0
        assert "0 ingested, 3 duplicates, 0 quarantined" in capsys.readouterr().out
        assert store.read_bytes() == first
        sidecar = store.with_name(store.name + ".quarantine")
        assert len(sidecar.read_text(encoding="utf-8").splitlines()) == 1

    def test_export(self, tmp_path: Path, perm_log: Path, capsys) -> None:
        """Test stored readings become GeoJSON points and tracks."""
        store = tmp_path / "readings.jsonl"
        main(["replay", "--perm-log", str(perm_log), "--store", str(store)])
        out_path = tmp_path / "map.geojson"
        assert main(["export", "--store", str(store), "--geojson", str(out_path), "--tracks"]) == 0
        assert "3 points exported" in capsys.readouterr().out
        doc = json.loads(out_path.read_text(encoding="utf-8"))
        kinds = [f["geometry"]["type"] for f in doc["features"]]
        assert doc["type"] == "FeatureCollection"
        assert kinds.count("Point") == 3
        assert kinds.count("LineString") == 1

    def test_export_empty_store(self, tmp_path: Path, capsys) -> None:
        """Test an empty store exports an empty collection."""
        store = tmp_path / "readings.jsonl"
        store.touch()
        assert main(["export", "--store", str(store), "--geojson", "-"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc == {"type": "FeatureCollection", "features": []}

    def test_export_missing_store(self, tmp_path: Path, capsys) -> None:
        """Test exporting from a store that does not exist."""
        code = main(["export", "--store", str(tmp_path / "none.jsonl"), "--geojson", "-"])
        assert code == 1
        assert "store not found" in capsys.readouterr().err

    def test_stats_from_environment(
        self, tmp_path: Path, perm_log: Path, monkeypatch, capsys
    ) -> None:
        """Test --store falls back to the environment variable."""
        store = tmp_path / "readings.jsonl"
        monkeypatch.setenv(STORE_ENV, str(store))
        main(["replay", "--perm-log", str(perm_log)])
        capsys.readouterr()
        assert main(["stats", "--precision", "5"]) == 0
        out = capsys.readouterr().out
        assert "1 rides, 3 readings" in out
        assert "at precision 5" in out

    def test_precision_range(self, tmp_path: Path) -> None:
        """Test precisions outside 1..12 are usage errors."""
        with pytest.raises(SystemExit) as info:  # type: ignore
            main(["stats", "--store", str(tmp_path / "r.jsonl"), "--precision", "13"])
        assert info.value.code == 2


class TestServe:
    """Test the broker with ingestion on a loopback port."""

    def test_uploads_stored_and_survive_restart(self, tmp_path: Path, capsys) -> None:
        """Test three acknowledged readings are stored, kept across a restart and not doubled."""
        store = tmp_path / "readings.jsonl"
        code, packets = serve_and_upload(store, [0, 1, 2])
        assert code == 0
        assert packets == [Connack(), Puback(1), Puback(2), Puback(3)]
        out = capsys.readouterr().out
        assert "Serving MQTT on 127.0.0.1:" in out
        assert "3 records stored, 0 quarantined" in out
        assert len(JsonlReadingStore(store)) == 3

        code, packets = serve_and_upload(store, [1])
        assert code == 0
        assert packets == [Connack(), Puback(2)]
        assert "3 records stored, 0 quarantined" in capsys.readouterr().out
        reopened = JsonlReadingStore(store)
        assert sorted(r.reading.seq for r in reopened.query()) == [0, 1, 2]
        assert len(store.read_text(encoding="utf-8").splitlines()) == 3

    def test_port_in_use(self, tmp_path: Path, capsys) -> None:
        """Test a taken port is a domain error, not a traceback."""
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as taken:
            taken.bind(("127.0.0.1", 0))
            taken.listen(1)
            port = taken.getsockname()[1]
            argv = [
                "serve", "--host", "127.0.0.1", "--port", str(port),
                "--store", str(tmp_path / "r.jsonl"),
            ]
            assert main(argv) == 1
        assert "cannot listen" in capsys.readouterr().err


class TestSimulate:
    """Test the simulate command."""

    def test_small_scenario(self, tmp_path: Path, capsys) -> None:
        """Test a report and a map are written."""
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({"n_devices": 1, "duration_s": 600}), encoding="utf-8")
        report_path = tmp_path / "report.json"
        map_path = tmp_path / "map.geojson"
        argv = [
            "simulate", "--scenario", str(scenario), "--out", str(report_path),
            "--geojson", str(map_path), "--seed", "9",
        ]
        assert main(argv) == 0
        assert capsys.readouterr().out.startswith("generated ")
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert report["scenario"]["seed"] == 9
        assert report["scenario"]["n_devices"] == 1
        assert json.loads(map_path.read_text(encoding="utf-8"))["type"] == "FeatureCollection"

    def test_bad_scenario(self, tmp_path: Path, capsys) -> None:
        """Test scenario errors name the field and exit 1."""
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({"qos": 2}), encoding="utf-8")
        code = main(["simulate", "--scenario", str(scenario), "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert "qos" in capsys.readouterr().err
        assert not (tmp_path / "r.json").exists()


class TestWriteOutput:
    """Test atomic output files."""

    def test_replaces_whole_file(self, tmp_path: Path) -> None:
        """Test the destination holds exactly the new text and no temp file remains."""
        path = tmp_path / "out" / "report.json"
        write_output(str(path), "old")
        write_output(str(path), "new")
        assert path.read_text(encoding="utf-8") == "new"
        assert [p.name for p in path.parent.iterdir()] == ["report.json"]

    def test_stdout(self, capsys) -> None:
        """Test - writes to standard output."""
        write_output("-", "hello\n")
        assert capsys.readouterr().out == "hello\n"
