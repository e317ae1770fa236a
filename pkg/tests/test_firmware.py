"""
Unit tests for the device firmware: configuration, sampling loop and uploads.
"""

import json
import pytest  # type: ignore
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from firmware import (
    CACHE_LOG,
    PARAMS_FILE,
    PERM_LOG,
    ConfigValidationError,
    InvalidPhaseError,
    NetLed,
    Phase,
    Reading,
    ReadingFormatError,
    SdCardError,
    SetupLed,
    VirtualSd,
    abort_upload,
    boot,
    format_utc,
    group_cache,
    led_state,
    load_config,
    parse_params,
    press_button,
    run_upload,
    tick,
    upload_receive,
    upload_tick,
    validate_params,
)
from ingest import IngestService, MemoryReadingStore, RideStatus, StoreError
from mqttwire import Broker, ClientSession, Connected, ConnectionRefused, RetryPolicy, encode
from nmea import GpsFix, render_gga, render_no_fix_gga

T0 = 1_598_954_400_000
SSID = "ardueco-dock"


def params(**overrides: object) -> dict:
    doc = {
        "ssid": SSID,
        "password": "secret",
        "endpoint_host": "broker.local",
        "endpoint_port": 1883,
        "topic_session": "ardueco/bike-001/session",
        "topic_data": "ardueco/bike-001/data",
        "device_id": "bike-001",
    }
    doc.update(overrides)
    return {k: v for k, v in doc.items() if v is not None}


def booted(**overrides: object):
    sd = VirtualSd(json.dumps(params(**overrides)))
    state = boot(sd, np.random.default_rng(0), T0)
    return sd, state


def ride(state, sd, seconds: int, adc: int = 512):
    readings = []
    for s in range(1, seconds + 1):
        state, taken = tick(state, sd, T0 + s * 1000, None, [adc])
        readings.extend(taken)
    return state, readings


def deliver(broker: Broker, conn, frames: list, now: int) -> bytes:
    replies = []
    for frame in frames:
        result = broker.feed(conn, frame, now)
        replies.extend(encode(p) for p in result.responses)
    return b"".join(replies)


class FullDiskStore(MemoryReadingStore):
    """Accepts headers but fails every reading write."""

    def _persist_record(self, record) -> None:
        raise StoreError("disk full")


class TestConfig:
    """Test params.json validation."""

    def test_valid_params(self) -> None:
        """Test a complete document loads with defaults filled in."""
        config = load_config(params())
        assert config.sample_period_s == 5
        assert config.reboot_delay_s == 10
        assert config.qos == 1
        assert len(config.channels) == 1
        assert validate_params(params()) == []

    def test_every_problem_reported(self) -> None:
        """Test missing and mistyped keys are all named."""
        doc = params(ssid=None, endpoint_port="1883")
        fields = {p.field for p in validate_params(doc)}
        assert fields == {"ssid", "endpoint_port"}

    def test_type_message(self) -> None:
        """Test type problems say what was expected."""
        problems = validate_params(params(endpoint_port="1883"))
        assert str(problems[0]) == "endpoint_port: expected integer, got string"

    def test_value_ranges(self) -> None:
        """Test zero period, bad port and QoS 2 are rejected."""
        doc = params(sample_period_s=0, endpoint_port=70000, qos=2)
        fields = {p.field for p in validate_params(doc)}
        assert fields == {"sample_period_s", "endpoint_port", "qos"}

    def test_wildcard_topic_rejected(self) -> None:
        """Test publish topics cannot contain wildcards."""
        fields = {p.field for p in validate_params(params(topic_data="ardueco/+/data"))}
        assert fields == {"topic_data"}

    def test_not_an_object(self) -> None:
        """Test a JSON array is not a config."""
        assert [p.field for p in validate_params([1, 2])] == ["params.json"]

    def test_bad_json_text(self) -> None:
        """Test a syntax error becomes a config problem."""
        with pytest.raises(ConfigValidationError) as info:  # type: ignore
            parse_params("{not json")
        assert info.value.problems[0].field == "params.json"

    def test_channels_must_be_unique(self) -> None:
        """Test duplicate channel ids are rejected."""
        doc = params(channels=[{"channel_id": 0}, {"channel_id": 0}])
        assert "channels" in {p.field for p in validate_params(doc)}


class TestBoot:
    """Test boot and configuration errors."""

    def test_successful_boot(self) -> None:
        """Test a good card boots into SAMPLING with both logs present."""
        sd, state = booted()
        assert state.phase is Phase.SAMPLING
        assert state.ride_id is not None and len(state.ride_id) == 8
        assert state.next_sample_at == T0 + 5000
        assert sd.exists(CACHE_LOG) and sd.exists(PERM_LOG)
        assert led_state(state).setup is SetupLed.OK

    def test_missing_params_reboots_after_default_delay(self) -> None:
        """Test a card without params.json reboots 10 s later."""
        sd = VirtualSd()
        state = boot(sd, np.random.default_rng(0), T0)
        assert state.phase is Phase.CONFIG_ERROR
        assert state.reboot_at == T0 + 10_000
        assert state.led_setup is SetupLed.ERROR
        assert state.config_problems[0].field == PARAMS_FILE

    def test_invalid_params_keeps_their_reboot_delay(self) -> None:
        """Test a broken config with a usable reboot delay honors it."""
        sd = VirtualSd(json.dumps(params(ssid=None, reboot_delay_s=3)))
        state = boot(sd, np.random.default_rng(0), T0)
        assert state.reboot_at == T0 + 3000

    def test_config_error_samples_nothing_then_reboots(self) -> None:
        """Test the device waits, then boots again once the card is fixed."""
        sd = VirtualSd()
        rng = np.random.default_rng(0)
        state = boot(sd, rng, T0)
        state, readings = tick(state, sd, T0 + 9000, None, [512], rng)
        assert state.phase is Phase.CONFIG_ERROR
        assert readings == []
        sd.write_text(PARAMS_FILE, json.dumps(params()))
        state, _ = tick(state, sd, T0 + 10_000, None, [512], rng)
        assert state.phase is Phase.SAMPLING
        assert state.boot_at == T0 + 10_000

    def test_reboot_needs_rng(self) -> None:
        """Test a due reboot without a generator is an error."""
        sd = VirtualSd()
        state = boot(sd, np.random.default_rng(0), T0)
        with pytest.raises(ValueError):  # type: ignore
            tick(state, sd, T0 + 10_000, None, [512])

    def test_boot_never_truncates_cache(self) -> None:
        """Test readings of an earlier ride survive a reboot."""
        sd, state = booted()
        state, _ = ride(state, sd, 10)
        assert len(sd.read_lines(CACHE_LOG)) == 2
        again = boot(sd, np.random.default_rng(1), T0 + 20_000)
        assert again.ride_id != state.ride_id
        assert len(sd.read_lines(CACHE_LOG)) == 2


class TestSampling:
    """Test the sampling loop."""

    def test_one_minute_ride(self) -> None:
        """Test 60 s at a 5 s period gives 12 readings at t = 5..60."""
        sd, state = booted()
        state, readings = ride(state, sd, 60)
        assert len(readings) == 12
        assert [r.t for r in readings] == [5.0 * k for k in range(1, 13)]
        assert [r.seq for r in readings] == list(range(12))
        assert len(sd.read_lines(CACHE_LOG)) == 12
        assert sd.read_lines(PERM_LOG) == sd.read_lines(CACHE_LOG)
        assert readings[0].utc == "2020-09-01T10:00:05.000Z"

    def test_missed_periods_are_skipped(self) -> None:
        """Test a late tick takes one reading and stays on the boot grid."""
        sd, state = booted()
        state, readings = tick(state, sd, T0 + 17_000, None, [512])
        assert len(readings) == 1
        assert readings[0].t == 17.0
        assert state.next_sample_at == T0 + 20_000

    def test_gps_fix_tags_reading(self) -> None:
        """Test a valid GGA line geotags the reading."""
        sd, state = booted()
        line = render_gga(GpsFix(36005.0, 45.4064, 11.8768))
        _, readings = tick(state, sd, T0 + 5000, line, [512])
        assert readings[0].fix_valid
        assert readings[0].lat == pytest.approx(45.4064, abs=2e-6)

    def test_no_fix_reading(self) -> None:
        """Test a quality-0 GGA gives a reading without position."""
        sd, state = booted()
        _, readings = tick(state, sd, T0 + 5000, render_no_fix_gga(36005.0), [512])
        assert not readings[0].fix_valid
        assert readings[0].lat is None and readings[0].lon is None

    def test_corrupted_gps_line(self) -> None:
        """Test a bad checksum just means no fix."""
        sd, state = booted()
        _, readings = tick(state, sd, T0 + 5000, "$GPGGA,*56", [512])
        assert not readings[0].fix_valid

    def test_saturated_channel_has_null_ppm(self) -> None:
        """Test zero counts are logged with ppm null."""
        sd, state = booted()
        _, readings = tick(state, sd, T0 + 5000, None, [0])
        assert readings[0].ppm is None
        assert readings[0].channels[0].adc == 0

    def test_adc_out_of_range(self) -> None:
        """Test counts above full scale are rejected."""
        sd, state = booted()
        with pytest.raises(ValueError):  # type: ignore
            tick(state, sd, T0 + 5000, None, [5000])

    def test_channel_count_mismatch(self) -> None:
        """Test the ADC list must match the configured channels."""
        sd, state = booted()
        with pytest.raises(ValueError):  # type: ignore
            tick(state, sd, T0 + 5000, None, [512, 512])

    def test_format_utc(self) -> None:
        """Test millisecond ISO timestamps."""
        assert format_utc(T0) == "2020-09-01T10:00:00.000Z"
        assert format_utc(T0 + 1234) == "2020-09-01T10:00:01.234Z"


class TestReadingFormat:
    """Test the reading line format."""

    def test_line_parses_back(self) -> None:
        """Test a logged line parses to the same reading."""
        sd, state = booted()
        _, readings = tick(state, sd, T0 + 5000, None, [512])
        line = sd.read_lines(CACHE_LOG)[0]
        assert Reading.from_line(line) == readings[0]
        assert set(json.loads(line)) == {"ride", "seq", "t", "utc", "fix", "lat", "lon", "ch"}

    def test_bad_lines_rejected(self) -> None:
        """Test malformed payloads raise ReadingFormatError."""
        for bad in ("not json", "[]", '{"ride": "1a2b3c4d"}', b"\xff\xfe"):
            with pytest.raises(ReadingFormatError):  # type: ignore
                Reading.from_line(bad)

    def test_position_without_fix_rejected(self) -> None:
        """Test fix=false with coordinates is inconsistent."""
        line = json.dumps({
            "ride": "1a2b3c4d", "seq": 0, "t": 5.0, "utc": "2020-09-01T10:00:05.000Z",
            "fix": False, "lat": 1.0, "lon": 2.0, "ch": [{"id": 0, "adc": 512, "ppm": 99.0}],
        })
        with pytest.raises(ReadingFormatError):  # type: ignore
            Reading.from_line(line)


class TestButton:
    """Test the upload button and scanning."""

    def test_network_visible(self) -> None:
        """Test the configured SSID in range starts a connection."""
        _, state = booted()
        state = press_button(state, ["other", SSID])
        assert state.phase is Phase.CONNECTING
        assert led_state(state).net is NetLed.IN_RANGE

    def test_network_not_visible(self) -> None:
        """Test an out-of-range press keeps sampling."""
        _, state = booted()
        assert press_button(state, ["other"]).phase is Phase.SAMPLING

    def test_button_ignored_without_config(self) -> None:
        """Test the button is rejected during a config error."""
        state = boot(VirtualSd(), np.random.default_rng(0), T0)
        with pytest.raises(InvalidPhaseError):  # type: ignore
            press_button(state, [SSID])

    def test_no_sampling_while_connecting(self) -> None:
        """Test ticks are rejected once the radio is busy."""
        sd, state = booted()
        state = press_button(state, [SSID])
        with pytest.raises(InvalidPhaseError):  # type: ignore
            tick(state, sd, T0 + 5000, None, [512])


class TestUpload:
    """Test uploads against an in-process broker."""

    def connect(self, broker: Broker, session: ClientSession, now: int):
        conn = broker.open_connection("dock")
        reply = deliver(broker, conn, [session.connect(now)], now)
        events, _ = session.receive(reply, now)
        return conn, events

    def upload(self, qos: int = 1, seconds: int = 15):
        sd, state = booted(qos=qos)
        state, readings = ride(state, sd, seconds)
        service = IngestService(clock=lambda: T0)
        broker = Broker()
        service.attach(broker)
        now = T0 + seconds * 1000
        state = press_button(state, [SSID])
        session = ClientSession("bike-001")
        conn, events = self.connect(broker, session, now)
        assert events == [Connected()]
        state, frames = run_upload(state, sd, session, now)
        while True:
            reply = deliver(broker, conn, frames, now)
            if state.phase is not Phase.UPLOADING:
                break
            state, frames = upload_receive(state, sd, session, reply, now)
        return sd, state, readings, service

    def test_qos1_upload_delivers_and_clears_cache(self) -> None:
        """Test every reading is stored and the cache is emptied after the acks."""
        sd, state, readings, service = self.upload(qos=1)
        assert state.phase is Phase.SAMPLING
        assert sd.read_lines(CACHE_LOG) == []
        assert len(sd.read_lines(PERM_LOG)) == 3
        assert len(service.store) == 3
        summary = service.ride_completeness(readings[0].ride_id, "bike-001")
        assert summary.expected_count == 3
        assert summary.status is RideStatus.COMPLETE

    def test_qos0_upload_completes_immediately(self) -> None:
        """Test fire-and-forget uploads finish within run_upload."""
        sd, state, _, service = self.upload(qos=0)
        assert state.phase is Phase.SAMPLING
        assert sd.read_lines(CACHE_LOG) == []
        assert len(service.store) == 3

    def test_empty_cache_announces_zero(self) -> None:
        """Test an upload with nothing cached still sends a count of 0."""
        sd, state = booted()
        state = press_button(state, [SSID])
        session = ClientSession("bike-001")
        broker = Broker()
        self.connect(broker, session, T0)
        state, frames = run_upload(state, sd, session, T0)
        assert state.phase is Phase.UPLOADING
        assert state.upload is not None
        topic, payload = state.upload.messages[0]
        assert topic == "ardueco/bike-001/session"
        assert json.loads(payload)["count"] == 0
        assert len(state.upload.messages) == 1

    def test_unacknowledged_upload_keeps_cache(self) -> None:
        """Test exhausted retries fail the upload and leave the cache alone."""
        sd, state = booted()
        state, _ = ride(state, sd, 10)
        state = press_button(state, [SSID])
        session = ClientSession("bike-001", policy=RetryPolicy(retry_timeout_ms=100, max_retries=1))
        broker = Broker()
        self.connect(broker, session, T0)
        state, _ = run_upload(state, sd, session, T0)
        for now in range(T0 + 100, T0 + 5000, 100):
            state, _ = upload_tick(state, sd, session, now)
            if state.phase is not Phase.UPLOADING:
                break
        assert state.phase is Phase.UPLOAD_ERROR
        assert len(sd.read_lines(CACHE_LOG)) == 2
        state, _ = tick(state, sd, T0 + 15_000, None, [512])
        assert state.phase is Phase.SAMPLING

    def test_store_failure_keeps_cache(self) -> None:
        """Test readings the server could not store are never cleared from the cache."""
        sd, state = booted()
        state, readings = ride(state, sd, 15)
        service = IngestService(FullDiskStore(), clock=lambda: T0)
        broker = Broker()
        service.attach(broker)
        state = press_button(state, [SSID])
        session = ClientSession("bike-001", policy=RetryPolicy(retry_timeout_ms=100, max_retries=2))
        conn, _ = self.connect(broker, session, T0)
        state, frames = run_upload(state, sd, session, T0)
        now = T0
        while state.phase is Phase.UPLOADING and now < T0 + 10_000:
            reply = deliver(broker, conn, frames, now)
            frames = []
            if reply:
                state, frames = upload_receive(state, sd, session, reply, now)
            now += 100
            if state.phase is Phase.UPLOADING:
                state, more = upload_tick(state, sd, session, now)
                frames += more
        assert state.phase is Phase.UPLOAD_ERROR
        assert len(service.store) == 0
        assert len(sd.read_lines(CACHE_LOG)) == len(readings) == 3
        assert broker.hook_failures > 0

    def test_refused_connection(self) -> None:
        """Test a broker refusal leads to UPLOAD_ERROR."""
        sd, state = booted()
        state = press_button(state, [SSID])
        session = ClientSession("bike-001", auth_token="wrong")
        broker = Broker(lambda _client, token: token == "right")
        _, events = self.connect(broker, session, T0)
        assert events == [ConnectionRefused()]
        state = abort_upload(state, "connection refused")
        assert state.phase is Phase.UPLOAD_ERROR

    def test_run_upload_needs_connection(self) -> None:
        """Test uploading over an idle session is rejected."""
        sd, state = booted()
        state = press_button(state, [SSID])
        with pytest.raises(InvalidPhaseError):  # type: ignore
            run_upload(state, sd, ClientSession("bike-001"), T0)


class TestGroupCache:
    """Test splitting the cache into per-ride batches."""

    def test_two_rides(self) -> None:
        """Test lines of consecutive rides become two batches."""
        sd, state = booted()
        state, _ = ride(state, sd, 10)
        second = boot(sd, np.random.default_rng(5), T0 + 100_000)
        for s in (5, 10, 15):
            second, _ = tick(second, sd, T0 + 100_000 + s * 1000, None, [512])
        batches = group_cache(sd.read_lines(CACHE_LOG), "ffffffff", 0)
        assert [b.ride_id for b in batches] == [state.ride_id, second.ride_id]
        assert [b.count for b in batches] == [2, 3]
        assert batches[1].header("bike-001") == {
            "ride_id": second.ride_id, "device_id": "bike-001", "count": 3, "first_seq": 0,
        }

    def test_empty_cache(self) -> None:
        """Test an empty cache gives one empty batch for the current ride."""
        batches = group_cache([], "0badcafe", 7)
        assert len(batches) == 1
        assert (batches[0].ride_id, batches[0].first_seq, batches[0].count) == ("0badcafe", 7, 0)


class TestVirtualSd:
    """Test the in-memory card."""

    def test_long_log_keeps_every_line(self) -> None:
        """Test 50,000 appends read back whole and in order."""
        sd = VirtualSd()
        for i in range(50_000):
            sd.append_line(CACHE_LOG, f'{{"seq":{i}}}')
        lines = sd.read_lines(CACHE_LOG)
        assert len(lines) == 50_000
        assert lines[0] == '{"seq":0}' and lines[-1] == '{"seq":49999}'
        assert sd.read_text(CACHE_LOG).endswith('{"seq":49999}\n')

    def test_write_then_append(self) -> None:
        """Test appends follow whatever text the file already holds."""
        sd = VirtualSd("{}")
        sd.write_text(PERM_LOG, "a\n")
        sd.append_line(PERM_LOG, "b")
        assert sd.read_text(PERM_LOG) == "a\nb\n"
        assert sd.read_text(PARAMS_FILE) == "{}"

    def test_recreate_and_missing(self) -> None:
        """Test recreate empties a log and reading a deleted file fails."""
        sd = VirtualSd()
        sd.append_line(CACHE_LOG, "x")
        sd.recreate(CACHE_LOG)
        assert sd.exists(CACHE_LOG) and sd.read_lines(CACHE_LOG) == []
        sd.delete(CACHE_LOG)
        assert sd.read_lines(CACHE_LOG) == []
        with pytest.raises(SdCardError):  # type: ignore
            sd.read_text(CACHE_LOG)

    def test_newline_in_line_rejected(self) -> None:
        """Test a log line cannot smuggle in a second line."""
        with pytest.raises(ValueError):  # type: ignore
            VirtualSd().append_line(CACHE_LOG, "a\nb")
