"""
Deterministic fleet simulation.

Each device boots when its ride starts, ticks once per simulated second
(rendered GGA sentence plus noisy ADC counts from the CO field), and presses
the button when it arrives at a dock. Uploads go through per-connection lossy
links to an embedded broker whose hook feeds an IngestService. All randomness
comes from per-device streams spawned from the scenario seed, so a scenario
always produces the same report.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from firmware import (
    CACHE_LOG,
    PERM_LOG,
    DeviceConfig,
    DeviceState,
    Phase,
    VirtualSd,
    abort_upload,
    boot,
    press_button,
    run_upload,
    tick,
    upload_receive,
    upload_tick,
)
from ingest import IngestRecord, IngestService, MemoryReadingStore, RideStatus, RideSummary
from mqttwire import Broker, BrokerConnection, ClientSession, Connected, ConnectionRefused, encode
from nmea import GpsFix, render_gga, render_no_fix_gga
from sensor import sample_with_noise

from .energy import EnergyReport, energy_account
from .events import EventLoop
from .field import field_sample
from .mobility import MobilityTrace, random_waypoint_trace
from .network import LossyLink
from .scenario import SimConfig
from .zones import WifiZone, visible_ssids

logger = logging.getLogger(__name__)

TICK_MS = 1000
UPLOAD_POLL_MS = 100
_DAY_MS = 86_400_000
_MIN_PPM = 1e-6


@dataclass
class DeviceStats:
    rides: int = 0
    generated: int = 0
    uploads_ok: int = 0
    uploads_failed: int = 0
    uploads_interrupted: int = 0
    retransmissions: int = 0
    frames_dropped: int = 0
    active_ms: int = 0
    depleted: bool = False


@dataclass
class _Ride:
    trace: MobilityTrace
    started_at: int
    token: int


class SimDevice:
    """One bike: firmware state, SD card, radio links and its random streams."""

    def __init__(
        self, index: int, device_id: str, cfg: SimConfig, seed: np.random.SeedSequence
    ) -> None:
        mobility, sensor, firmware, up, down = (np.random.default_rng(s) for s in seed.spawn(5))
        self.index = index
        self.device_id = device_id
        self.mobility_rng = mobility
        self.sensor_rng = sensor
        self.firmware_rng = firmware
        config = DeviceConfig(
            ssid=cfg.ssid,
            password="",
            endpoint_host="sim-broker",
            endpoint_port=1883,
            topic_session=f"ardueco/{device_id}/session",
            topic_data=f"ardueco/{device_id}/data",
            device_id=device_id,
            sample_period_s=cfg.sample_period_s,
            channels=cfg.channels,
            qos=cfg.qos,
            auth_token=cfg.auth_token,
        )
        self.sd = VirtualSd(config.to_json())
        self.state = DeviceState()
        self.up = LossyLink(cfg.drop_probability, cfg.latency_ms, up)
        self.down = LossyLink(cfg.drop_probability, cfg.latency_ms, down)
        self.zone = cfg.zones[index % len(cfg.zones)]
        self.position = (self.zone.lat, self.zone.lon)
        self.ride: _Ride | None = None
        self.session: ClientSession | None = None
        self.conn: BrokerConnection | None = None
        self.upload_began = 0
        self.connections = 0
        self.ride_token = 0
        self.stats = DeviceStats()

    def __repr__(self) -> str:
        return f"SimDevice({self.device_id!r}, {self.state.phase.value})"


@dataclass
class SimReport:
    """
    Outcome of a run.

    `records` holds the stored readings for GeoJSON export; it is not part of
    the JSON report.
    """

    config: SimConfig
    end_ms: int
    devices: list[dict[str, Any]]
    rides: list[RideSummary]
    totals: dict[str, Any]
    records: list[IngestRecord] = field(default_factory=list, repr=False)

    @property
    def generated(self) -> int:
        return int(self.totals["generated"])

    @property
    def stored(self) -> int:
        return int(self.totals["stored"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.config.to_dict(),
            "end_ms": self.end_ms,
            "totals": self.totals,
            "devices": self.devices,
            "rides": [r.to_dict() for r in self.rides],
        }

    def to_json(self) -> str:
        return json.dumps(_rounded(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _rounded(value: Any) -> Any:
    if isinstance(value, float):
        return round(value, 6)
    if isinstance(value, dict):
        return {k: _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def audit_headers(
    headers: Iterable[dict[str, Any]], records: Iterable[IngestRecord]
) -> list[tuple[str, str]]:
    """
    Rides whose stored readings disagree with the count headers that arrived.

    A header claims `count` readings from `first_seq` on. A ride is flagged
    when a claimed seq never arrived, or when a stored seq lies outside every
    claim (its header was lost).

    Args:
        headers: Session headers as accepted by the ingest side.
        records: Stored records.

    Returns:
        list[tuple[str, str]]: Sorted (device_id, ride_id) of flagged rides.
    """
    claims: dict[tuple[str, str], set[tuple[int, int]]] = defaultdict(set)
    for header in headers:
        key = (header["device_id"], header["ride_id"])
        claims[key].add((header.get("first_seq", 0), header["count"]))
    stored: dict[tuple[str, str], set[int]] = defaultdict(set)
    for record in records:
        stored[(record.device_id, record.ride_id)].add(record.reading.seq)

    flagged = []
    for key in sorted(set(claims) | set(stored)):
        seqs = stored.get(key, set())
        covered: set[int] = set()
        for first_seq, count in claims.get(key, ()):
            covered.update(range(first_seq, first_seq + count))
        if covered != seqs:
            flagged.append(key)
    return flagged


class FleetSimulator:
    """
    Runs one scenario.

    Args:
        cfg (SimConfig): The scenario.
    """

    def __init__(self, cfg: SimConfig) -> None:
        self.cfg = cfg
        self.loop = EventLoop(cfg.start_ms)
        authenticator = None
        if cfg.auth_token is not None:
            token = cfg.auth_token
            authenticator = lambda _client_id, offered: offered == token  # noqa: E731
        self.broker = Broker(authenticator)
        self.service = IngestService(MemoryReadingStore(), clock=lambda: self.loop.now)
        self.service.attach(self.broker)
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_devices)
        self.devices = [
            SimDevice(i, device_id, cfg, seeds[i]) for i, device_id in enumerate(cfg.device_ids)
        ]
        self._zones: dict[str, WifiZone] = {z.zone_id: z for z in cfg.zones}
        self._window_end = cfg.start_ms + cfg.duration_s * 1000

    # -- schedule --------------------------------------------------------

    def _schedule_rides(self) -> None:
        if self.cfg.rides is not None:
            for ride_spec in self.cfg.rides:
                device = self.devices[ride_spec.device]
                at = self.cfg.start_ms + int(round(ride_spec.start_s * 1000))
                if at >= self._window_end:
                    logger.warning(
                        "%s: ride at %.1f s is after the window, skipped",
                        device.device_id, ride_spec.start_s,
                    )
                    continue
                self.loop.schedule(at, lambda d=device, t=ride_spec.trace: self._start_ride(d, t))
            return
        for device in self.devices:
            self._schedule_next_generated(device, self.cfg.start_ms)

    def _schedule_next_generated(self, device: SimDevice, after: int) -> None:
        low, high = self.cfg.pause_s
        at = after + int(device.mobility_rng.integers(low, high + 1)) * 1000
        if at < self._window_end:
            self.loop.schedule(at, lambda: self._start_ride(device, None))

    # -- rides -----------------------------------------------------------

    def _energy_so_far(self, device: SimDevice, riding_ms: int = 0) -> EnergyReport:
        elapsed_ms = self.loop.now - self.cfg.start_ms
        active_ms = min(device.stats.active_ms + riding_ms, elapsed_ms)
        return energy_account(self.cfg.energy, active_ms / 1000, (elapsed_ms - active_ms) / 1000)

    def _start_ride(self, device: SimDevice, trace: MobilityTrace | None) -> None:
        now = self.loop.now
        if device.stats.depleted or self._energy_so_far(device).depleted:
            device.stats.depleted = True
            logger.info("%s: battery depleted, ride skipped", device.device_id)
            return
        if device.ride is not None:
            logger.warning("%s: still riding, overlapping ride skipped", device.device_id)
            return
        if device.session is not None:
            device.stats.uploads_interrupted += 1
            self._close_connection(device)

        if trace is None:
            trace = random_waypoint_trace(
                self.cfg.zones,
                device.mobility_rng,
                start_zone=device.zone,
                waypoints=self.cfg.waypoints_per_ride,
                speed_mps=self.cfg.speed_mps,
                roam_m=self.cfg.roam_m,
            )
        device.ride_token += 1
        device.ride = _Ride(trace, now, device.ride_token)
        device.stats.rides += 1
        device.state = boot(device.sd, device.firmware_rng, now)
        logger.debug(
            "%s: ride %s starts, %d s", device.device_id, device.state.ride_id, trace.duration_ticks
        )
        self.loop.schedule(now + TICK_MS, lambda: self._ride_tick(device, 1, device.ride_token))

    def _gps_line(self, fix_ready: bool, lat: float, lon: float) -> str:
        utc_time = (self.loop.now % _DAY_MS) / 1000
        if not fix_ready:
            return render_no_fix_gga(utc_time)
        return render_gga(GpsFix(utc_time=utc_time, latitude=lat, longitude=lon))

    def _ride_tick(self, device: SimDevice, second: int, token: int) -> None:
        ride = device.ride
        if ride is None or ride.token != token:
            return
        now = self.loop.now
        riding_ms = now - ride.started_at
        if self._energy_so_far(device, riding_ms).depleted:
            device.stats.depleted = True
            device.stats.active_ms += riding_ms
            device.ride = None
            logger.info("%s: battery depleted mid-ride at %d s", device.device_id, second)
            return
        lat, lon = ride.trace.position_at(second)
        device.position = (lat, lon)
        t = (now - self.cfg.start_ms) / 1000
        ppm = max(field_sample(self.cfg.field, lat, lon, t), _MIN_PPM)
        adc = [
            sample_with_noise(ppm, channel.curve, self.cfg.noise_sd, device.sensor_rng)
            for channel in self.cfg.channels
        ]
        gps_line = self._gps_line(second >= self.cfg.gps_fix_delay_s, lat, lon)
        device.state, readings = tick(
            device.state, device.sd, now, gps_line, adc, rng=device.firmware_rng
        )
        device.stats.generated += len(readings)

        if second < ride.trace.duration_ticks:
            self.loop.schedule(now + TICK_MS, lambda: self._ride_tick(device, second + 1, token))
            return

        device.stats.active_ms += second * TICK_MS
        device.ride = None
        if ride.trace.end_zone in self._zones:
            device.zone = self._zones[ride.trace.end_zone]
        self._press_button(device)
        if self.cfg.rides is None:
            self._schedule_next_generated(device, now)

    # -- uploads ---------------------------------------------------------

    def _press_button(self, device: SimDevice) -> None:
        if device.state.phase not in (Phase.SAMPLING, Phase.UPLOAD_ERROR):
            return
        device.state = press_button(device.state, visible_ssids(self.cfg.zones, *device.position))
        if device.state.phase is Phase.CONNECTING:
            self._open_connection(device)

    def _retry_upload(self, device: SimDevice, token: int) -> None:
        if device.ride is not None or device.ride_token != token:
            return
        if device.state.phase is Phase.UPLOAD_ERROR:
            logger.debug("%s: retrying upload", device.device_id)
            self._press_button(device)

    def _open_connection(self, device: SimDevice) -> None:
        now = self.loop.now
        device.connections += 1
        device.conn = self.broker.open_connection(f"{device.device_id}#{device.connections}")
        config = device.state.config
        assert config is not None
        device.session = ClientSession(
            device.device_id,
            keep_alive_s=config.keep_alive_s,
            auth_token=config.auth_token,
            policy=self.cfg.retry,
        )
        device.upload_began = now
        self._send_up(device, device.session.connect(now))

    def _close_connection(self, device: SimDevice) -> None:
        if device.session is not None:
            device.stats.retransmissions += device.session.retransmissions
            device.stats.active_ms += self.loop.now - device.upload_began
        device.session = None
        device.conn = None

    def _send_up(self, device: SimDevice, frame: bytes) -> None:
        conn = device.conn
        assert conn is not None
        session = device.session
        scheduled = device.up.send(frame, self.loop.now)
        if scheduled is None:
            device.stats.frames_dropped += 1
            return
        self.loop.schedule(
            scheduled.deliver_at, lambda: self._deliver_up(device, conn, session, frame)
        )

    def _deliver_up(
        self, device: SimDevice, conn: BrokerConnection, session: ClientSession | None, frame: bytes
    ) -> None:
        result = self.broker.feed(conn, frame, self.loop.now)
        for packet in result.responses:
            data = encode(packet)
            scheduled = device.down.send(data, self.loop.now)
            if scheduled is None:
                device.stats.frames_dropped += 1
                continue
            self.loop.schedule(
                scheduled.deliver_at, lambda d=data: self._deliver_down(device, session, d)
            )

    def _deliver_down(self, device: SimDevice, session: ClientSession | None, data: bytes) -> None:
        if session is None or device.session is not session:
            return
        now = self.loop.now
        phase = device.state.phase
        if phase is Phase.CONNECTING:
            events, frames = session.receive(data, now)
            for frame in frames:
                self._send_up(device, frame)
            if any(isinstance(e, ConnectionRefused) for e in events):
                device.state = abort_upload(device.state, "connection refused")
                self._after_upload(device)
            elif any(isinstance(e, Connected) for e in events):
                device.state, frames = run_upload(device.state, device.sd, session, now)
                self._after_pump(device, session, frames)
                if device.state.phase is Phase.UPLOADING:
                    self._schedule_poll(device, session)
        elif phase is Phase.UPLOADING:
            device.state, frames = upload_receive(device.state, device.sd, session, data, now)
            self._after_pump(device, session, frames)

    def _schedule_poll(self, device: SimDevice, session: ClientSession) -> None:
        self.loop.schedule_in(UPLOAD_POLL_MS, lambda: self._upload_poll(device, session))

    def _upload_poll(self, device: SimDevice, session: ClientSession) -> None:
        if device.session is not session or device.state.phase is not Phase.UPLOADING:
            return
        device.state, frames = upload_tick(device.state, device.sd, session, self.loop.now)
        self._after_pump(device, session, frames)
        if device.state.phase is Phase.UPLOADING:
            self._schedule_poll(device, session)

    def _after_pump(self, device: SimDevice, session: ClientSession, frames: list[bytes]) -> None:
        for frame in frames:
            self._send_up(device, frame)
        if device.state.phase is not Phase.UPLOADING:
            self._after_upload(device)

    def _after_upload(self, device: SimDevice) -> None:
        if device.state.phase is Phase.SAMPLING:
            device.stats.uploads_ok += 1
        else:
            device.stats.uploads_failed += 1
            token = device.ride_token
            self.loop.schedule_in(
                self.cfg.upload_retry_s * 1000, lambda: self._retry_upload(device, token)
            )
        self._close_connection(device)

    # -- run -------------------------------------------------------------

    def run(self) -> SimReport:
        self._schedule_rides()
        self.loop.run(until_ms=self._window_end)
        arrivals = [
            d.ride.started_at + d.ride.trace.duration_ticks * TICK_MS
            for d in self.devices
            if d.ride is not None
        ]
        last_arrival = max(arrivals, default=self._window_end)
        end_ms = max(self._window_end, last_arrival) + self.cfg.drain_s * 1000
        self.loop.run(until_ms=end_ms)
        for device in self.devices:
            if device.session is not None:
                device.stats.uploads_interrupted += 1
                self._close_connection(device)
        return self._report(end_ms)

    def _report(self, end_ms: int) -> SimReport:
        records = self.service.store.query()
        stored_by_device: dict[str, int] = {}
        for record in records:
            stored_by_device[record.device_id] = stored_by_device.get(record.device_id, 0) + 1
        total_s = (end_ms - self.cfg.start_ms) / 1000
        flagged = audit_headers(self.service.store.headers(), records)

        devices = []
        for device in self.devices:
            stats = device.stats
            active_s = min(stats.active_ms / 1000, total_s)
            energy = energy_account(self.cfg.energy, active_s, total_s - active_s)
            devices.append({
                "device_id": device.device_id,
                "rides": stats.rides,
                "generated": stats.generated,
                "stored": stored_by_device.get(device.device_id, 0),
                "cache_lines": len(device.sd.read_lines(CACHE_LOG)),
                "perm_lines": len(device.sd.read_lines(PERM_LOG)),
                "uploads_ok": stats.uploads_ok,
                "uploads_failed": stats.uploads_failed,
                "uploads_interrupted": stats.uploads_interrupted,
                "header_violations": sum(1 for d, _ in flagged if d == device.device_id),
                "retransmissions": stats.retransmissions,
                "frames_dropped": stats.frames_dropped,
                "depleted": stats.depleted or energy.depleted,
                "energy": energy.to_dict(),
            })

        summaries = self.service.summaries()
        generated = sum(d["generated"] for d in devices)
        totals = {
            "generated": generated,
            "stored": len(records),
            "delivery_fraction": len(records) / generated if generated else 1.0,
            "rides": len(summaries),
            "complete_rides": sum(1 for s in summaries if s.status is RideStatus.COMPLETE),
            "pending_rides": sum(1 for s in summaries if s.status is RideStatus.PENDING),
            "overcomplete_rides": sum(1 for s in summaries if s.status is RideStatus.OVERCOMPLETE),
            "header_violations": len(flagged),
            "uploads_ok": sum(d["uploads_ok"] for d in devices),
            "uploads_failed": sum(d["uploads_failed"] for d in devices),
            "duplicates": self.service.duplicates,
            "quarantined": self.service.quarantined,
            "events": self.loop.processed,
        }
        logger.info(
            "simulation done: %d generated, %d stored, %d/%d rides complete",
            generated, len(records), totals["complete_rides"], totals["rides"],
        )
        return SimReport(self.cfg, end_ms, devices, summaries, totals, records)


def run_sim(cfg: SimConfig) -> SimReport:
    """Run a scenario to completion; identical configs give identical reports."""
    return FleetSimulator(cfg).run()
