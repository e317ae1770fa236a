"""
The device firmware as a pure state machine.

Every operation takes the current state and the injected time in integer
milliseconds and returns the next state; the SD card is the only mutable
thing it touches. One device is driven sequentially by one caller.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np

from nmea import read_fix
from sensor import SensorRangeError, adc_to_ppm

from .config import (
    DEFAULT_REBOOT_DELAY_S,
    ConfigProblem,
    ConfigValidationError,
    DeviceConfig,
    parse_params,
)
from .reading import ChannelReading, Reading
from .sdcard import CACHE_LOG, PARAMS_FILE, PERM_LOG, SdCardError, VirtualSd

if TYPE_CHECKING:
    from .upload import UploadProgress

logger = logging.getLogger(__name__)


class InvalidPhaseError(RuntimeError):
    """An operation was called in a phase that does not accept it."""


class Phase(Enum):
    BOOT_INIT = "boot_init"
    CONFIG_ERROR = "config_error"
    SAMPLING = "sampling"
    # Scanning completes inside press_button; it is never returned as a resting phase.
    SCANNING = "scanning"
    CONNECTING = "connecting"
    UPLOADING = "uploading"
    UPLOAD_ERROR = "upload_error"


class SetupLed(Enum):
    OFF = "off"
    OK = "ok"
    ERROR = "error"


class NetLed(Enum):
    OFF = "off"
    IN_RANGE = "in_range"
    TRANSMITTING = "transmitting"


@dataclass(frozen=True)
class LedState:
    setup: SetupLed
    net: NetLed


_LEDS = {
    Phase.BOOT_INIT: LedState(SetupLed.OFF, NetLed.OFF),
    Phase.CONFIG_ERROR: LedState(SetupLed.ERROR, NetLed.OFF),
    Phase.SAMPLING: LedState(SetupLed.OK, NetLed.OFF),
    Phase.SCANNING: LedState(SetupLed.OK, NetLed.OFF),
    Phase.CONNECTING: LedState(SetupLed.OK, NetLed.IN_RANGE),
    Phase.UPLOADING: LedState(SetupLed.OK, NetLed.TRANSMITTING),
    Phase.UPLOAD_ERROR: LedState(SetupLed.OK, NetLed.OFF),
}


@dataclass(frozen=True)
class DeviceState:
    """
    Snapshot of one device.

    Attributes:
        phase (Phase): Current phase.
        config (DeviceConfig | None): Parsed params.json, None before a good boot.
        ride_id (str | None): Assigned once per successful boot.
        boot_at (int): Time of the last boot, ms.
        next_sample_at (int): When the next reading is due, ms.
        next_seq (int): Sequence number of the next reading.
        reboot_at (int | None): Set only in CONFIG_ERROR.
        upload (UploadProgress | None): Set only in UPLOADING.
        config_problems (tuple[ConfigProblem, ...]): Why the last boot failed.
    """

    phase: Phase = Phase.BOOT_INIT
    config: DeviceConfig | None = None
    ride_id: str | None = None
    boot_at: int = 0
    next_sample_at: int = 0
    next_seq: int = 0
    reboot_at: int | None = None
    upload: "UploadProgress | None" = None
    config_problems: tuple[ConfigProblem, ...] = ()

    def __post_init__(self) -> None:
        if (self.phase is Phase.CONFIG_ERROR) != (self.reboot_at is not None):
            raise ValueError("reboot_at is set exactly in the config_error phase")
        if (self.phase is Phase.UPLOADING) != (self.upload is not None):
            raise ValueError("upload progress is set exactly in the uploading phase")
        if self.phase not in (Phase.BOOT_INIT, Phase.CONFIG_ERROR) and self.config is None:
            raise ValueError(f"phase {self.phase.value} needs a configuration")

    @property
    def led_setup(self) -> SetupLed:
        return _LEDS[self.phase].setup

    @property
    def led_net(self) -> NetLed:
        return _LEDS[self.phase].net

    def require(self, *phases: Phase) -> DeviceConfig:
        """Return the config, or raise if the device is not in one of `phases`."""
        if self.phase not in phases:
            expected = ", ".join(p.value for p in phases)
            raise InvalidPhaseError(f"expected phase {expected}, device is {self.phase.value}")
        assert self.config is not None
        return self.config


def led_state(state: DeviceState) -> LedState:
    """The two LED outputs, a pure function of the phase."""
    return _LEDS[state.phase]


def new_ride_id(rng: np.random.Generator) -> str:
    return f"{int(rng.integers(0, 2**32)):08x}"


def format_utc(now: int) -> str:
    """ISO 8601 UTC with milliseconds, e.g. 2020-09-01T10:00:05.000Z."""
    stamp = datetime.fromtimestamp(now // 1000, tz=timezone.utc)
    return f"{stamp:%Y-%m-%dT%H:%M:%S}.{now % 1000:03d}Z"


def _fallback_reboot_delay(sd: VirtualSd) -> int:
    # a broken params.json may still carry a usable reboot delay
    try:
        document = json.loads(sd.read_text(PARAMS_FILE))
    except (SdCardError, json.JSONDecodeError):
        return DEFAULT_REBOOT_DELAY_S
    value = document.get("reboot_delay_s") if isinstance(document, dict) else None
    if isinstance(value, int) and not isinstance(value, bool) and value > 0:
        return value
    return DEFAULT_REBOOT_DELAY_S


def boot(sd: VirtualSd, rng: np.random.Generator, now: int) -> DeviceState:
    """
    Power on: read params.json, pick a ride id and prepare both logs.

    Args:
        sd (VirtualSd): The card; logs are created if missing, never truncated.
        rng (np.random.Generator): Source of the ride id.
        now (int): Boot time, ms.

    Returns:
        DeviceState: SAMPLING on success, CONFIG_ERROR with a reboot time otherwise.
    """
    try:
        if not sd.exists(PARAMS_FILE):
            raise ConfigValidationError([ConfigProblem(PARAMS_FILE, "missing from SD card")])
        config = parse_params(sd.read_text(PARAMS_FILE))
    except ConfigValidationError as e:
        delay_s = _fallback_reboot_delay(sd)
        logger.warning("config error, rebooting in %d s: %s", delay_s, e)
        return DeviceState(
            phase=Phase.CONFIG_ERROR,
            boot_at=now,
            reboot_at=now + delay_s * 1000,
            config_problems=tuple(e.problems),
        )

    sd.ensure(CACHE_LOG)
    sd.ensure(PERM_LOG)
    ride_id = new_ride_id(rng)
    logger.info("%s: booted, ride %s", config.device_id, ride_id)
    return DeviceState(
        phase=Phase.SAMPLING,
        config=config,
        ride_id=ride_id,
        boot_at=now,
        next_sample_at=now + config.sample_period_s * 1000,
    )


def _build_reading(
    state: DeviceState, config: DeviceConfig, now: int, gps_line: str | None, adc: Sequence[int]
) -> Reading:
    fix = read_fix(gps_line) if gps_line else None
    valid = fix is not None and fix.valid
    channels = []
    for channel, counts in zip(config.channels, adc):
        counts = int(counts)
        if not 0 <= counts <= channel.curve.adc_max:
            raise ValueError(
                f"channel {channel.channel_id}: adc {counts} outside 0..{channel.curve.adc_max}"
            )
        try:
            ppm: float | None = adc_to_ppm(counts, channel.curve)
        except SensorRangeError:
            ppm = None
        channels.append(ChannelReading(channel.channel_id, counts, ppm))
    assert state.ride_id is not None
    return Reading(
        ride_id=state.ride_id,
        seq=state.next_seq,
        t=(now - state.boot_at) / 1000,
        utc=format_utc(now),
        fix_valid=valid,
        lat=fix.latitude if valid and fix is not None else None,
        lon=fix.longitude if valid and fix is not None else None,
        channels=tuple(channels),
    )


def tick(
    state: DeviceState,
    sd: VirtualSd,
    now: int,
    gps_line: str | None,
    adc_by_channel: Sequence[int],
    rng: np.random.Generator | None = None,
) -> tuple[DeviceState, list[Reading]]:
    """
    Advance the main loop to `now`.

    In SAMPLING, a due sample is read and appended to both logs. In
    CONFIG_ERROR nothing is sampled; once `reboot_at` passes the device boots
    again, which needs `rng`. A tick in UPLOAD_ERROR resumes sampling.

    Returns:
        (new state, readings taken during this tick)

    Raises:
        InvalidPhaseError: During CONNECTING or UPLOADING.
        ValueError: If the ADC list does not match the configured channels.
    """
    if state.phase is Phase.CONFIG_ERROR:
        assert state.reboot_at is not None
        if now < state.reboot_at:
            return state, []
        if rng is None:
            raise ValueError("rebooting needs a random generator")
        logger.info("rebooting after config error")
        return boot(sd, rng, now), []

    if state.phase is Phase.UPLOAD_ERROR:
        state = replace(state, phase=Phase.SAMPLING)
    config = state.require(Phase.SAMPLING)
    if len(adc_by_channel) != len(config.channels):
        raise ValueError(f"expected {len(config.channels)} adc values, got {len(adc_by_channel)}")
    if now < state.next_sample_at:
        return state, []

    reading = _build_reading(state, config, now, gps_line, adc_by_channel)
    line = reading.to_line()
    sd.append_line(CACHE_LOG, line)
    sd.append_line(PERM_LOG, line)
    logger.debug("%s: reading %s/%d", config.device_id, reading.ride_id, reading.seq)

    period_ms = config.sample_period_s * 1000
    next_at = state.next_sample_at + period_ms
    if next_at <= now:
        next_at += ((now - next_at) // period_ms + 1) * period_ms
    return replace(state, next_sample_at=next_at, next_seq=state.next_seq + 1), [reading]


def press_button(state: DeviceState, visible_ssids: Sequence[str]) -> DeviceState:
    """
    Scan for the configured network.

    Returns:
        DeviceState: CONNECTING if the SSID is visible, otherwise SAMPLING.
    """
    config = state.require(Phase.SAMPLING, Phase.UPLOAD_ERROR)
    if config.ssid in visible_ssids:
        logger.info("%s: %s in range, connecting", config.device_id, config.ssid)
        return replace(state, phase=Phase.CONNECTING)
    logger.debug("%s: %s not in range", config.device_id, config.ssid)
    return replace(state, phase=Phase.SAMPLING)
