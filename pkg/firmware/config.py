"""
params.json: the device configuration read from the SD card at boot.

Example::

    {
      "ssid": "ardueco-dock",
      "password": "secret",
      "endpoint_host": "broker.local",
      "endpoint_port": 1883,
      "topic_session": "ardueco/bike-001/session",
      "topic_data": "ardueco/bike-001/data",
      "device_id": "bike-001",
      "sample_period_s": 5,
      "sensor": {"a": 99.0, "b": -1.5, "r0": 10000, "rl": 10000, "vcc": 5.0, "adc_max": 1023}
    }

Unknown keys are ignored. Every problem is reported at once, naming the field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from mqttwire.packets import is_valid_topic_name
from sensor.curve import ChannelSpec, SensorCurve

DEFAULT_SAMPLE_PERIOD_S = 5
DEFAULT_REBOOT_DELAY_S = 10

_JSON_TYPE_NAMES = {
    str: "string",
    int: "integer",
    float: "number",
    bool: "boolean",
    dict: "object",
    list: "array",
    type(None): "null",
}

_REQUIRED: dict[str, type] = {
    "ssid": str,
    "password": str,
    "endpoint_host": str,
    "endpoint_port": int,
    "topic_session": str,
    "topic_data": str,
    "device_id": str,
}

_OPTIONAL: dict[str, type] = {
    "sample_period_s": int,
    "reboot_delay_s": int,
    "qos": int,
    "keep_alive_s": int,
    "auth_token": str,
    "sensor": dict,
    "channels": list,
}


@dataclass(frozen=True)
class ConfigProblem:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


class ConfigValidationError(ValueError):
    """params.json is missing, not JSON, or fails validation."""

    def __init__(self, problems: list[ConfigProblem]) -> None:
        self.problems = problems
        super().__init__("; ".join(str(p) for p in problems))


@dataclass(frozen=True)
class DeviceConfig:
    """
    Validated device configuration.

    Attributes:
        ssid (str): Network the device uploads through.
        password (str): Network password (may be empty for open networks).
        endpoint_host (str): MQTT broker address.
        endpoint_port (int): MQTT broker port.
        topic_session (str): Topic for the per-upload count header.
        topic_data (str): Topic for reading rows.
        device_id (str): Identity used as MQTT client id.
        sample_period_s (int): Seconds between samples.
        reboot_delay_s (int): Seconds before rebooting after a config error.
        channels (tuple[ChannelSpec, ...]): Analog inputs, one CO channel by default.
        qos (int): QoS used for uploads (0 or 1).
        keep_alive_s (int): MQTT keep-alive.
        auth_token (str | None): Opaque token sent in CONNECT.
    """

    ssid: str
    password: str
    endpoint_host: str
    endpoint_port: int
    topic_session: str
    topic_data: str
    device_id: str
    sample_period_s: int = DEFAULT_SAMPLE_PERIOD_S
    reboot_delay_s: int = DEFAULT_REBOOT_DELAY_S
    channels: tuple[ChannelSpec, ...] = field(default_factory=lambda: (ChannelSpec(),))
    qos: int = 1
    keep_alive_s: int = 60
    auth_token: str | None = None

    def __post_init__(self) -> None:
        problems = _check_values(self.to_dict())
        if problems:
            raise ConfigValidationError(problems)

    def to_dict(self) -> dict[str, Any]:
        """The params.json document for this configuration."""
        return {
            "ssid": self.ssid,
            "password": self.password,
            "endpoint_host": self.endpoint_host,
            "endpoint_port": self.endpoint_port,
            "topic_session": self.topic_session,
            "topic_data": self.topic_data,
            "device_id": self.device_id,
            "sample_period_s": self.sample_period_s,
            "reboot_delay_s": self.reboot_delay_s,
            "qos": self.qos,
            "keep_alive_s": self.keep_alive_s,
            "auth_token": self.auth_token,
            "channels": [c.to_dict() for c in self.channels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _type_name(value: Any) -> str:
    return _JSON_TYPE_NAMES.get(type(value), type(value).__name__)


def _has_type(value: Any, expected: type) -> bool:
    if expected is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, expected)


def _check_values(doc: dict[str, Any]) -> list[ConfigProblem]:
    problems: list[ConfigProblem] = []
    for name in ("ssid", "endpoint_host", "topic_session", "topic_data", "device_id"):
        if isinstance(doc.get(name), str) and not doc[name]:
            problems.append(ConfigProblem(name, "must not be empty"))
    for name in ("topic_session", "topic_data"):
        topic = doc.get(name)
        if isinstance(topic, str) and topic and not is_valid_topic_name(topic):
            problems.append(ConfigProblem(name, "must be a topic name without wildcards"))
    port = doc.get("endpoint_port")
    if _has_type(port, int) and not 1 <= port <= 65535:
        problems.append(ConfigProblem("endpoint_port", "must be in 1..65535"))
    for name in ("sample_period_s", "reboot_delay_s"):
        value = doc.get(name)
        if _has_type(value, int) and value <= 0:
            problems.append(ConfigProblem(name, "must be greater than 0"))
    if _has_type(doc.get("qos"), int) and doc["qos"] not in (0, 1):
        problems.append(ConfigProblem("qos", "must be 0 or 1"))
    keep_alive = doc.get("keep_alive_s")
    if _has_type(keep_alive, int) and not 0 <= keep_alive <= 0xFFFF:
        problems.append(ConfigProblem("keep_alive_s", "must be in 0..65535"))
    return problems


def _parse_channels(doc: dict[str, Any], problems: list[ConfigProblem]) -> tuple[ChannelSpec, ...]:
    default_curve = SensorCurve()
    if isinstance(doc.get("sensor"), dict):
        try:
            default_curve = SensorCurve.from_dict(doc["sensor"])
        except (TypeError, ValueError) as e:
            problems.append(ConfigProblem("sensor", str(e)))

    raw_channels = doc.get("channels")
    if not isinstance(raw_channels, list):
        return (ChannelSpec(curve=default_curve),)
    if not raw_channels:
        problems.append(ConfigProblem("channels", "must list at least one channel"))
        return ()

    channels: list[ChannelSpec] = []
    for i, raw in enumerate(raw_channels):
        where = f"channels[{i}]"
        if not isinstance(raw, dict):
            problems.append(ConfigProblem(where, f"expected object, got {_type_name(raw)}"))
            continue
        try:
            curve = SensorCurve.from_dict(raw["sensor"]) if "sensor" in raw else default_curve
            channels.append(
                ChannelSpec(
                    channel_id=raw.get("channel_id", i), curve=curve, label=raw.get("label", "CO")
                )
            )
        except (TypeError, ValueError) as e:
            problems.append(ConfigProblem(where, str(e)))

    ids = [c.channel_id for c in channels]
    if len(ids) != len(set(ids)):
        problems.append(ConfigProblem("channels", "channel_id values must be unique"))
    return tuple(channels)


def validate_params(document: Any) -> list[ConfigProblem]:
    """
    List every problem with a params document.

    Args:
        document: Decoded JSON.

    Returns:
        list[ConfigProblem]: Empty iff the device would boot with it.
    """
    try:
        load_config(document)
    except ConfigValidationError as e:
        return e.problems
    return []


def load_config(document: Any) -> DeviceConfig:
    """
    Build a DeviceConfig from decoded params.json content.

    Raises:
        ConfigValidationError: With one problem per missing or invalid field.
    """
    if not isinstance(document, dict):
        raise ConfigValidationError(
            [ConfigProblem("params.json", f"expected object, got {_type_name(document)}")]
        )

    problems: list[ConfigProblem] = []
    for name, expected in _REQUIRED.items():
        if name not in document:
            problems.append(ConfigProblem(name, "missing required key"))
        elif not _has_type(document[name], expected):
            problems.append(ConfigProblem(
                name, f"expected {_JSON_TYPE_NAMES[expected]}, got {_type_name(document[name])}"
            ))
    for name, expected in _OPTIONAL.items():
        value = document.get(name)
        if value is None:
            continue
        if not _has_type(value, expected):
            problems.append(ConfigProblem(
                name, f"expected {_JSON_TYPE_NAMES[expected]}, got {_type_name(value)}"
            ))

    channels = _parse_channels(document, problems)
    typed = {
        k: v for k, v in document.items()
        if (k in _REQUIRED and _has_type(v, _REQUIRED[k]))
        or (k in _OPTIONAL and _has_type(v, _OPTIONAL[k]))
    }
    problems.extend(_check_values(typed))
    if problems:
        raise ConfigValidationError(problems)

    return DeviceConfig(
        ssid=document["ssid"],
        password=document["password"],
        endpoint_host=document["endpoint_host"],
        endpoint_port=document["endpoint_port"],
        topic_session=document["topic_session"],
        topic_data=document["topic_data"],
        device_id=document["device_id"],
        sample_period_s=document.get("sample_period_s", DEFAULT_SAMPLE_PERIOD_S),
        reboot_delay_s=document.get("reboot_delay_s", DEFAULT_REBOOT_DELAY_S),
        channels=channels,
        qos=document.get("qos", 1),
        keep_alive_s=document.get("keep_alive_s", 60),
        auth_token=document.get("auth_token"),
    )


def parse_params(text: str) -> DeviceConfig:
    """Parse params.json text; a JSON syntax error is reported as a problem too."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        problem = ConfigProblem("params.json", f"not valid JSON: {e}")
        raise ConfigValidationError([problem]) from None
    return load_config(document)
