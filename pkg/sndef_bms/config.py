"""
Settings for the simulated link, the endpoints and the benchmark

Loaded from a JSON file (``bms_config.json`` by default). Missing or broken
files fall back to the built-in defaults; partial files are merged over them.
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .errors import ConfigError

LOGGER = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "bms_config.json"


def get_default_config() -> dict[str, Any]:
    """Default configuration"""
    return {
        "link": {
            "latency_ms": 5,
            "max_events": 10000,
        },
        "reader": {
            "response_timeout_ms": 100,
            "max_retries": 2,
            "reads": 1,
        },
        "device": {
            "wake_latency_ms": 20,
            "lockout_threshold": 5,
            "lockout_ms": 5000,
        },
        "bench": {
            "payload_bytes": 192,
            "iterations": 1000,
            "warmup": 20,
            "workers": 1,
        },
        "logging": {
            "level": "WARNING",
        },
        "test_categories": {
            "unit": True,
            "integration": True,
            "security": True,
            "performance": False,
            "smoke": True,
            "regression": True,
        },
        "test_execution": {
            "fail_fast": False,
            "timeout_s": 600,
        },
        "reporting": {
            "json_report": True,
            "console_output": True,
            "report_directory": "tests/reports",
        },
    }


@dataclass(frozen=True)
class LinkSettings:
    latency_ms: int = 5
    max_events: int = 10000


@dataclass(frozen=True)
class ReaderSettings:
    response_timeout_ms: int = 100
    max_retries: int = 2
    reads: int = 1


@dataclass(frozen=True)
class DeviceSettings:
    wake_latency_ms: int = 20
    lockout_threshold: int = 5
    lockout_ms: int = 5000


@dataclass(frozen=True)
class BenchSettings:
    payload_bytes: int = 192
    iterations: int = 1000
    warmup: int = 20
    workers: int = 1


@dataclass(frozen=True)
class Settings:
    link: LinkSettings = field(default_factory=LinkSettings)
    reader: ReaderSettings = field(default_factory=ReaderSettings)
    device: DeviceSettings = field(default_factory=DeviceSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)
    log_level: str = "WARNING"
    raw: dict = field(default_factory=get_default_config, repr=False, compare=False)


def deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _section(cls, data: dict, name: str):
    values = data.get(name, {})
    if not isinstance(values, dict):
        raise ConfigError(f"Section '{name}' must be an object")
    known = cls.__dataclass_fields__
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {', '.join(unknown)}")
    for key, value in values.items():
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{name}.{key}' must be an integer")
        if value < 0:
            raise ConfigError(f"'{name}.{key}' must be >= 0")
    return cls(**values)


def settings_from_dict(data: dict) -> Settings:
    data = deep_merge(get_default_config(), data)
    bench = _section(BenchSettings, data, "bench")
    if bench.iterations < 1 or bench.workers < 1:
        raise ConfigError("'bench.iterations' and 'bench.workers' must be >= 1")
    level = str(data.get("logging", {}).get("level", "WARNING")).upper()
    if level not in logging.getLevelNamesMapping():
        raise ConfigError(f"Unknown log level '{level}'")
    return Settings(
        link=_section(LinkSettings, data, "link"),
        reader=_section(ReaderSettings, data, "reader"),
        device=_section(DeviceSettings, data, "device"),
        bench=bench,
        log_level=level,
        raw=data,
    )


def load_settings(path: Union[str, Path, None] = None) -> Settings:
    """Load settings from ``path``; a missing or unreadable file yields the defaults"""
    path = Path(path or DEFAULT_CONFIG_FILE)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        LOGGER.warning("Config file %s not found. Using defaults.", path)
        return settings_from_dict({})
    except json.JSONDecodeError as exc:
        LOGGER.error("Invalid JSON in config file %s: %s", path, exc)
        return settings_from_dict({})
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return settings_from_dict(data)


def default_settings(overrides: Optional[dict] = None) -> Settings:
    return settings_from_dict(overrides or {})
