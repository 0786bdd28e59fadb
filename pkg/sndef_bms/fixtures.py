"""
Pack scenario and device identity fixture files

Both use a plain ``key = value`` text format; ``#`` starts a comment.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .auth import SERIAL_LEN, DeviceIdentity
from .crypto import KEY_LEN, EntropySource, MasterKey, SystemEntropy
from .device import DEFAULT_WAKE_LATENCY_MS, BatteryPackState, BmsDevice, FaultFlag, Scenario
from .errors import FixtureError, SndefError

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

PACK_KEYS = {
    "scenario", "cells", "temperatures", "state_of_health", "cycle_count",
    "fault_flags", "lifetime_min_voltage", "lifetime_max_temp", "wake_latency_ms",
}
IDENTITY_KEYS = {"serial", "master_key", "dev_add_data"}


@dataclass
class PackFixture:
    pack: BatteryPackState
    scenario: Scenario = Scenario.ACTIVE
    wake_latency_ms: Optional[int] = None
    source: Optional[str] = None

    def build_device(self, scenario: Optional[Scenario] = None,
                     default_wake_latency_ms: int = DEFAULT_WAKE_LATENCY_MS) -> BmsDevice:
        """Fresh device over a copy of the pack; the fixture's wake latency wins over the default"""
        pack = BatteryPackState(
            cell_voltages=list(self.pack.cell_voltages),
            temperatures=list(self.pack.temperatures),
            state_of_health=self.pack.state_of_health,
            cycle_count=self.pack.cycle_count,
            fault_flags=self.pack.fault_flags,
            lifetime_min_voltage=self.pack.lifetime_min_voltage,
            lifetime_max_temp=self.pack.lifetime_max_temp,
        )
        return BmsDevice(
            pack,
            scenario=scenario or self.scenario,
            wake_latency_ms=default_wake_latency_ms if self.wake_latency_ms is None else self.wake_latency_ms,
        )


def parse_key_values(text: str, allowed: set[str], source: str = "<text>") -> dict[str, str]:
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FixtureError(f"{source}:{number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in allowed:
            raise FixtureError(f"{source}:{number}: unknown key '{key}'")
        if key in values:
            raise FixtureError(f"{source}:{number}: duplicate key '{key}'")
        values[key] = value
    return values


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FixtureError(f"Cannot read fixture {path}: {exc}") from exc


def _int_list(value: str, key: str) -> list[int]:
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise FixtureError(f"'{key}' must be a comma-separated list of integers") from exc


def _int(value: str, key: str) -> int:
    try:
        return int(value, 0)
    except ValueError as exc:
        raise FixtureError(f"'{key}' must be an integer") from exc


def _hex(value: str, key: str, length: Optional[int] = None) -> bytes:
    try:
        data = bytes.fromhex(value)
    except ValueError as exc:
        raise FixtureError(f"'{key}' must be hex") from exc
    if length is not None and len(data) != length:
        raise FixtureError(f"'{key}' must be {length} bytes, got {len(data)}")
    return data


def parse_pack_fixture(text: str, source: str = "<text>") -> PackFixture:
    values = parse_key_values(text, PACK_KEYS, source)
    for required in ("cells", "temperatures", "state_of_health"):
        if required not in values:
            raise FixtureError(f"{source}: missing '{required}'")

    scenario_name = values.get("scenario", Scenario.ACTIVE.value)
    try:
        scenario = Scenario(scenario_name)
    except ValueError as exc:
        raise FixtureError(f"{source}: scenario must be 'active' or 'on-rest'") from exc

    flags = FaultFlag.NONE
    for name in filter(None, (part.strip() for part in values.get("fault_flags", "").split(","))):
        try:
            flags |= FaultFlag[name.upper()]
        except KeyError as exc:
            raise FixtureError(f"{source}: unknown fault flag '{name}'") from exc

    try:
        pack = BatteryPackState(
            cell_voltages=_int_list(values["cells"], "cells"),
            temperatures=_int_list(values["temperatures"], "temperatures"),
            state_of_health=_int(values["state_of_health"], "state_of_health"),
            cycle_count=_int(values.get("cycle_count", "0"), "cycle_count"),
            fault_flags=flags,
            lifetime_min_voltage=(
                _int(values["lifetime_min_voltage"], "lifetime_min_voltage")
                if "lifetime_min_voltage" in values else None
            ),
            lifetime_max_temp=(
                _int(values["lifetime_max_temp"], "lifetime_max_temp")
                if "lifetime_max_temp" in values else None
            ),
        )
    except SndefError as exc:
        raise FixtureError(f"{source}: {exc}") from exc

    wake_latency_ms = _int(values["wake_latency_ms"], "wake_latency_ms") if "wake_latency_ms" in values else None
    if wake_latency_ms is not None and wake_latency_ms < 0:
        raise FixtureError(f"{source}: wake_latency_ms must be >= 0")
    return PackFixture(pack=pack, scenario=scenario, wake_latency_ms=wake_latency_ms, source=source)


def load_pack_fixture(path: PathLike) -> PackFixture:
    LOGGER.debug("Loading pack fixture %s", path)
    return parse_pack_fixture(_read(path), source=str(path))


def parse_identity_fixture(text: str, source: str = "<text>") -> DeviceIdentity:
    values = parse_key_values(text, IDENTITY_KEYS, source)
    for required in ("serial", "master_key"):
        if required not in values:
            raise FixtureError(f"{source}: missing '{required}'")

    serial = _hex(values["serial"], "serial", SERIAL_LEN)
    master = MasterKey(_hex(values["master_key"], "master_key", KEY_LEN))
    dev_add_data = _hex(values["dev_add_data"], "dev_add_data") if "dev_add_data" in values else None
    return DeviceIdentity(device_serial=serial, master_key=master, dev_add_data=dev_add_data)


def load_identity_fixture(path: PathLike) -> DeviceIdentity:
    LOGGER.debug("Loading identity fixture %s", path)
    return parse_identity_fixture(_read(path), source=str(path))


def generate_identity(serial: bytes, rng: Optional[EntropySource] = None) -> DeviceIdentity:
    rng = rng or SystemEntropy()
    return DeviceIdentity(device_serial=bytes(serial), master_key=MasterKey(bytes(rng.read(KEY_LEN))))


def format_identity_fixture(identity: DeviceIdentity) -> str:
    lines = [
        "# Device identity, provisioned for both reader and device",
        f"serial = {identity.device_serial.hex()}",
        f"master_key = {identity.master_key.key.hex()}",
    ]
    if identity.dev_add_data != identity.device_serial:
        lines.append(f"dev_add_data = {identity.dev_add_data.hex()}")
    return "\n".join(lines) + "\n"


def write_identity_fixture(path: PathLike, identity: DeviceIdentity) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_identity_fixture(identity), encoding="utf-8")
    LOGGER.info("Wrote identity fixture for serial %s to %s", identity.serial_hex, path)
    return path
