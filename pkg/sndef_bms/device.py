"""
Simulated battery pack and BMS processing unit

Status payload layout (big-endian):
    [n_cells:1][mV:2 x N][n_temps:1][0.1 degC signed:2 x M][soh:1]
    [cycle_count:4][fault_flags:2][lifetime_min_mv:2][lifetime_max_temp:2 signed]
"""

import logging
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum, IntFlag
from typing import Optional

from .errors import (
    DeviceUnpowered,
    IndexOutOfRange,
    InvalidConfigValue,
    StatusFormatError,
    UnknownConfigKey,
    ValueOutOfRange,
    ValueTooLong,
)

LOGGER = logging.getLogger(__name__)

MIN_CELLS, MAX_CELLS = 6, 14
MIN_PROBES, MAX_PROBES = 2, 4
MAX_MILLIVOLTS = 5000
MIN_TEMP, MAX_TEMP = -400, 1500
MAX_CONFIG_VALUE_LEN = 64
DEFAULT_WAKE_LATENCY_MS = 20

_STATUS_TAIL = struct.Struct(">BIHHh")


class Scenario(Enum):
    ACTIVE = "active"
    ON_REST = "on-rest"


class FaultFlag(IntFlag):
    NONE = 0
    OVER_TEMP = 0x0001
    UNDER_VOLTAGE = 0x0002
    COMMS_FAULT = 0x0004


class ConfigKey(IntEnum):
    OVER_TEMP_THRESHOLD = 0x0001
    UNDER_VOLTAGE_THRESHOLD = 0x0002
    BALANCING_THRESHOLD = 0x0003
    REPORT_INTERVAL = 0x0004
    PACK_LABEL = 0x0010


# Keys holding one 2-byte number; signed ones are marked True
NUMERIC_CONFIG_KEYS = {
    ConfigKey.OVER_TEMP_THRESHOLD: True,
    ConfigKey.UNDER_VOLTAGE_THRESHOLD: False,
    ConfigKey.BALANCING_THRESHOLD: False,
    ConfigKey.REPORT_INTERVAL: False,
}

FACTORY_CONFIG = {
    ConfigKey.OVER_TEMP_THRESHOLD: struct.pack(">h", 600),
    ConfigKey.UNDER_VOLTAGE_THRESHOLD: struct.pack(">H", 3000),
    ConfigKey.BALANCING_THRESHOLD: struct.pack(">H", 30),
    ConfigKey.REPORT_INTERVAL: struct.pack(">H", 60),
    ConfigKey.PACK_LABEL: b"",
}


@dataclass
class BatteryPackState:
    cell_voltages: list[int]
    temperatures: list[int]
    state_of_health: int
    cycle_count: int = 0
    fault_flags: FaultFlag = FaultFlag.NONE
    lifetime_min_voltage: Optional[int] = None
    lifetime_max_temp: Optional[int] = None

    def __post_init__(self):
        if not MIN_CELLS <= len(self.cell_voltages) <= MAX_CELLS:
            raise ValueOutOfRange(f"Pack needs {MIN_CELLS}..{MAX_CELLS} cells")
        if not MIN_PROBES <= len(self.temperatures) <= MAX_PROBES:
            raise ValueOutOfRange(f"Pack needs {MIN_PROBES}..{MAX_PROBES} temperature probes")
        for millivolts in self.cell_voltages:
            _check_millivolts(millivolts)
        for value in self.temperatures:
            _check_temperature(value)
        if not 0 <= self.state_of_health <= 100:
            raise ValueOutOfRange(f"State of health {self.state_of_health} outside 0..100")
        if not 0 <= self.cycle_count <= 0xFFFFFFFF:
            raise ValueOutOfRange(f"Cycle count {self.cycle_count} out of range")

        self.fault_flags = FaultFlag(self.fault_flags)
        if self.lifetime_min_voltage is None:
            self.lifetime_min_voltage = min(self.cell_voltages)
        if self.lifetime_max_temp is None:
            self.lifetime_max_temp = max(self.temperatures)
        self.lifetime_min_voltage = min(self.lifetime_min_voltage, *self.cell_voltages)
        self.lifetime_max_temp = max(self.lifetime_max_temp, *self.temperatures)

    def to_dict(self) -> dict:
        return {
            "cell_voltages_mv": list(self.cell_voltages),
            "temperatures_dc": list(self.temperatures),
            "state_of_health": self.state_of_health,
            "cycle_count": self.cycle_count,
            "fault_flags": [flag.name for flag in FaultFlag if flag and flag in self.fault_flags],
            "lifetime_min_voltage_mv": self.lifetime_min_voltage,
            "lifetime_max_temp_dc": self.lifetime_max_temp,
        }


def _check_millivolts(millivolts: int) -> None:
    if not 0 <= millivolts <= MAX_MILLIVOLTS:
        raise ValueOutOfRange(f"Cell voltage {millivolts} mV outside 0..{MAX_MILLIVOLTS}")


def _check_temperature(value: int) -> None:
    if not MIN_TEMP <= value <= MAX_TEMP:
        raise ValueOutOfRange(f"Temperature {value} (0.1 degC) outside {MIN_TEMP}..{MAX_TEMP}")


@dataclass
class DevicePowerState:
    scenario: Scenario
    powered: bool
    wake_latency_ms: int = DEFAULT_WAKE_LATENCY_MS
    ready_at_ms: Optional[int] = None


@dataclass
class ConfigStore:
    entries: dict[int, bytes] = field(default_factory=lambda: dict(FACTORY_CONFIG))
    version: int = 1

    def number(self, key: ConfigKey) -> int:
        signed = NUMERIC_CONFIG_KEYS[key]
        return int.from_bytes(self.entries[key], "big", signed=signed)

    def apply(self, key: int, value: bytes) -> int:
        if len(value) > MAX_CONFIG_VALUE_LEN:
            raise ValueTooLong(f"Config value is {len(value)} bytes, limit is {MAX_CONFIG_VALUE_LEN}")
        if key not in ConfigKey._value2member_map_:
            raise UnknownConfigKey(f"Config key 0x{key:04x} is not writable")
        key = ConfigKey(key)
        if key in NUMERIC_CONFIG_KEYS and len(value) != 2:
            raise InvalidConfigValue(f"{key.name} takes exactly 2 bytes")

        self.entries[key] = bytes(value)
        self.version += 1
        return self.version


class BmsDevice:
    """Battery pack, its processing unit and the NFC-triggered power model"""

    def __init__(self, pack: BatteryPackState, scenario: Scenario = Scenario.ACTIVE,
                 wake_latency_ms: int = DEFAULT_WAKE_LATENCY_MS, config: Optional[ConfigStore] = None):
        if wake_latency_ms < 0:
            raise ValueOutOfRange("wake_latency_ms must be >= 0")
        self.pack = pack
        self.config = config or ConfigStore()
        self.power = DevicePowerState(
            scenario=scenario,
            powered=scenario is Scenario.ACTIVE,
            wake_latency_ms=wake_latency_ms,
        )
        self.recompute_faults()

    @property
    def scenario(self) -> Scenario:
        return self.power.scenario

    # Power

    def wake_up(self, now_ms: int) -> None:
        if self.power.powered or self.power.ready_at_ms is not None:
            return
        self.power.ready_at_ms = now_ms + self.power.wake_latency_ms
        LOGGER.debug("Field on at t=%d ms, MCU ready at t=%d ms", now_ms, self.power.ready_at_ms)
        self.refresh(now_ms)

    def refresh(self, now_ms: int) -> None:
        if self.power.ready_at_ms is not None and now_ms >= self.power.ready_at_ms:
            self.power.powered = True
            self.power.ready_at_ms = None

    def is_powered(self, now_ms: Optional[int] = None) -> bool:
        if now_ms is not None:
            self.refresh(now_ms)
        return self.power.powered

    def field_off(self) -> None:
        if self.power.scenario is Scenario.ON_REST:
            self.power.powered = False
            self.power.ready_at_ms = None

    def _require_power(self) -> None:
        if not self.power.powered:
            raise DeviceUnpowered("Device is not powered")

    # Application

    def read_status(self) -> bytes:
        self._require_power()
        return encode_status(self.pack)

    def apply_config(self, key: int, value: bytes) -> int:
        self._require_power()
        version = self.config.apply(key, value)
        if key in (ConfigKey.OVER_TEMP_THRESHOLD, ConfigKey.UNDER_VOLTAGE_THRESHOLD):
            self.recompute_faults()
        LOGGER.info("Config key 0x%04x updated, version %d", key, version)
        return version

    # Control plane

    def inject_measurement(self, cell_index: int, millivolts: int) -> None:
        if not 0 <= cell_index < len(self.pack.cell_voltages):
            raise IndexOutOfRange(f"Cell index {cell_index} outside 0..{len(self.pack.cell_voltages) - 1}")
        _check_millivolts(millivolts)
        self.pack.cell_voltages[cell_index] = millivolts
        self.pack.lifetime_min_voltage = min(self.pack.lifetime_min_voltage, millivolts)
        self.recompute_faults()

    def inject_temperature(self, probe: int, value: int) -> None:
        if not 0 <= probe < len(self.pack.temperatures):
            raise IndexOutOfRange(f"Probe index {probe} outside 0..{len(self.pack.temperatures) - 1}")
        _check_temperature(value)
        self.pack.temperatures[probe] = value
        self.pack.lifetime_max_temp = max(self.pack.lifetime_max_temp, value)
        self.recompute_faults()

    def inject_fault(self, flag: FaultFlag) -> None:
        self.pack.fault_flags |= flag

    def clear_fault(self, flag: FaultFlag) -> None:
        self.pack.fault_flags &= ~flag

    def recompute_faults(self) -> None:
        flags = self.pack.fault_flags & FaultFlag.COMMS_FAULT
        if max(self.pack.temperatures) > self.config.number(ConfigKey.OVER_TEMP_THRESHOLD):
            flags |= FaultFlag.OVER_TEMP
        if min(self.pack.cell_voltages) < self.config.number(ConfigKey.UNDER_VOLTAGE_THRESHOLD):
            flags |= FaultFlag.UNDER_VOLTAGE
        self.pack.fault_flags = FaultFlag(flags)


def encode_status(pack: BatteryPackState) -> bytes:
    cells, temps = pack.cell_voltages, pack.temperatures
    return (
        struct.pack(f">B{len(cells)}H", len(cells), *cells)
        + struct.pack(f">B{len(temps)}h", len(temps), *temps)
        + _STATUS_TAIL.pack(
            pack.state_of_health,
            pack.cycle_count,
            int(pack.fault_flags),
            pack.lifetime_min_voltage,
            pack.lifetime_max_temp,
        )
    )


def status_size(n_cells: int, n_probes: int) -> int:
    return 2 + 2 * n_cells + 2 * n_probes + _STATUS_TAIL.size


def parse_status(data: bytes) -> BatteryPackState:
    """Reader-side inverse of read_status"""
    data = bytes(data)
    try:
        n_cells = data[0]
        cells = list(struct.unpack_from(f">{n_cells}H", data, 1))
        offset = 1 + 2 * n_cells
        n_temps = data[offset]
        temps = list(struct.unpack_from(f">{n_temps}h", data, offset + 1))
        offset += 1 + 2 * n_temps
        soh, cycles, flags, lifetime_min, lifetime_max = _STATUS_TAIL.unpack_from(data, offset)
    except (IndexError, struct.error) as exc:
        raise StatusFormatError(f"Status payload truncated: {exc}") from exc
    if offset + _STATUS_TAIL.size != len(data):
        raise StatusFormatError(f"Status payload has {len(data) - offset - _STATUS_TAIL.size} trailing bytes")

    try:
        return BatteryPackState(
            cell_voltages=cells,
            temperatures=temps,
            state_of_health=soh,
            cycle_count=cycles,
            fault_flags=FaultFlag(flags),
            lifetime_min_voltage=lifetime_min,
            lifetime_max_temp=lifetime_max,
        )
    except ValueOutOfRange as exc:
        raise StatusFormatError(str(exc)) from exc
