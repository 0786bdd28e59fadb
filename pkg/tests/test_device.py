"""
Device model tests: status layout, config store, faults and power
"""

import struct

import pytest

from sndef_bms.device import (
    BatteryPackState,
    BmsDevice,
    ConfigKey,
    ConfigStore,
    FaultFlag,
    Scenario,
    encode_status,
    parse_status,
    status_size,
)
from sndef_bms.errors import (
    DeviceUnpowered,
    IndexOutOfRange,
    InvalidConfigValue,
    StatusFormatError,
    UnknownConfigKey,
    ValueOutOfRange,
    ValueTooLong,
)


@pytest.mark.unit
class TestStatusLayout:
    """Test the READ_STATUS payload"""

    def test_sizes_for_fixture_packs(self, default_pack, large_pack):
        """Test 6 cells / 2 probes give 29 bytes and 14 / 4 give 49"""
        assert status_size(6, 2) == 29
        assert status_size(14, 4) == 49
        assert len(encode_status(default_pack.pack)) == 29
        assert len(encode_status(large_pack.pack)) == 49

    def test_layout_of_default_pack(self, default_pack):
        """Test field positions and big-endian encoding"""
        data = encode_status(default_pack.pack)

        assert data[0] == 6
        assert struct.unpack(">H", data[1:3])[0] == 3712
        assert data[13] == 2
        assert struct.unpack(">h", data[14:16])[0] == 245
        assert data[18] == 94
        assert struct.unpack(">I", data[19:23])[0] == 412
        assert struct.unpack(">H", data[23:25])[0] == 0
        assert struct.unpack(">H", data[25:27])[0] == 3120
        assert struct.unpack(">h", data[27:29])[0] == 472

    def test_parse_inverts_encode(self, default_pack, large_pack):
        """Test the reader recovers every field"""
        for fixture in (default_pack, large_pack):
            assert parse_status(encode_status(fixture.pack)) == fixture.pack

    def test_negative_temperatures(self, pack_factory):
        """Test signed temperatures survive the layout"""
        pack = pack_factory.create_state(n_cells=6, n_probes=2, temperatures=[-125, -400])
        assert parse_status(encode_status(pack)).temperatures == [-125, -400]

    @pytest.mark.parametrize("data", [b"", b"\x06\x0e", b"\x06" + b"\x00" * 40])
    def test_parse_rejects_bad_payloads(self, default_pack, data):
        """Test truncated or oversized payloads raise StatusFormatError"""
        with pytest.raises(StatusFormatError):
            parse_status(data)

    def test_parse_rejects_trailing_bytes(self, default_pack):
        """Test extra bytes after the tail are rejected"""
        with pytest.raises(StatusFormatError):
            parse_status(encode_status(default_pack.pack) + b"\x00")


@pytest.mark.unit
class TestPackState:
    """Test pack construction bounds"""

    def test_cell_count_bounds(self, pack_factory):
        """Test 5 and 15 cells are rejected"""
        with pytest.raises(ValueOutOfRange):
            pack_factory.create_state(n_cells=5, n_probes=2)
        with pytest.raises(ValueOutOfRange):
            pack_factory.create_state(n_cells=15, n_probes=2)

    def test_lifetime_extremes_track_current_values(self):
        """Test lifetime min/max default to and never exceed the current readings"""
        pack = BatteryPackState([3600] * 6, [200, 210], 90, lifetime_min_voltage=3700, lifetime_max_temp=100)
        assert pack.lifetime_min_voltage == 3600
        assert pack.lifetime_max_temp == 210

    def test_to_dict_names_faults(self, large_pack):
        """Test fault flags are reported by name"""
        assert large_pack.pack.to_dict()["fault_flags"] == ["COMMS_FAULT"]


@pytest.mark.unit
class TestConfigStore:
    """Test the writable configuration whitelist"""

    def test_version_starts_at_one(self):
        """Test a fresh store is at version 1 with factory values"""
        store = ConfigStore()
        assert store.version == 1
        assert store.number(ConfigKey.OVER_TEMP_THRESHOLD) == 600
        assert store.number(ConfigKey.UNDER_VOLTAGE_THRESHOLD) == 3000

    def test_apply_bumps_version(self):
        """Test each accepted write increments the version"""
        store = ConfigStore()
        assert store.apply(ConfigKey.REPORT_INTERVAL, b"\x02\x58") == 2
        assert store.apply(ConfigKey.PACK_LABEL, b"rack-7") == 3
        assert store.number(ConfigKey.REPORT_INTERVAL) == 600

    def test_unknown_key(self):
        """Test keys outside the whitelist are refused without a version change"""
        store = ConfigStore()
        with pytest.raises(UnknownConfigKey):
            store.apply(0x00FF, b"\x00\x01")
        assert store.version == 1

    def test_value_too_long(self):
        """Test values above 64 bytes are refused"""
        store = ConfigStore()
        store.apply(ConfigKey.PACK_LABEL, b"x" * 64)
        with pytest.raises(ValueTooLong):
            store.apply(ConfigKey.PACK_LABEL, b"x" * 65)

    def test_numeric_keys_need_two_bytes(self):
        """Test numeric thresholds take exactly two bytes"""
        with pytest.raises(InvalidConfigValue):
            ConfigStore().apply(ConfigKey.BALANCING_THRESHOLD, b"\x01")


@pytest.mark.unit
class TestDeviceBehaviour:
    """Test device operations, faults and the power model"""

    def test_read_status_matches_fixture(self, default_pack):
        """Test an Active device reports its pack"""
        device = default_pack.build_device()
        assert device.read_status() == encode_status(default_pack.pack)

    def test_build_device_copies_pack(self, default_pack):
        """Test injections do not leak back into the fixture"""
        device = default_pack.build_device()
        device.inject_measurement(0, 3000)
        assert default_pack.pack.cell_voltages[0] == 3712

    def test_injection_raises_under_voltage(self, default_pack):
        """Test a low cell sets UNDER_VOLTAGE and tracks the lifetime minimum"""
        device = default_pack.build_device()
        device.inject_measurement(2, 2900)

        assert FaultFlag.UNDER_VOLTAGE in device.pack.fault_flags
        assert device.pack.lifetime_min_voltage == 2900

    def test_injection_raises_over_temp(self, default_pack):
        """Test a hot probe sets OVER_TEMP"""
        device = default_pack.build_device()
        device.inject_temperature(1, 650)
        assert FaultFlag.OVER_TEMP in device.pack.fault_flags
        assert device.pack.lifetime_max_temp == 650

    def test_threshold_update_recomputes_faults(self, default_pack):
        """Test lowering OVER_TEMP below the current reading sets the flag"""
        device = default_pack.build_device()
        device.apply_config(ConfigKey.OVER_TEMP_THRESHOLD, struct.pack(">h", 200))
        assert FaultFlag.OVER_TEMP in device.pack.fault_flags

    def test_inject_and_clear_fault(self, default_pack):
        """Test the control plane can set and clear COMMS_FAULT"""
        device = default_pack.build_device()
        device.inject_fault(FaultFlag.COMMS_FAULT)
        assert FaultFlag.COMMS_FAULT in device.pack.fault_flags
        device.clear_fault(FaultFlag.COMMS_FAULT)
        assert device.pack.fault_flags == FaultFlag.NONE

    def test_injection_index_bounds(self, default_pack):
        """Test out-of-range indices are rejected"""
        device = default_pack.build_device()
        with pytest.raises(IndexOutOfRange):
            device.inject_measurement(6, 3700)
        with pytest.raises(IndexOutOfRange):
            device.inject_temperature(-1, 200)
        with pytest.raises(ValueOutOfRange):
            device.inject_measurement(0, 5001)

    def test_on_rest_device_starts_unpowered(self, default_pack):
        """Test an On-Rest device refuses work until woken"""
        device = default_pack.build_device(Scenario.ON_REST)
        assert not device.is_powered()
        with pytest.raises(DeviceUnpowered):
            device.read_status()

    def test_wake_latency(self, default_pack):
        """Test power arrives wake_latency_ms after the field"""
        device = BmsDevice(default_pack.build_device().pack, Scenario.ON_REST, wake_latency_ms=20)
        device.wake_up(100)

        assert not device.is_powered(119)
        assert device.is_powered(120)

    def test_field_off_powers_down_on_rest_only(self, default_pack):
        """Test field loss cuts power in On-Rest and not in Active"""
        on_rest = default_pack.build_device(Scenario.ON_REST, default_wake_latency_ms=0)
        on_rest.wake_up(0)
        assert on_rest.is_powered(0)
        on_rest.field_off()
        assert not on_rest.is_powered(1)

        active = default_pack.build_device(Scenario.ACTIVE)
        active.field_off()
        assert active.is_powered(1)

    def test_negative_wake_latency(self, default_pack):
        """Test negative latencies are refused"""
        with pytest.raises(ValueOutOfRange):
            BmsDevice(default_pack.pack, wake_latency_ms=-1)
