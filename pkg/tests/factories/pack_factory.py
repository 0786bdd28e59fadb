"""
Factory for generating battery packs, fixture texts and device identities
"""

from faker import Faker
from typing import Dict, List, Any, Optional

from sndef_bms.auth import DeviceIdentity
from sndef_bms.crypto import MasterKey
from sndef_bms.device import BatteryPackState, FaultFlag, Scenario
from sndef_bms.fixtures import PackFixture


class PackFactory:
    """Factory for creating pack test data"""

    def __init__(self, seed: Optional[int] = None):
        self.fake = Faker()
        if seed is not None:
            self.reset_seed(seed)

    def cell_voltages(self, count: Optional[int] = None) -> List[int]:
        count = count or self.fake.random_int(6, 14)
        nominal = self.fake.random_int(3550, 3800)
        return [nominal + self.fake.random_int(-15, 15) for _ in range(count)]

    def temperatures(self, count: Optional[int] = None) -> List[int]:
        count = count or self.fake.random_int(2, 4)
        ambient = self.fake.random_int(150, 320)
        return [ambient + self.fake.random_int(-10, 10) for _ in range(count)]

    def create_state(self, **kwargs) -> BatteryPackState:
        """Create a healthy pack state; keyword arguments override fields"""
        values: Dict[str, Any] = {
            "cell_voltages": self.cell_voltages(kwargs.pop("n_cells", None)),
            "temperatures": self.temperatures(kwargs.pop("n_probes", None)),
            "state_of_health": self.fake.random_int(70, 100),
            "cycle_count": self.fake.random_int(0, 3000),
        }
        values.update(kwargs)
        return BatteryPackState(**values)

    def create(self, scenario: Scenario = Scenario.ACTIVE, wake_latency_ms: Optional[int] = None,
               **kwargs) -> PackFixture:
        """Create a pack fixture"""
        return PackFixture(pack=self.create_state(**kwargs), scenario=scenario,
                           wake_latency_ms=wake_latency_ms, source="factory")

    def create_batch(self, count: int, **kwargs) -> List[PackFixture]:
        """Create multiple pack fixtures"""
        return [self.create(**kwargs) for _ in range(count)]

    def create_identity(self, **kwargs) -> DeviceIdentity:
        """Create a device identity with a random serial and master key"""
        values = {
            "device_serial": self.fake.binary(length=8),
            "master_key": MasterKey(self.fake.binary(length=16)),
        }
        values.update(kwargs)
        return DeviceIdentity(**values)

    def fixture_text(self, state: Optional[BatteryPackState] = None, scenario: Scenario = Scenario.ACTIVE,
                     **extra) -> str:
        """Render a pack state in the fixture file format"""
        state = state or self.create_state()
        lines = [
            f"scenario = {scenario.value}",
            "cells = " + ", ".join(map(str, state.cell_voltages)),
            "temperatures = " + ", ".join(map(str, state.temperatures)),
            f"state_of_health = {state.state_of_health}",
            f"cycle_count = {state.cycle_count}",
        ]
        flags = [flag.name.lower() for flag in FaultFlag if flag and flag in state.fault_flags]
        if flags:
            lines.append("fault_flags = " + ", ".join(flags))
        lines.extend(f"{key} = {value}" for key, value in extra.items())
        return "\n".join(lines) + "\n"

    def create_invalid(self, invalid_type: str = "missing_field") -> str:
        """Create invalid fixture text for testing"""
        valid = self.fixture_text()
        if invalid_type == "missing_field":
            return "\n".join(line for line in valid.splitlines() if not line.startswith("cells"))
        elif invalid_type == "unknown_key":
            return valid + "colour = blue\n"
        elif invalid_type == "too_few_cells":
            return valid.replace(valid.splitlines()[1], "cells = 3700, 3700, 3700")
        elif invalid_type == "bad_scenario":
            return valid.replace("scenario = active", "scenario = parked")
        elif invalid_type == "not_a_number":
            return valid.replace("state_of_health", "state_of_health = lots\n# ", 1)
        elif invalid_type == "no_equals":
            return valid + "cells 3700\n"
        else:
            return ""

    def reset_seed(self, seed: int = 42):
        """Reset random seed for reproducible test data"""
        self.fake.seed_instance(seed)
