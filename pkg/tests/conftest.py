"""
Pytest configuration and shared fixtures
"""

import pytest
import time
from pathlib import Path
from typing import Any
from rich.console import Console

from sndef_bms.config import Settings, default_settings
from sndef_bms.crypto import SeededEntropy
from sndef_bms.fixtures import parse_identity_fixture, parse_pack_fixture
from tests.data.test_data import DEFAULT_IDENTITY_TEXT, DEFAULT_PACK_TEXT, LARGE_PACK_TEXT
from tests.factories.pack_factory import PackFactory
from tests.utils.test_helpers import TestHelpers

# Initialize console for rich output
console = Console()

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def config() -> Settings:
    """Settings with the built-in defaults, independent of bms_config.json"""
    return default_settings()

@pytest.fixture(scope="session")
def console_output():
    """Rich console for formatted output"""
    return console

@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT

@pytest.fixture(scope="function")
def pack_factory():
    """Factory for creating pack test data"""
    return PackFactory(seed=1234)

@pytest.fixture(scope="function")
def test_helpers():
    """Helper utilities for tests"""
    return TestHelpers()

@pytest.fixture(scope="function")
def rng():
    """Deterministic entropy source"""
    return SeededEntropy(2024)

@pytest.fixture(scope="function")
def identity():
    """Identity from the default identity fixture"""
    return parse_identity_fixture(DEFAULT_IDENTITY_TEXT)

@pytest.fixture(scope="function")
def default_pack():
    """Six-cell Active pack"""
    return parse_pack_fixture(DEFAULT_PACK_TEXT, source="default")

@pytest.fixture(scope="function")
def large_pack():
    """Fourteen-cell On-Rest pack"""
    return parse_pack_fixture(LARGE_PACK_TEXT, source="large")

@pytest.fixture(scope="function")
def fixture_files(tmp_path):
    """Default pack and identity fixtures written to disk"""
    pack = tmp_path / "pack.txt"
    ident = tmp_path / "identity.txt"
    pack.write_text(DEFAULT_PACK_TEXT, encoding="utf-8")
    ident.write_text(DEFAULT_IDENTITY_TEXT, encoding="utf-8")
    return {"pack": pack, "identity": ident, "dir": tmp_path}

@pytest.fixture(scope="function")
def performance_monitor():
    """Monitor for performance testing"""
    class PerformanceMonitor:
        def __init__(self):
            self.start_time = None
            self.end_time = None
            self.metrics = {}

        def start(self):
            self.start_time = time.perf_counter()

        def stop(self):
            self.end_time = time.perf_counter()

        def get_duration(self):
            if self.start_time and self.end_time:
                return self.end_time - self.start_time
            return None

        def add_metric(self, name: str, value: Any):
            self.metrics[name] = value

        def get_metrics(self):
            return self.metrics

    return PerformanceMonitor()

def pytest_configure(config):
    """Make sure the log file directory exists"""
    (REPO_ROOT / "tests" / "reports").mkdir(parents=True, exist_ok=True)

def pytest_runtest_setup(item):
    """Setup for each test"""
    console.print(f"[blue]🧪 Running: {item.name}[/blue]")

def pytest_runtest_teardown(item):
    """Teardown for each test"""
    console.print(f"[green]✅ Completed: {item.name}[/green]")
