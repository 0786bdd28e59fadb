"""
Crypto benchmark: authentication handshake and per-suite seal + unseal

Figures are desk-scale wall-clock numbers. The reference timings below were
taken on an automotive MCU with a hardware crypto engine and a physical NFC
link, so they are shown for orientation only and are not comparable.
"""

import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import psutil

from .auth import DeviceIdentity, device_finish, device_respond, reader_begin, reader_finish
from .codec import IV_LEN, PLAIN_HEADER, CipherSuiteId, MessageType
from .config import BenchSettings
from .crypto import KEY_LEN, EntropySource, MasterKey, SystemEntropy, derive_session_keys, random_nonce, seal, unseal
from .session import SessionMode, open_session

LOGGER = logging.getLogger(__name__)

MAX_BENCH_PAYLOAD = 10 * 1024
DEFAULT_SUITES = (CipherSuiteId.CBC_CMAC, CipherSuiteId.GCM)

# (mean ms, stddev ms) per phase
REFERENCE_TIMINGS_MS = {
    "authentication": (78.61, 1.53),
    "cbc-cmac": (114.34, 1.98),
    "gcm": (145.64, 2.09),
}


@dataclass
class BenchRow:
    phase: str
    suite: Optional[str]
    samples_ms: list[float] = field(repr=False)

    @property
    def mean_ms(self) -> float:
        return statistics.mean(self.samples_ms)

    @property
    def stdev_ms(self) -> Optional[float]:
        if len(self.samples_ms) < 2:
            return None
        return statistics.stdev(self.samples_ms)

    @property
    def reference_ms(self) -> Optional[tuple[float, float]]:
        return REFERENCE_TIMINGS_MS.get(self.suite or self.phase)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "suite": self.suite,
            "iterations": len(self.samples_ms),
            "mean_ms": round(self.mean_ms, 6),
            "stdev_ms": None if self.stdev_ms is None else round(self.stdev_ms, 6),
            "min_ms": round(min(self.samples_ms), 6),
            "max_ms": round(max(self.samples_ms), 6),
            "reference_ms": self.reference_ms,
        }


@dataclass
class BenchReport:
    payload_bytes: int
    iterations: int
    workers: int
    rows: list[BenchRow]
    rss_before_mb: float
    rss_after_mb: float
    note: str = "Reference values come from MCU hardware and are not comparable to desk-scale timings."

    def to_dict(self) -> dict:
        return {
            "payload_bytes": self.payload_bytes,
            "plaintext_bytes": PLAIN_HEADER.size + self.payload_bytes,
            "iterations": self.iterations,
            "workers": self.workers,
            "rows": [row.to_dict() for row in self.rows],
            "memory": {
                "rss_before_mb": round(self.rss_before_mb, 3),
                "rss_after_mb": round(self.rss_after_mb, 3),
            },
            "note": self.note,
        }


def _rss_mb() -> float:
    return psutil.Process(os.getpid()).memory_info().rss / 1024 / 1024


def bench_plaintext(payload_bytes: int, rng: EntropySource) -> bytes:
    """Header-framed plaintext of the given payload size"""
    if not 0 <= payload_bytes <= MAX_BENCH_PAYLOAD:
        raise ValueError(f"Payload must be 0..{MAX_BENCH_PAYLOAD} bytes")
    payload = bytes(rng.read(payload_bytes)) if payload_bytes else b""
    return PLAIN_HEADER.pack(1, int(MessageType.STATUS_DATA), 1, payload_bytes) + payload


def _time_ms(operation: Callable[[], None]) -> float:
    start = time.perf_counter()
    operation()
    return (time.perf_counter() - start) * 1000.0


def _handshake(identity: DeviceIdentity, rng: EntropySource, suite: CipherSuiteId) -> None:
    reader_state, m1 = reader_begin(identity, rng)
    device_state, m2 = device_respond(identity, m1, rng)
    _, m3, reader_seed = reader_finish(reader_state, identity, m2)
    _, device_seed = device_finish(device_state, identity, m3)
    open_session(reader_seed, identity, suite, SessionMode.READ_ONLY)
    open_session(device_seed, identity, suite, SessionMode.READ_ONLY)


def _auth_worker(identity: DeviceIdentity, iterations: int, warmup: int) -> list[float]:
    rng = SystemEntropy()
    for _ in range(warmup):
        _handshake(identity, rng, CipherSuiteId.CBC_CMAC)
    return [_time_ms(lambda: _handshake(identity, rng, CipherSuiteId.CBC_CMAC)) for _ in range(iterations)]


def _seal_worker(identity: DeviceIdentity, suite: CipherSuiteId, plaintext: bytes,
                 iterations: int, warmup: int) -> list[float]:
    rng = SystemEntropy()
    nonce_reader = random_nonce(rng)
    nonce_device = random_nonce(rng, nonce_reader)
    keys = derive_session_keys(identity.master_key, identity.dev_add_data, nonce_reader, nonce_device, suite)

    def round_trip() -> None:
        iv = rng.read(IV_LEN)
        ciphertext, tag = seal(suite, keys, iv, plaintext)
        unseal(suite, keys, iv, ciphertext, tag)

    for _ in range(warmup):
        round_trip()
    return [_time_ms(round_trip) for _ in range(iterations)]


def _split(iterations: int, workers: int) -> list[int]:
    base, extra = divmod(iterations, workers)
    return [base + (1 if index < extra else 0) for index in range(workers) if base or index < extra]


def _collect(worker: Callable[[int], list[float]], iterations: int, workers: int) -> list[float]:
    shares = _split(iterations, workers)
    if len(shares) == 1:
        return worker(shares[0])
    samples = []
    with ThreadPoolExecutor(max_workers=len(shares)) as executor:
        for chunk in executor.map(worker, shares):
            samples.extend(chunk)
    return samples


def run_benchmark(settings: Optional[BenchSettings] = None, suites=DEFAULT_SUITES,
                  identity: Optional[DeviceIdentity] = None) -> BenchReport:
    settings = settings or BenchSettings()
    if settings.iterations < 1:
        raise ValueError("iterations must be >= 1")
    if settings.workers < 1:
        raise ValueError("workers must be >= 1")

    rng = SystemEntropy()
    identity = identity or DeviceIdentity(device_serial=bytes(8), master_key=MasterKey(rng.read(KEY_LEN)))
    plaintext = bench_plaintext(settings.payload_bytes, rng)
    rss_before = _rss_mb()

    rows = [BenchRow(
        "authentication", None,
        _collect(lambda n: _auth_worker(identity, n, settings.warmup), settings.iterations, settings.workers),
    )]
    for suite in suites:
        suite = CipherSuiteId(suite)
        LOGGER.info("Benchmarking %s on %d plaintext bytes", suite.cli_name, len(plaintext))
        rows.append(BenchRow(
            "secure transmission", suite.cli_name,
            _collect(lambda n, suite=suite: _seal_worker(identity, suite, plaintext, n, settings.warmup),
                     settings.iterations, settings.workers),
        ))

    return BenchReport(
        payload_bytes=settings.payload_bytes,
        iterations=settings.iterations,
        workers=settings.workers,
        rows=rows,
        rss_before_mb=rss_before,
        rss_after_mb=_rss_mb(),
    )
