"""
Three-pass symmetric mutual authentication

    M1  reader -> device   nonce_R                                    (16 bytes)
    M2  device -> reader   CBC(K_M, IV=0,          nonce_D || nonce_R) (32 bytes)
    M3  reader -> device   CBC(K_M, IV=M2[16:32],  nonce_R || nonce_D) (32 bytes)

M3 continues the CBC chain of M2, so neither nonce ever appears as a
single-block encryption under K_M. Both sides end with
seed = nonce_R || nonce_D.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .crypto import (
    DEFAULT_PROVIDER,
    NONCE_LEN,
    AesProvider,
    EntropySource,
    MasterKey,
    Nonce128,
    random_nonce,
    validate_nonce,
)
from .errors import (
    ChallengeMismatch,
    InvalidNonce,
    InvalidPhase,
    LockedOut,
    MalformedMessage,
    ReflectionDetected,
    SndefError,
)

LOGGER = logging.getLogger(__name__)

SERIAL_LEN = 8
M1_LEN = NONCE_LEN
M2_LEN = M3_LEN = 2 * NONCE_LEN
SEED_LEN = 2 * NONCE_LEN
ZERO_IV = bytes(16)


@dataclass(frozen=True)
class DeviceIdentity:
    device_serial: bytes
    master_key: MasterKey = field(repr=False)
    dev_add_data: Optional[bytes] = None

    def __post_init__(self):
        if len(self.device_serial) != SERIAL_LEN:
            raise ValueError(f"Device serial must be {SERIAL_LEN} bytes")
        if self.dev_add_data is None:
            object.__setattr__(self, "dev_add_data", bytes(self.device_serial))

    @property
    def serial_hex(self) -> str:
        return self.device_serial.hex()


class Role(Enum):
    READER = "reader"
    DEVICE = "device"


class Phase(Enum):
    IDLE = "idle"
    CHALLENGE_SENT = "challenge-sent"
    CHALLENGE_RECEIVED = "challenge-received"
    AUTHENTICATED = "authenticated"
    FAILED = "failed"


@dataclass
class AuthState:
    role: Role
    phase: Phase = Phase.IDLE
    own_nonce: Optional[Nonce128] = None
    peer_nonce: Optional[Nonce128] = None
    m2: Optional[bytes] = None
    seed: Optional[bytes] = field(default=None, repr=False)

    def fail(self) -> None:
        self.phase = Phase.FAILED
        self.seed = None

    def session_seed(self) -> bytes:
        if self.phase is not Phase.AUTHENTICATED or self.seed is None:
            raise InvalidPhase(f"No seed in phase {self.phase.value}")
        return self.seed


@dataclass
class FailureGuard:
    """Consecutive-failure lockout on the device, in simulated milliseconds"""

    threshold: int = 5
    lockout_ms: int = 5000
    failures: int = 0
    locked_until: int = 0

    def is_locked(self, now_ms: int) -> bool:
        if self.locked_until and now_ms >= self.locked_until:
            self.locked_until = 0
            self.failures = 0
        return bool(self.locked_until)

    def record_failure(self, now_ms: int) -> None:
        self.failures += 1
        if self.failures >= self.threshold:
            self.locked_until = now_ms + self.lockout_ms
            LOGGER.warning("Device locked out until t=%d ms after %d failures", self.locked_until, self.failures)

    def record_success(self) -> None:
        self.failures = 0


def _cbc_encrypt(provider: AesProvider, identity: DeviceIdentity, iv: bytes, data: bytes) -> bytes:
    return provider.cbc(identity.master_key.key, iv).encrypt(data)


def _cbc_decrypt(provider: AesProvider, identity: DeviceIdentity, iv: bytes, data: bytes) -> bytes:
    return provider.cbc(identity.master_key.key, iv).decrypt(data)


def _require_phase(state: AuthState, role: Role, phase: Phase) -> None:
    if state.role is not role or state.phase is not phase:
        raise InvalidPhase(f"{state.role.value} in phase {state.phase.value}, expected {phase.value}")


def reader_begin(identity: DeviceIdentity, rng: EntropySource) -> tuple[AuthState, bytes]:
    nonce_r = random_nonce(rng)
    state = AuthState(role=Role.READER, phase=Phase.CHALLENGE_SENT, own_nonce=nonce_r)
    LOGGER.debug("Reader challenge for device %s", identity.serial_hex)
    return state, nonce_r.value


def device_respond(identity: DeviceIdentity, m1: bytes, rng: EntropySource,
                   guard: Optional[FailureGuard] = None, now_ms: int = 0,
                   provider: AesProvider = DEFAULT_PROVIDER) -> tuple[AuthState, bytes]:
    if guard is not None and guard.is_locked(now_ms):
        raise LockedOut(f"Device locked until t={guard.locked_until} ms")
    if len(m1) != M1_LEN:
        raise MalformedMessage(f"M1 must be {M1_LEN} bytes, got {len(m1)}")
    if not validate_nonce(m1):
        raise InvalidNonce("Reader challenge is a guard value")

    nonce_r = Nonce128(bytes(m1))
    nonce_d = random_nonce(rng, peer=nonce_r)
    m2 = _cbc_encrypt(provider, identity, ZERO_IV, nonce_d.value + nonce_r.value)
    state = AuthState(
        role=Role.DEVICE,
        phase=Phase.CHALLENGE_RECEIVED,
        own_nonce=nonce_d,
        peer_nonce=nonce_r,
        m2=m2,
    )
    return state, m2


def reader_finish(state: AuthState, identity: DeviceIdentity, m2: bytes,
                  provider: AesProvider = DEFAULT_PROVIDER) -> tuple[AuthState, bytes, bytes]:
    try:
        _require_phase(state, Role.READER, Phase.CHALLENGE_SENT)
        if len(m2) != M2_LEN:
            raise MalformedMessage(f"M2 must be {M2_LEN} bytes, got {len(m2)}")

        plain = _cbc_decrypt(provider, identity, ZERO_IV, bytes(m2))
        nonce_d, echoed_r = plain[:NONCE_LEN], plain[NONCE_LEN:]
        if echoed_r != state.own_nonce.value:
            raise ChallengeMismatch("M2 does not carry the reader challenge")
        if not validate_nonce(nonce_d, state.own_nonce):
            raise InvalidNonce("Device challenge is a guard value or repeats the reader's")

        m3 = _cbc_encrypt(provider, identity, bytes(m2[NONCE_LEN:]), state.own_nonce.value + nonce_d)
        if m3 == bytes(m2):
            raise ReflectionDetected("M3 would equal M2")
    except SndefError:
        state.fail()
        raise

    state.peer_nonce = Nonce128(nonce_d)
    state.m2 = bytes(m2)
    state.seed = state.own_nonce.value + nonce_d
    state.phase = Phase.AUTHENTICATED
    return state, m3, state.seed


def device_finish(state: AuthState, identity: DeviceIdentity, m3: bytes,
                  guard: Optional[FailureGuard] = None, now_ms: int = 0,
                  provider: AesProvider = DEFAULT_PROVIDER) -> tuple[AuthState, bytes]:
    try:
        _require_phase(state, Role.DEVICE, Phase.CHALLENGE_RECEIVED)
        if len(m3) != M3_LEN:
            raise MalformedMessage(f"M3 must be {M3_LEN} bytes, got {len(m3)}")
        if bytes(m3) == state.m2:
            raise ReflectionDetected("M3 reflects M2")

        expected = state.peer_nonce.value + state.own_nonce.value
        plain = _cbc_decrypt(provider, identity, state.m2[NONCE_LEN:], bytes(m3))
        if plain != expected:
            raise ChallengeMismatch("M3 does not carry nonce_R || nonce_D")
    except SndefError:
        state.fail()
        if guard is not None:
            guard.record_failure(now_ms)
        raise

    if guard is not None:
        guard.record_success()
    state.seed = expected
    state.phase = Phase.AUTHENTICATED
    return state, state.seed
