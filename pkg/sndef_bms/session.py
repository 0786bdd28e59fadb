"""
Secure channel over SNDEF records

Each direction has its own counter: send_counter starts at 1 and grows by
exactly one per sealed record; inbound counters must be strictly greater
than recv_high_water.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

from .auth import SEED_LEN, DeviceIdentity
from .codec import (
    IV_LEN,
    MAX_DATA_LEN,
    UINT32_MAX,
    CipherSuiteId,
    MessageType,
    PlainMessage,
    SndefRecord,
    decode_plain,
    encode_plain,
)
from .crypto import (
    DEFAULT_PROVIDER,
    NONCE_LEN,
    AesProvider,
    EntropySource,
    SessionKeys,
    derive_session_keys,
    seal,
    unseal,
    validate_nonce,
)
from .errors import (
    CounterExhausted,
    DataTooLong,
    InvalidSeed,
    ReplayDetected,
    SessionClosed,
    SuiteMismatch,
    WriteNotPermitted,
)

LOGGER = logging.getLogger(__name__)


class SessionMode(Enum):
    READ_ONLY = "read-only"
    READ_WRITE = "read-write"


class SessionState(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class Session:
    keys: SessionKeys = field(repr=False)
    suite: CipherSuiteId
    mode: SessionMode
    send_counter: int = 0
    recv_high_water: int = 0
    state: SessionState = SessionState.OPEN
    next_message_id: int = 1

    @property
    def is_open(self) -> bool:
        return self.state is SessionState.OPEN


def open_session(seed: bytes, identity: DeviceIdentity, suite: CipherSuiteId,
                 mode: SessionMode) -> Session:
    if len(seed) != SEED_LEN:
        raise InvalidSeed(f"Seed must be {SEED_LEN} bytes, got {len(seed)}")
    nonce_reader, nonce_device = bytes(seed[:NONCE_LEN]), bytes(seed[NONCE_LEN:])
    if not validate_nonce(nonce_reader) or not validate_nonce(nonce_device, nonce_reader):
        raise InvalidSeed("Seed does not hold two valid, distinct nonces")

    suite = CipherSuiteId(suite)
    keys = derive_session_keys(identity.master_key, identity.dev_add_data, nonce_reader, nonce_device, suite)
    LOGGER.debug("Opened %s session with suite %s", mode.value, suite.cli_name)
    return Session(keys=keys, suite=suite, mode=mode)


def restrict_to_read_only(session: Session) -> None:
    session.mode = SessionMode.READ_ONLY


def _require_open(session: Session) -> None:
    if not session.is_open:
        raise SessionClosed("Session is closed")


def seal_message(session: Session, message_type: MessageType, data: bytes, rng: EntropySource,
                 provider: AesProvider = DEFAULT_PROVIDER) -> SndefRecord:
    _require_open(session)
    message_type = MessageType(message_type)
    if message_type is MessageType.UPDATE_CONFIG and session.mode is SessionMode.READ_ONLY:
        raise WriteNotPermitted("UPDATE_CONFIG needs a read-write session")
    if len(data) > MAX_DATA_LEN:
        raise DataTooLong(f"Data is {len(data)} bytes, limit is {MAX_DATA_LEN}")
    if session.send_counter >= UINT32_MAX:
        raise CounterExhausted("Send counter exhausted, session must be re-keyed")

    session.send_counter += 1
    message = PlainMessage(
        message_id=session.next_message_id,
        message_type=message_type,
        counter=session.send_counter,
        data=bytes(data),
    )
    session.next_message_id = session.next_message_id % UINT32_MAX + 1

    iv = bytes(rng.read(IV_LEN))
    ciphertext, tag = seal(session.suite, session.keys, iv, encode_plain(message), provider=provider)
    return SndefRecord(suite=session.suite, iv=iv, secret_payload=ciphertext, tag=tag)


def open_message(session: Session, record: SndefRecord,
                 provider: AesProvider = DEFAULT_PROVIDER) -> PlainMessage:
    _require_open(session)
    if record.suite != session.suite:
        raise SuiteMismatch(
            f"Record suite 0x{int(record.suite):02x}, session suite 0x{int(session.suite):02x}"
        )

    plaintext = unseal(session.suite, session.keys, record.iv, record.secret_payload, record.tag,
                       provider=provider)
    message = decode_plain(plaintext)
    if message.counter <= session.recv_high_water:
        raise ReplayDetected(
            f"Counter {message.counter} not above high water {session.recv_high_water}"
        )
    session.recv_high_water = message.counter

    if message.message_type is MessageType.UPDATE_CONFIG and session.mode is SessionMode.READ_ONLY:
        raise WriteNotPermitted("UPDATE_CONFIG arrived on a read-only session")
    return message


def close_session(session: Session) -> None:
    if session.state is SessionState.CLOSED:
        return
    session.keys.zeroize()
    session.state = SessionState.CLOSED
    session.send_counter = 0
    session.recv_high_water = 0
    LOGGER.debug("Session closed and keys zeroized")
