"""
Reader and device protocol drivers attached to a simulated link
"""

import logging
import struct
import time
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Optional

from .auth import (
    AuthState,
    DeviceIdentity,
    FailureGuard,
    Phase,
    device_finish,
    device_respond,
    reader_begin,
    reader_finish,
)
from .codec import CipherSuiteId, MessageType, PlainMessage, decode_record, record_to_wire, unwrap_ndef
from .crypto import EntropySource
from .device import BatteryPackState, BmsDevice, parse_status
from .errors import (
    AuthError,
    ChallengeMismatch,
    CodecError,
    InvalidConfigValue,
    InvalidNonce,
    LockedOut,
    MalformedMessage,
    ReflectionDetected,
    ReplayDetected,
    SessionClosed,
    SndefError,
    SuiteMismatch,
    TagMismatch,
    UnknownConfigKey,
    ValueTooLong,
    WriteNotPermitted,
)
from .session import (
    Session,
    SessionMode,
    close_session,
    open_message,
    open_session,
    restrict_to_read_only,
    seal_message,
)
from .transport import Frame, FrameType, Link

LOGGER = logging.getLogger(__name__)

CONFIG_KEY_LEN = 2
_VERSION = struct.Struct(">I")


class NakReason(IntEnum):
    CHALLENGE_MISMATCH = 0x01
    REFLECTION = 0x02
    INVALID_NONCE = 0x03
    MALFORMED = 0x04
    LOCKED_OUT = 0x05
    NO_HANDSHAKE = 0x06
    NO_SESSION = 0x10
    TAG_MISMATCH = 0x11
    REPLAY = 0x12
    SUITE_MISMATCH = 0x13
    DECODE_ERROR = 0x14
    WRITE_NOT_PERMITTED = 0x15
    UNEXPECTED = 0x1F

    @property
    def is_auth(self) -> bool:
        return self.value < 0x10


class ConfigErrorCode(IntEnum):
    UNKNOWN_KEY = 0x01
    VALUE_TOO_LONG = 0x02
    INVALID_VALUE = 0x03
    MALFORMED_REQUEST = 0x04
    UNSUPPORTED_REQUEST = 0x05


# Most specific first
_NAK_REASONS = (
    (SuiteMismatch, NakReason.SUITE_MISMATCH),
    (TagMismatch, NakReason.TAG_MISMATCH),
    (ReplayDetected, NakReason.REPLAY),
    (WriteNotPermitted, NakReason.WRITE_NOT_PERMITTED),
    (SessionClosed, NakReason.NO_SESSION),
    (CodecError, NakReason.DECODE_ERROR),
    (ReflectionDetected, NakReason.REFLECTION),
    (ChallengeMismatch, NakReason.CHALLENGE_MISMATCH),
    (InvalidNonce, NakReason.INVALID_NONCE),
    (MalformedMessage, NakReason.MALFORMED),
    (LockedOut, NakReason.LOCKED_OUT),
)

_CONFIG_ERRORS = (
    (UnknownConfigKey, ConfigErrorCode.UNKNOWN_KEY),
    (ValueTooLong, ConfigErrorCode.VALUE_TOO_LONG),
    (InvalidConfigValue, ConfigErrorCode.INVALID_VALUE),
)


def nak_reason_for(exc: Exception) -> NakReason:
    for error_type, reason in _NAK_REASONS:
        if isinstance(exc, error_type):
            return reason
    return NakReason.UNEXPECTED


class Outcome(Enum):
    SUCCESS = "success"
    REJECTED = "rejected"
    TIMEOUT = "timeout"


class Stage(Enum):
    AUTH = "auth"
    CHANNEL = "channel"


@dataclass(frozen=True)
class Request:
    message_type: MessageType
    key: Optional[int] = None
    value: bytes = b""

    @classmethod
    def read(cls) -> "Request":
        return cls(MessageType.READ_STATUS)

    @classmethod
    def update(cls, key: int, value: bytes) -> "Request":
        return cls(MessageType.UPDATE_CONFIG, key=key, value=bytes(value))

    def payload(self) -> bytes:
        if self.message_type is MessageType.UPDATE_CONFIG:
            return self.key.to_bytes(CONFIG_KEY_LEN, "big") + self.value
        return b""


@dataclass
class AcceptedMessage:
    counter: int
    message_type: MessageType
    wire: bytes


@dataclass
class PhaseClock:
    """Simulated and wall-clock marks of one protocol run"""

    auth_start_ms: Optional[int] = None
    auth_end_ms: Optional[int] = None
    done_ms: Optional[int] = None
    auth_start_wall: Optional[float] = None
    auth_end_wall: Optional[float] = None
    done_wall: Optional[float] = None

    def simulated(self) -> dict:
        return {
            "auth_ms": _span(self.auth_start_ms, self.auth_end_ms),
            "transmission_ms": _span(self.auth_end_ms, self.done_ms),
        }

    def wall_clock(self) -> dict:
        spans = (_span(self.auth_start_wall, self.auth_end_wall), _span(self.auth_end_wall, self.done_wall))
        return {
            "auth_ms": None if spans[0] is None else round(spans[0] * 1000.0, 3),
            "transmission_ms": None if spans[1] is None else round(spans[1] * 1000.0, 3),
        }


def _span(start, end):
    if start is None or end is None:
        return None
    return end - start


class _Participant:
    name = ""

    def __init__(self, identity: DeviceIdentity, suite: CipherSuiteId, rng: EntropySource):
        self.identity = identity
        self.suite = CipherSuiteId(suite)
        self.rng = rng
        self.session: Optional[Session] = None
        self.sealed_wire: list[bytes] = []
        self.accepted: list[AcceptedMessage] = []
        self.rejections: list[str] = []

    def _send(self, link: Link, frame_type: FrameType, payload: bytes) -> None:
        link.transmit(self.name, frame_type, payload)

    def _send_message(self, link: Link, message_type: MessageType, data: bytes) -> None:
        record = seal_message(self.session, message_type, data, self.rng)
        wire = record_to_wire(record)
        self.sealed_wire.append(wire)
        self._send(link, FrameType.DATA, wire)

    def _open(self, frame: Frame) -> PlainMessage:
        if self.session is None or not self.session.is_open:
            raise SessionClosed("No open session")
        record_bytes = unwrap_ndef(frame.payload)
        if record_bytes[:1] != bytes([self.suite]):
            raise SuiteMismatch(f"Record suite byte {record_bytes[:1].hex()}, provisioned 0x{int(self.suite):02x}")
        message = open_message(self.session, decode_record(record_bytes))
        self.accepted.append(AcceptedMessage(message.counter, message.message_type, frame.payload))
        return message

    def _reject(self, link: Link, exc: Exception) -> None:
        name = type(exc).__name__
        self.rejections.append(name)
        link.event(self.name, f"rejected: {name}")
        LOGGER.info("%s rejected inbound frame: %s (%s)", self.name, name, exc)

    def _drop_session(self) -> None:
        if self.session is not None:
            close_session(self.session)


class ReaderEndpoint(_Participant):
    """Mobile reader: authenticates, then works through a request plan"""

    name = "reader"

    def __init__(self, identity: DeviceIdentity, suite: CipherSuiteId, rng: EntropySource,
                 plan: Optional[list[Request]] = None, response_timeout_ms: int = 100, max_retries: int = 2):
        super().__init__(identity, suite, rng)
        self.plan = list(plan) if plan is not None else [Request.read()]
        self.mode = (
            SessionMode.READ_WRITE
            if any(request.message_type is MessageType.UPDATE_CONFIG for request in self.plan)
            else SessionMode.READ_ONLY
        )
        self.response_timeout_ms = response_timeout_ms
        self.retries_left = max_retries
        self.auth: Optional[AuthState] = None
        self.m1: Optional[bytes] = None
        self.pending: Optional[Request] = None
        self.outcome: Optional[Outcome] = None
        self.reason: Optional[str] = None
        self.stage: Optional[Stage] = None
        self.status: Optional[BatteryPackState] = None
        self.status_bytes: Optional[bytes] = None
        self.update_results: list[dict] = []
        self.clock = PhaseClock()
        self._timer_token = 0

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def is_powered(self, now_ms: int) -> bool:
        return True

    def start(self, link: Link) -> None:
        self.auth, self.m1 = reader_begin(self.identity, self.rng)
        self.clock.auth_start_ms = link.now_ms
        self.clock.auth_start_wall = time.perf_counter()
        self._send(link, FrameType.AUTH1, self.m1)
        self._arm_timer(link)

    def on_field(self, link: Link, on: bool) -> None:
        if not on and not self.done:
            self._drop_session()

    # Timers

    def _arm_timer(self, link: Link) -> None:
        self._timer_token += 1
        token = self._timer_token
        link.schedule(self.response_timeout_ms, lambda: self._on_timeout(link, token))

    def _cancel_timer(self) -> None:
        self._timer_token += 1

    def _on_timeout(self, link: Link, token: int) -> None:
        if token != self._timer_token or self.done:
            return
        if self.auth is not None and self.auth.phase is Phase.CHALLENGE_SENT and self.retries_left > 0:
            self.retries_left -= 1
            link.event(self.name, "retry AUTH1")
            # each attempt carries its own challenge
            self.auth, self.m1 = reader_begin(self.identity, self.rng)
            self._send(link, FrameType.AUTH1, self.m1)
            self._arm_timer(link)
            return
        link.event(self.name, "timeout")
        self._finish(link, Outcome.TIMEOUT, "Timeout", None)

    # Frames

    def on_frame(self, link: Link, frame: Frame) -> None:
        if self.done:
            link.event(self.name, f"ignored {frame.frame_type.value} after completion")
            return
        if frame.frame_type is FrameType.NAK:
            self._on_nak(link, frame)
        elif frame.frame_type is FrameType.AUTH2:
            self._on_auth2(link, frame)
        elif frame.frame_type is FrameType.DATA:
            self._on_data(link, frame)
        else:
            link.event(self.name, f"ignored unexpected {frame.frame_type.value}")

    def _on_nak(self, link: Link, frame: Frame) -> None:
        try:
            reason = NakReason(frame.payload[0])
        except (IndexError, ValueError):
            reason = NakReason.UNEXPECTED
        link.event(self.name, f"nak: {reason.name}")
        self._finish(link, Outcome.REJECTED, reason.name, Stage.AUTH if reason.is_auth else Stage.CHANNEL)

    def _on_auth2(self, link: Link, frame: Frame) -> None:
        if self.auth is None or self.auth.phase is not Phase.CHALLENGE_SENT:
            link.event(self.name, "ignored AUTH2 outside handshake")
            return
        try:
            _, m3, seed = reader_finish(self.auth, self.identity, frame.payload)
        except SndefError as exc:
            self._reject(link, exc)
            self._finish(link, Outcome.REJECTED, type(exc).__name__, Stage.AUTH)
            return

        self._cancel_timer()
        self._send(link, FrameType.AUTH3, m3)
        self.session = open_session(seed, self.identity, self.suite, self.mode)
        self.clock.auth_end_ms = link.now_ms
        self.clock.auth_end_wall = time.perf_counter()
        link.event(self.name, "authenticated")
        self._next_request(link)

    def _next_request(self, link: Link) -> None:
        if not self.plan:
            self._finish(link, Outcome.SUCCESS, None, None)
            return
        self.pending = self.plan.pop(0)
        try:
            self._send_message(link, self.pending.message_type, self.pending.payload())
        except SndefError as exc:
            self._reject(link, exc)
            self._finish(link, Outcome.REJECTED, type(exc).__name__, Stage.CHANNEL)
            return
        self._arm_timer(link)

    def _on_data(self, link: Link, frame: Frame) -> None:
        if self.pending is None:
            link.event(self.name, "ignored DATA without a pending request")
            return
        try:
            message = self._open(frame)
            self._handle_response(link, message)
        except SndefError as exc:
            self._cancel_timer()
            self._reject(link, exc)
            self._finish(link, Outcome.REJECTED, type(exc).__name__, Stage.CHANNEL)
            return
        self._cancel_timer()
        self._next_request(link)

    def _handle_response(self, link: Link, message: PlainMessage) -> None:
        request = self.pending
        if request.message_type is MessageType.READ_STATUS and message.message_type is MessageType.STATUS_DATA:
            self.status = parse_status(message.data)
            self.status_bytes = message.data
            link.event(self.name, f"accepted STATUS_DATA counter={message.counter}")
        elif request.message_type is MessageType.UPDATE_CONFIG and message.message_type is MessageType.ACK:
            (version,) = _VERSION.unpack(message.data[:_VERSION.size])
            self.update_results.append({"key": f"0x{request.key:04x}", "accepted": True, "version": version})
            link.event(self.name, f"accepted ACK counter={message.counter} version={version}")
        elif request.message_type is MessageType.UPDATE_CONFIG and message.message_type is MessageType.ERROR:
            code = ConfigErrorCode(message.data[0]).name if message.data else "UNKNOWN"
            self.update_results.append({"key": f"0x{request.key:04x}", "accepted": False, "error": code})
            link.event(self.name, f"accepted ERROR counter={message.counter} code={code}")
        else:
            raise MalformedMessage(
                f"{message.message_type.name} does not answer {request.message_type.name}"
            )
        self.pending = None

    def _finish(self, link: Link, outcome: Outcome, reason: Optional[str], stage: Optional[Stage]) -> None:
        self._cancel_timer()
        self.outcome, self.reason, self.stage = outcome, reason, stage
        self.clock.done_ms = link.now_ms
        self.clock.done_wall = time.perf_counter()
        self._drop_session()
        link.event(self.name, f"finished: {outcome.value}" + (f" ({reason})" if reason else ""))


class DeviceEndpoint(_Participant):
    """BMS side of the link: answers the handshake and serves requests"""

    name = "device"

    def __init__(self, device: BmsDevice, identity: DeviceIdentity, suite: CipherSuiteId,
                 rng: EntropySource, guard: Optional[FailureGuard] = None):
        super().__init__(identity, suite, rng)
        self.device = device
        self.guard = guard or FailureGuard()
        self.auth: Optional[AuthState] = None
        self.mode_bound = False
        self.authenticated_count = 0

    def is_powered(self, now_ms: int) -> bool:
        return self.device.is_powered(now_ms)

    def on_field(self, link: Link, on: bool) -> None:
        if on:
            self.device.wake_up(link.now_ms)
            if not self.device.is_powered(link.now_ms):
                link.schedule(self.device.power.wake_latency_ms, lambda: self._wake_complete(link))
            return
        if self.session is not None or self.auth is not None:
            link.event(self.name, "session aborted: field off")
        self._reset()
        self.device.field_off()

    def _wake_complete(self, link: Link) -> None:
        if self.device.is_powered(link.now_ms):
            link.event(self.name, "powered")

    def _reset(self) -> None:
        self._drop_session()
        self.session = None
        self.auth = None
        self.mode_bound = False

    def _nak(self, link: Link, exc: Exception) -> None:
        self._reject(link, exc)
        self._send(link, FrameType.NAK, bytes([nak_reason_for(exc)]))

    def on_frame(self, link: Link, frame: Frame) -> None:
        handler = {
            FrameType.AUTH1: self._on_auth1,
            FrameType.AUTH3: self._on_auth3,
            FrameType.DATA: self._on_data,
        }.get(frame.frame_type)
        if handler is None:
            link.event(self.name, f"ignored unexpected {frame.frame_type.value}")
            return
        handler(link, frame)

    def _on_auth1(self, link: Link, frame: Frame) -> None:
        self._reset()
        try:
            self.auth, m2 = device_respond(self.identity, frame.payload, self.rng,
                                           guard=self.guard, now_ms=link.now_ms)
        except SndefError as exc:
            self._nak(link, exc)
            return
        self._send(link, FrameType.AUTH2, m2)

    def _on_auth3(self, link: Link, frame: Frame) -> None:
        if self.auth is None or self.auth.phase is not Phase.CHALLENGE_RECEIVED:
            self._reject(link, AuthError("AUTH3 without a pending handshake"))
            self._send(link, FrameType.NAK, bytes([NakReason.NO_HANDSHAKE]))
            return
        try:
            _, seed = device_finish(self.auth, self.identity, frame.payload,
                                    guard=self.guard, now_ms=link.now_ms)
        except SndefError as exc:
            self._nak(link, exc)
            return
        self.session = open_session(seed, self.identity, self.suite, SessionMode.READ_WRITE)
        self.authenticated_count += 1
        link.event(self.name, "authenticated")

    def _on_data(self, link: Link, frame: Frame) -> None:
        try:
            message = self._open(frame)
        except SndefError as exc:
            self._nak(link, exc)
            return

        link.event(self.name, f"accepted {message.message_type.name} counter={message.counter}")
        if not self.mode_bound:
            self.mode_bound = True
            if message.message_type is not MessageType.UPDATE_CONFIG:
                restrict_to_read_only(self.session)

        if message.message_type is MessageType.READ_STATUS:
            self._send_message(link, MessageType.STATUS_DATA, self.device.read_status())
        elif message.message_type is MessageType.UPDATE_CONFIG:
            self._on_update(link, message)
        else:
            self._send_message(link, MessageType.ERROR, bytes([ConfigErrorCode.UNSUPPORTED_REQUEST]))

    def _on_update(self, link: Link, message: PlainMessage) -> None:
        if len(message.data) < CONFIG_KEY_LEN:
            self._send_message(link, MessageType.ERROR, bytes([ConfigErrorCode.MALFORMED_REQUEST]))
            return
        key = int.from_bytes(message.data[:CONFIG_KEY_LEN], "big")
        try:
            version = self.device.apply_config(key, message.data[CONFIG_KEY_LEN:])
        except (UnknownConfigKey, ValueTooLong, InvalidConfigValue) as exc:
            code = next(code for error_type, code in _CONFIG_ERRORS if isinstance(exc, error_type))
            link.event(self.name, f"config rejected: {type(exc).__name__}")
            self._send_message(link, MessageType.ERROR, bytes([code]))
            return
        self._send_message(link, MessageType.ACK, _VERSION.pack(version))
