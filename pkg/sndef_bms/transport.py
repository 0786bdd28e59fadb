"""
Discrete-event NFC link between a reader and a tag endpoint

Frames pass through an ordered adversary pipeline and are delivered after a
fixed simulated latency. Every frame, adversary action and endpoint event
lands in an ordered audit log.
"""

import heapq
import itertools
import json
import logging
import random
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Optional, Protocol, Union

from .codec import NDEF_PREFIX_LEN, CipherSuiteId
from .errors import EndpointUnpowered, FrameTooLarge, LivelockDetected

LOGGER = logging.getLogger(__name__)

MAX_FRAME_PAYLOAD = 256
DEFAULT_MAX_EVENTS = 10_000


class FrameType(Enum):
    AUTH1 = "AUTH1"
    AUTH2 = "AUTH2"
    AUTH3 = "AUTH3"
    DATA = "DATA"
    NAK = "NAK"


@dataclass(frozen=True)
class Frame:
    frame_type: FrameType
    payload: bytes
    timestamp: int = 0


@dataclass(frozen=True)
class AuditEntry:
    tick: int
    direction: Optional[str]
    frame_type: Optional[str]
    payload_hex: Optional[str]
    adversary_action: Optional[str]
    endpoint_event: Optional[str]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class Endpoint(Protocol):
    name: str

    def is_powered(self, now_ms: int) -> bool: ...

    def on_frame(self, link: "Link", frame: Frame) -> None: ...

    def on_field(self, link: "Link", on: bool) -> None: ...


# Adversaries

class AdversaryKind(Enum):
    NONE = "none"
    EAVESDROP = "eavesdrop"
    TAMPER_BIT = "tamper-bit"
    REPLAY = "replay"
    DOWNGRADE = "downgrade"
    DROP = "drop"
    REFLECT = "reflect"


@dataclass(frozen=True)
class AdversaryConfig:
    kind: AdversaryKind = AdversaryKind.NONE
    params: dict = field(default_factory=dict)


class Adversary:
    kind = AdversaryKind.NONE

    def process(self, link: "Link", direction: str, frame: Frame) -> tuple[list[Frame], Optional[str]]:
        return [frame], None


class Eavesdropper(Adversary):
    """Passive listener; keeps a copy of every frame it sees"""

    kind = AdversaryKind.EAVESDROP

    def __init__(self):
        self.captured: list[Frame] = []

    def process(self, link, direction, frame):
        self.captured.append(frame)
        return [frame], "capture"

    def captured_bytes(self, exclude: Iterable[FrameType] = (FrameType.AUTH1,)) -> list[bytes]:
        excluded = set(exclude)
        return [frame.payload for frame in self.captured if frame.frame_type not in excluded]


class BitTamperer(Adversary):
    """Flips one bit of the n-th matching frame.

    For DATA frames the offset counts from the start of the SNDEF record,
    past the NDEF envelope.
    """

    kind = AdversaryKind.TAMPER_BIT

    def __init__(self, bit_offset: int, frame_index: int = 1, frame_type: FrameType = FrameType.DATA):
        self.bit_offset = bit_offset
        self.frame_index = frame_index
        self.frame_type = frame_type
        self._seen = 0

    def process(self, link, direction, frame):
        if frame.frame_type is not self.frame_type:
            return [frame], None
        self._seen += 1
        if self._seen != self.frame_index:
            return [frame], None

        base = NDEF_PREFIX_LEN if frame.frame_type is FrameType.DATA else 0
        byte_index = base + self.bit_offset // 8
        if byte_index >= len(frame.payload):
            return [frame], f"tamper-bit {self.bit_offset} out of range"
        payload = bytearray(frame.payload)
        payload[byte_index] ^= 0x80 >> (self.bit_offset % 8)
        return [replace(frame, payload=bytes(payload))], f"tamper-bit {self.bit_offset}"


class Replayer(Adversary):
    """Re-injects the n-th DATA frame of the link after the original"""

    kind = AdversaryKind.REPLAY

    def __init__(self, frame_index: int = 3, copies: int = 1):
        self.frame_index = frame_index
        self.copies = copies
        self._seen = 0

    def process(self, link, direction, frame):
        if frame.frame_type is not FrameType.DATA:
            return [frame], None
        self._seen += 1
        if self._seen != self.frame_index:
            return [frame], None
        return [frame] + [frame] * self.copies, f"replay DATA #{self.frame_index} x{self.copies}"


class Downgrader(Adversary):
    """Rewrites the cipher suite byte of every DATA frame"""

    kind = AdversaryKind.DOWNGRADE

    def __init__(self, target_suite: CipherSuiteId = CipherSuiteId.CBC_CMAC):
        self.target_suite = CipherSuiteId(target_suite)

    def process(self, link, direction, frame):
        if frame.frame_type is not FrameType.DATA or len(frame.payload) <= NDEF_PREFIX_LEN:
            return [frame], None
        payload = bytearray(frame.payload)
        original = payload[NDEF_PREFIX_LEN]
        if original == self.target_suite:
            return [frame], None
        payload[NDEF_PREFIX_LEN] = int(self.target_suite)
        return [replace(frame, payload=bytes(payload))], f"downgrade 0x{original:02x}->0x{int(self.target_suite):02x}"


class Dropper(Adversary):
    kind = AdversaryKind.DROP

    def __init__(self, probability: float = 1.0):
        if not 0.0 <= probability <= 1.0:
            raise ValueError("Drop probability must be within 0..1")
        self.probability = probability

    def process(self, link, direction, frame):
        if link.random.random() < self.probability:
            return [], "drop"
        return [frame], None


class Reflector(Adversary):
    """Replaces AUTH3 with the AUTH2 it saw earlier"""

    kind = AdversaryKind.REFLECT

    def __init__(self):
        self._m2: Optional[bytes] = None

    def process(self, link, direction, frame):
        if frame.frame_type is FrameType.AUTH2:
            self._m2 = frame.payload
        elif frame.frame_type is FrameType.AUTH3 and self._m2 is not None:
            return [replace(frame, payload=self._m2)], "reflect AUTH2 as AUTH3"
        return [frame], None


def build_adversary(config: AdversaryConfig) -> Optional[Adversary]:
    params = dict(config.params)
    kind = AdversaryKind(config.kind)
    if kind is AdversaryKind.NONE:
        return None
    if kind is AdversaryKind.EAVESDROP:
        return Eavesdropper()
    if kind is AdversaryKind.TAMPER_BIT:
        frame_type = params.get("frame_type", FrameType.DATA)
        return BitTamperer(
            bit_offset=int(params.get("bit_offset", 37)),
            frame_index=int(params.get("frame_index", 1)),
            frame_type=FrameType(frame_type),
        )
    if kind is AdversaryKind.REPLAY:
        return Replayer(frame_index=int(params.get("frame_index", 3)), copies=int(params.get("copies", 1)))
    if kind is AdversaryKind.DOWNGRADE:
        return Downgrader(CipherSuiteId(params.get("target_suite", CipherSuiteId.CBC_CMAC)))
    if kind is AdversaryKind.DROP:
        return Dropper(float(params.get("probability", 1.0)))
    return Reflector()


# Link

@dataclass(order=True)
class _Event:
    tick: int
    seq: int
    action: Callable[[], None] = field(compare=False)


class Link:
    """Single-threaded event loop joining one reader and one device endpoint"""

    def __init__(self, latency_ms: int = 0, adversaries: Optional[list[Adversary]] = None,
                 seed: int = 0, max_events: int = DEFAULT_MAX_EVENTS):
        if latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")
        self.latency_ms = int(latency_ms)
        self.adversaries = list(adversaries or [])
        self.random = random.Random(seed)
        self.max_events = max_events
        self.now_ms = 0
        self.field_on = False
        self.audit_log: list[AuditEntry] = []
        self.endpoints: dict[str, Endpoint] = {}
        self._queue: list[_Event] = []
        self._seq = itertools.count()
        self._epoch = 0

    # Wiring

    def attach(self, reader: Endpoint, device: Endpoint) -> None:
        self.endpoints = {reader.name: reader, device.name: device}

    def peer_of(self, name: str) -> Endpoint:
        for endpoint_name, endpoint in self.endpoints.items():
            if endpoint_name != name:
                return endpoint
        raise KeyError(f"No peer for endpoint '{name}'")

    def adversary(self, kind: AdversaryKind) -> Optional[Adversary]:
        for adversary in self.adversaries:
            if adversary.kind is kind:
                return adversary
        return None

    # Event queue

    def schedule(self, delay_ms: int, action: Callable[[], None]) -> None:
        heapq.heappush(self._queue, _Event(self.now_ms + int(delay_ms), next(self._seq), action))

    def record(self, *, direction: Optional[str] = None, frame: Optional[Frame] = None,
               adversary_action: Optional[str] = None, endpoint_event: Optional[str] = None) -> None:
        self.audit_log.append(AuditEntry(
            tick=self.now_ms,
            direction=direction,
            frame_type=frame.frame_type.value if frame else None,
            payload_hex=frame.payload.hex() if frame else None,
            adversary_action=adversary_action,
            endpoint_event=endpoint_event,
        ))

    def event(self, endpoint: str, message: str) -> None:
        LOGGER.debug("t=%d %s: %s", self.now_ms, endpoint, message)
        self.record(direction=endpoint, endpoint_event=message)

    # Operations

    def transmit(self, sender: str, frame_type: FrameType, payload: bytes) -> None:
        if len(payload) > MAX_FRAME_PAYLOAD:
            raise FrameTooLarge(f"{frame_type.value} payload is {len(payload)} bytes")
        if not self.endpoints[sender].is_powered(self.now_ms):
            raise EndpointUnpowered(f"{sender} is not powered")

        receiver = self.peer_of(sender).name
        direction = f"{sender}->{receiver}"
        frame = Frame(frame_type=frame_type, payload=bytes(payload), timestamp=self.now_ms)
        self.record(direction=direction, frame=frame, endpoint_event="sent")

        frames = [frame]
        for adversary in self.adversaries:
            passed = []
            for item in frames:
                out, action = adversary.process(self, direction, item)
                if action:
                    self.record(direction=direction, frame=item, adversary_action=action)
                passed.extend(out)
            frames = passed

        epoch = self._epoch
        for item in frames:
            self.schedule(self.latency_ms, lambda item=item: self._deliver(receiver, direction, item, epoch))

    def _deliver(self, receiver: str, direction: str, frame: Frame, epoch: int) -> None:
        if epoch != self._epoch:
            self.record(direction=direction, frame=frame, endpoint_event="lost: field off")
            return
        if not self.field_on:
            self.record(direction=direction, frame=frame, endpoint_event="lost: no field")
            return
        endpoint = self.endpoints[receiver]
        if not endpoint.is_powered(self.now_ms):
            self.record(direction=direction, frame=frame, endpoint_event="ignored: unpowered")
            return
        self.record(direction=direction, frame=frame, endpoint_event="delivered")
        endpoint.on_frame(self, frame)

    def field_set(self, on: bool) -> None:
        if on == self.field_on:
            return
        self.field_on = on
        if not on:
            self._epoch += 1
        self.record(direction="reader", endpoint_event="field on" if on else "field off")
        for endpoint in self.endpoints.values():
            endpoint.on_field(self, on)

    def run_until_idle(self) -> list[AuditEntry]:
        processed = 0
        while self._queue:
            processed += 1
            if processed > self.max_events:
                raise LivelockDetected(f"More than {self.max_events} events processed")
            event = heapq.heappop(self._queue)
            self.now_ms = event.tick
            event.action()
        return self.audit_log

    def audit_jsonl(self) -> str:
        return "".join(entry.to_json() + "\n" for entry in self.audit_log)


def link_create(latency_ms: int = 0,
                adversary: Union[AdversaryConfig, list[AdversaryConfig], None] = None,
                seed: int = 0, max_events: int = DEFAULT_MAX_EVENTS) -> Link:
    if latency_ms < 0:
        raise ValueError("latency_ms must be >= 0")
    configs = adversary if isinstance(adversary, list) else [adversary] if adversary else []
    adversaries = [built for built in (build_adversary(config) for config in configs) if built]
    return Link(latency_ms=latency_ms, adversaries=adversaries, seed=seed, max_events=max_events)


def plaintext_leak_scan(captured: Iterable[bytes], plaintext: bytes, window: int = 4) -> list[tuple[int, int]]:
    """(capture index, offset) of every window of the plaintext found in captured bytes"""
    windows = {bytes(plaintext[i:i + window]) for i in range(len(plaintext) - window + 1)}
    hits = []
    for index, blob in enumerate(captured):
        for offset in range(len(blob) - window + 1):
            if blob[offset:offset + window] in windows:
                hits.append((index, offset))
    return hits
