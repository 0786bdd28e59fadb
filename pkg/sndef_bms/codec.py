"""
SNDEF record and plaintext payload codec

Record layout:    [suite:1][iv:16][payload_len:2 BE][secret_payload:N][tag:16]
Plaintext layout: [message_id:4 BE][message_type:1][counter:4 BE][data_len:2 BE][data:N]
"""

import struct
from dataclasses import dataclass
from enum import IntEnum

from .errors import (
    DataTooLong,
    DeclaredDataTooLong,
    InvalidEnvelope,
    InvalidRecord,
    LengthMismatch,
    MalformedRecord,
    TruncatedPayload,
    TruncatedRecord,
    UnknownMessageType,
    UnknownSuite,
    ZeroCounter,
)

IV_LEN = 16
TAG_LEN = 16
BLOCK_LEN = 16
MAX_DATA_LEN = 182
MAX_RECORD_LEN = 256

RECORD_HEADER = struct.Struct(">B16sH")
PLAIN_HEADER = struct.Struct(">IBIH")
PLAIN_HEADER_LEN = PLAIN_HEADER.size  # 11

MAX_PLAIN_LEN = PLAIN_HEADER_LEN + MAX_DATA_LEN  # 193
MAX_CBC_PAYLOAD_LEN = (MAX_PLAIN_LEN // BLOCK_LEN + 1) * BLOCK_LEN  # 208

UINT32_MAX = 0xFFFFFFFF

# Short NDEF record: MB | ME | SR, TNF = external type
NDEF_HEADER_FLAGS = 0xD4
NDEF_TYPE = b"sndef"
NDEF_PREFIX_LEN = 3 + len(NDEF_TYPE)


class CipherSuiteId(IntEnum):
    CBC_CMAC = 0x01
    GCM = 0x02
    CCM = 0x03
    EAX = 0x04

    @property
    def is_aead(self) -> bool:
        return self is not CipherSuiteId.CBC_CMAC

    @property
    def cli_name(self) -> str:
        return SUITE_CLI_NAMES[self]

    @classmethod
    def from_cli_name(cls, name: str) -> "CipherSuiteId":
        for suite, cli_name in SUITE_CLI_NAMES.items():
            if cli_name == name:
                return suite
        raise ValueError(f"Unknown cipher suite name: {name}")


SUITE_CLI_NAMES = {
    CipherSuiteId.CBC_CMAC: "cbc-cmac",
    CipherSuiteId.GCM: "gcm",
    CipherSuiteId.CCM: "ccm",
    CipherSuiteId.EAX: "eax",
}


class MessageType(IntEnum):
    READ_STATUS = 0x01
    STATUS_DATA = 0x02
    UPDATE_CONFIG = 0x03
    ACK = 0x04
    ERROR = 0x05


@dataclass(frozen=True)
class SndefRecord:
    """One secure NDEF record as it travels on the wire"""

    suite: CipherSuiteId
    iv: bytes
    secret_payload: bytes
    tag: bytes

    def validate(self) -> None:
        if self.suite not in CipherSuiteId._value2member_map_:
            raise InvalidRecord(f"Unknown cipher suite 0x{int(self.suite):02x}")
        if len(self.iv) != IV_LEN:
            raise InvalidRecord(f"IV must be {IV_LEN} bytes, got {len(self.iv)}")
        if len(self.tag) != TAG_LEN:
            raise InvalidRecord(f"Tag must be {TAG_LEN} bytes, got {len(self.tag)}")

        size = len(self.secret_payload)
        if CipherSuiteId(self.suite).is_aead:
            if not PLAIN_HEADER_LEN <= size <= MAX_PLAIN_LEN:
                raise InvalidRecord(
                    f"AEAD payload must be {PLAIN_HEADER_LEN}..{MAX_PLAIN_LEN} bytes, got {size}"
                )
        elif size == 0 or size % BLOCK_LEN or size > MAX_CBC_PAYLOAD_LEN:
            raise InvalidRecord(
                f"CBC payload must be a positive multiple of {BLOCK_LEN} up to "
                f"{MAX_CBC_PAYLOAD_LEN} bytes, got {size}"
            )

    @property
    def wire_size(self) -> int:
        return RECORD_HEADER.size + len(self.secret_payload) + TAG_LEN


@dataclass(frozen=True)
class PlainMessage:
    """Decrypted content of an SNDEF secret payload"""

    message_id: int
    message_type: MessageType
    counter: int
    data: bytes = b""

    def validate(self) -> None:
        if not 0 <= self.message_id <= UINT32_MAX:
            raise InvalidRecord(f"message_id out of range: {self.message_id}")
        if self.message_type not in MessageType._value2member_map_:
            raise UnknownMessageType(f"Unknown message type {self.message_type!r}")
        if self.counter == 0:
            raise ZeroCounter("Counter 0 is reserved")
        if not 0 < self.counter <= UINT32_MAX:
            raise InvalidRecord(f"counter out of range: {self.counter}")
        if len(self.data) > MAX_DATA_LEN:
            raise DataTooLong(f"Data is {len(self.data)} bytes, limit is {MAX_DATA_LEN}")


def encode_record(rec: SndefRecord) -> bytes:
    rec.validate()
    encoded = (
        RECORD_HEADER.pack(int(rec.suite), rec.iv, len(rec.secret_payload))
        + rec.secret_payload
        + rec.tag
    )
    if len(encoded) > MAX_RECORD_LEN:
        raise InvalidRecord(f"Encoded record is {len(encoded)} bytes")
    return encoded


def decode_record(data: bytes) -> SndefRecord:
    data = bytes(data)
    if len(data) < RECORD_HEADER.size:
        raise TruncatedRecord(f"Record header needs {RECORD_HEADER.size} bytes, got {len(data)}")

    suite_code, iv, payload_len = RECORD_HEADER.unpack_from(data)
    if suite_code not in CipherSuiteId._value2member_map_:
        raise UnknownSuite(f"Unknown cipher suite 0x{suite_code:02x}")

    remaining = len(data) - RECORD_HEADER.size
    if remaining != payload_len + TAG_LEN:
        raise LengthMismatch(
            f"payload_len {payload_len} + tag needs {payload_len + TAG_LEN} bytes, {remaining} remain"
        )

    start = RECORD_HEADER.size
    record = SndefRecord(
        suite=CipherSuiteId(suite_code),
        iv=iv,
        secret_payload=data[start:start + payload_len],
        tag=data[start + payload_len:],
    )
    try:
        record.validate()
    except InvalidRecord as exc:
        raise MalformedRecord(str(exc)) from exc
    return record


def encode_plain(msg: PlainMessage) -> bytes:
    msg.validate()
    return PLAIN_HEADER.pack(msg.message_id, int(msg.message_type), msg.counter, len(msg.data)) + msg.data


def decode_plain(data: bytes) -> PlainMessage:
    data = bytes(data)
    if len(data) < PLAIN_HEADER_LEN:
        raise TruncatedPayload(f"Plain header needs {PLAIN_HEADER_LEN} bytes, got {len(data)}")

    message_id, type_code, counter, data_len = PLAIN_HEADER.unpack_from(data)
    if type_code not in MessageType._value2member_map_:
        raise UnknownMessageType(f"Unknown message type 0x{type_code:02x}")
    if counter == 0:
        raise ZeroCounter("Counter 0 is reserved")
    if data_len > MAX_DATA_LEN:
        raise DeclaredDataTooLong(f"Declared data length {data_len} exceeds {MAX_DATA_LEN}")
    if len(data) - PLAIN_HEADER_LEN != data_len:
        raise LengthMismatch(
            f"data_len {data_len} but {len(data) - PLAIN_HEADER_LEN} bytes follow the header"
        )

    return PlainMessage(
        message_id=message_id,
        message_type=MessageType(type_code),
        counter=counter,
        data=data[PLAIN_HEADER_LEN:],
    )


def wrap_ndef(record_bytes: bytes) -> bytes:
    """Wrap an encoded SNDEF record in a single short NDEF external record"""
    if len(record_bytes) > 0xFF:
        raise InvalidRecord("Short NDEF records carry at most 255 payload bytes")
    return bytes([NDEF_HEADER_FLAGS, len(NDEF_TYPE), len(record_bytes)]) + NDEF_TYPE + record_bytes


def unwrap_ndef(data: bytes) -> bytes:
    data = bytes(data)
    if len(data) < NDEF_PREFIX_LEN:
        raise InvalidEnvelope(f"NDEF envelope needs {NDEF_PREFIX_LEN} bytes, got {len(data)}")

    flags, type_len, payload_len = data[0], data[1], data[2]
    if flags != NDEF_HEADER_FLAGS:
        raise InvalidEnvelope(f"Unsupported NDEF header 0x{flags:02x}")
    if type_len != len(NDEF_TYPE) or data[3:3 + type_len] != NDEF_TYPE:
        raise InvalidEnvelope("NDEF type is not 'sndef'")
    if len(data) - NDEF_PREFIX_LEN != payload_len:
        raise InvalidEnvelope(
            f"NDEF payload length {payload_len}, {len(data) - NDEF_PREFIX_LEN} bytes present"
        )
    return data[NDEF_PREFIX_LEN:]


def record_to_wire(rec: SndefRecord) -> bytes:
    return wrap_ndef(encode_record(rec))


def record_from_wire(data: bytes) -> SndefRecord:
    return decode_record(unwrap_ndef(data))


def hexdump(data: bytes, width: int = 16) -> str:
    lines = []
    for offset in range(0, len(data), width):
        chunk = bytes(data[offset:offset + width])
        lines.append(f"{offset:04x}  {chunk.hex(' ')}")
    return "\n".join(lines)
