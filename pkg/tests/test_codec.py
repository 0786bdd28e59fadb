"""
SNDEF record, plaintext and NDEF envelope codec tests
"""

import pytest

from sndef_bms.codec import (
    MAX_DATA_LEN,
    NDEF_PREFIX_LEN,
    PLAIN_HEADER_LEN,
    CipherSuiteId,
    MessageType,
    PlainMessage,
    SndefRecord,
    decode_plain,
    decode_record,
    encode_plain,
    encode_record,
    hexdump,
    record_from_wire,
    record_to_wire,
    unwrap_ndef,
    wrap_ndef,
)
from sndef_bms.errors import (
    CodecError,
    DataTooLong,
    DecodeError,
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
from tests.data.test_data import MALFORMED_PLAINTEXTS, MALFORMED_RECORDS


def _record(suite=CipherSuiteId.CBC_CMAC, payload_len=32):
    return SndefRecord(suite=suite, iv=bytes(range(16)), secret_payload=b"\xaa" * payload_len, tag=b"\x55" * 16)


@pytest.mark.unit
class TestRecordCodec:
    """Test the outer SNDEF record"""

    def test_encode_layout(self):
        """Test suite byte, IV, big-endian length, payload and tag positions"""
        encoded = encode_record(_record())

        assert encoded[0] == 0x01
        assert encoded[1:17] == bytes(range(16))
        assert encoded[17:19] == b"\x00\x20"
        assert encoded[19:51] == b"\xaa" * 32
        assert encoded[51:] == b"\x55" * 16
        assert len(encoded) == _record().wire_size == 67

    def test_decode_inverts_encode(self):
        """Test decode(encode(r)) == r for every suite"""
        for suite, size in ((CipherSuiteId.CBC_CMAC, 16), (CipherSuiteId.GCM, 11),
                            (CipherSuiteId.CCM, 193), (CipherSuiteId.EAX, 40)):
            record = _record(suite, size)
            assert decode_record(encode_record(record)) == record

    def test_truncated_header(self):
        """Test fewer than 19 bytes raise TruncatedRecord"""
        with pytest.raises(TruncatedRecord):
            decode_record(encode_record(_record())[:18])

    def test_unknown_suite(self):
        """Test suite byte 0x00 is rejected"""
        data = bytearray(encode_record(_record()))
        data[0] = 0x00
        with pytest.raises(UnknownSuite):
            decode_record(bytes(data))

    def test_length_mismatch(self):
        """Test declared payload length must match the bytes present"""
        with pytest.raises(LengthMismatch):
            decode_record(encode_record(_record()) + b"\x00")

    def test_cbc_payload_must_be_block_multiple(self):
        """Test CBC payloads of 17 bytes violate the record invariant"""
        with pytest.raises(InvalidRecord):
            encode_record(_record(CipherSuiteId.CBC_CMAC, 17))

    def test_aead_payload_bounds(self):
        """Test AEAD payloads below the plaintext header size are rejected"""
        with pytest.raises(InvalidRecord):
            encode_record(_record(CipherSuiteId.GCM, PLAIN_HEADER_LEN - 1))

    def test_bad_iv_and_tag_lengths(self):
        """Test IV and tag must be exactly 16 bytes"""
        with pytest.raises(InvalidRecord):
            encode_record(SndefRecord(CipherSuiteId.GCM, b"\x00" * 12, b"\x00" * 16, b"\x00" * 16))
        with pytest.raises(InvalidRecord):
            encode_record(SndefRecord(CipherSuiteId.GCM, b"\x00" * 16, b"\x00" * 16, b"\x00" * 8))

    def test_decoded_structural_violation_is_a_decode_error(self):
        """Test a 17-byte CBC payload with a consistent length field fails as a decode error"""
        data = bytes([CipherSuiteId.CBC_CMAC]) + bytes(16) + b"\x00\x11" + bytes(17) + bytes(16)
        with pytest.raises(MalformedRecord) as excinfo:
            decode_record(data)
        assert isinstance(excinfo.value, DecodeError)
        assert isinstance(excinfo.value, InvalidRecord)

    @pytest.mark.parametrize("data", MALFORMED_RECORDS)
    def test_malformed_records_raise_codec_errors(self, data):
        """Test malformed records fail with a typed codec error"""
        with pytest.raises(CodecError):
            decode_record(data)


@pytest.mark.unit
class TestPlainCodec:
    """Test the encrypted inner message"""

    def test_encode_layout(self):
        """Test the 11-byte header followed by data"""
        message = PlainMessage(message_id=7, message_type=MessageType.STATUS_DATA, counter=3, data=b"abc")
        encoded = encode_plain(message)

        assert encoded == b"\x00\x00\x00\x07" + b"\x02" + b"\x00\x00\x00\x03" + b"\x00\x03" + b"abc"
        assert decode_plain(encoded) == message

    @pytest.mark.parametrize("length", [0, 1, 181, 182])
    def test_data_lengths_within_limit(self, length):
        """Test data lengths up to 182 bytes encode and decode"""
        message = PlainMessage(1, MessageType.STATUS_DATA, 1, b"\x42" * length)
        encoded = encode_plain(message)

        assert len(encoded) == PLAIN_HEADER_LEN + length
        assert decode_plain(encoded).data == message.data

    def test_data_too_long_on_encode(self):
        """Test 183 bytes of data are rejected when encoding"""
        with pytest.raises(DataTooLong):
            encode_plain(PlainMessage(1, MessageType.STATUS_DATA, 1, b"\x00" * (MAX_DATA_LEN + 1)))

    def test_data_too_long_on_decode(self):
        """Test a declared length of 183 is rejected when decoding"""
        encoded = b"\x00\x00\x00\x01" + b"\x02" + b"\x00\x00\x00\x01" + b"\x00\xb7" + b"\x00" * 183
        with pytest.raises(DataTooLong):
            decode_plain(encoded)
        with pytest.raises(DecodeError):
            decode_plain(encoded)

    def test_zero_counter(self):
        """Test counter 0 is reserved"""
        with pytest.raises(ZeroCounter):
            encode_plain(PlainMessage(1, MessageType.READ_STATUS, 0))
        with pytest.raises(ZeroCounter):
            decode_plain(b"\x00\x00\x00\x01" + b"\x01" + b"\x00\x00\x00\x00" + b"\x00\x00")

    def test_unknown_message_type(self):
        """Test message type 0x06 is rejected"""
        with pytest.raises(UnknownMessageType):
            decode_plain(b"\x00\x00\x00\x01" + b"\x06" + b"\x00\x00\x00\x01" + b"\x00\x00")

    def test_truncated_header(self):
        """Test fewer than 11 bytes raise TruncatedPayload"""
        with pytest.raises(TruncatedPayload):
            decode_plain(b"\x00" * 10)

    @pytest.mark.parametrize("data", MALFORMED_PLAINTEXTS)
    def test_malformed_plaintexts_raise_codec_errors(self, data):
        """Test malformed plaintexts fail with a typed codec error"""
        with pytest.raises(CodecError):
            decode_plain(data)


@pytest.mark.unit
class TestNdefEnvelope:
    """Test the single short NDEF record around each SNDEF record"""

    def test_wrap_prefix(self):
        """Test header flags, type length, payload length and type name"""
        wrapped = wrap_ndef(b"\x01\x02\x03")

        assert wrapped[:NDEF_PREFIX_LEN] == b"\xd4\x05\x03sndef"
        assert unwrap_ndef(wrapped) == b"\x01\x02\x03"

    def test_wire_round_trip(self):
        """Test record_from_wire inverts record_to_wire"""
        record = _record(CipherSuiteId.EAX, 20)
        assert record_from_wire(record_to_wire(record)) == record

    @pytest.mark.parametrize("data", [
        b"",
        b"\xd4\x05",
        b"\x94\x05\x01sndef\x00",
        b"\xd4\x04\x01sndf\x00",
        b"\xd4\x05\x02sndef\x00",
    ])
    def test_invalid_envelopes(self, data):
        """Test chunked, mistyped and mis-sized envelopes are rejected"""
        with pytest.raises(InvalidEnvelope):
            unwrap_ndef(data)

    def test_hexdump_lists_offsets(self):
        """Test the debug hexdump shows offsets and hex bytes"""
        dump = hexdump(bytes(range(20)))
        assert dump.splitlines()[0].startswith("0000")
        assert "13" in dump.splitlines()[1]
