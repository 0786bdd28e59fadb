"""
Error handling and edge case tests: decoders and endpoints never crash on bad input
"""

import random

import pytest

from sndef_bms.codec import (
    CipherSuiteId,
    MessageType,
    decode_plain,
    decode_record,
    record_to_wire,
    unwrap_ndef,
    wrap_ndef,
)
from sndef_bms.crypto import SeededEntropy
from sndef_bms.device import parse_status
from sndef_bms.endpoints import DeviceEndpoint, NakReason, ReaderEndpoint, nak_reason_for
from sndef_bms.errors import (
    CodecError,
    CryptoError,
    DecodeError,
    FixtureError,
    ReplayDetected,
    SndefError,
    StatusFormatError,
    SuiteMismatch,
    TagMismatch,
)
from sndef_bms.fixtures import parse_identity_fixture, parse_pack_fixture
from sndef_bms.session import seal_message
from sndef_bms.transport import FrameType, Link


@pytest.mark.unit
class TestErrorHierarchy:
    """Test the exception tree and NAK mapping"""

    def test_everything_is_an_sndef_error(self):
        """Test domain errors share one base class"""
        for error_type in (CodecError, CryptoError, FixtureError, ReplayDetected, StatusFormatError):
            assert issubclass(error_type, SndefError)

    def test_nak_reason_prefers_specific_errors(self):
        """Test a SuiteMismatch is reported as such, not as a tag failure"""
        assert nak_reason_for(SuiteMismatch("x")) is NakReason.SUITE_MISMATCH
        assert nak_reason_for(TagMismatch("x")) is NakReason.TAG_MISMATCH
        assert nak_reason_for(RuntimeError("x")) is NakReason.UNEXPECTED
        assert NakReason.LOCKED_OUT.is_auth and not NakReason.REPLAY.is_auth


@pytest.mark.unit
@pytest.mark.slow
class TestDecoderTotality:
    """Inputs up to 4096 bytes raise typed decode errors, never anything else"""

    MAX_FUZZ_LEN = 4096

    def _near_valid_record(self, source):
        payload_len = source.choice([source.randrange(0, 240), source.randrange(0, self.MAX_FUZZ_LEN - 35 + 1)])
        suite = source.choice(list(CipherSuiteId))
        declared = payload_len + source.choice([0, 0, 0, -1, 1])
        return (bytes([suite]) + source.randbytes(16) + (declared & 0xFFFF).to_bytes(2, "big")
                + source.randbytes(payload_len) + source.randbytes(16))

    def _near_valid_plain(self, source):
        data_len = source.choice([source.randrange(0, 200), source.randrange(0, self.MAX_FUZZ_LEN - 11 + 1)])
        message_type = source.choice(list(MessageType))
        counter = source.choice([0, 1, source.randrange(1, 2 ** 32)])
        declared = source.choice([data_len, data_len, data_len + 1, source.randrange(0, 200)])
        return (source.randbytes(4) + bytes([message_type]) + counter.to_bytes(4, "big")
                + (declared & 0xFFFF).to_bytes(2, "big") + source.randbytes(data_len))

    def test_record_decoder(self):
        """Test decode_record on random and near-valid input"""
        source = random.Random(1)
        outcomes = {"decoded": 0, "rejected": 0}
        for index in range(4000):
            if index % 2:
                data = self._near_valid_record(source)
            else:
                data = source.randbytes(source.randrange(0, self.MAX_FUZZ_LEN + 1))
            assert len(data) <= self.MAX_FUZZ_LEN
            try:
                decode_record(data)
                outcomes["decoded"] += 1
            except DecodeError:
                outcomes["rejected"] += 1

        assert outcomes["decoded"] > 0
        assert outcomes["rejected"] > 0

    def test_plain_decoder(self):
        """Test decode_plain on random and near-valid input"""
        source = random.Random(2)
        outcomes = {"decoded": 0, "rejected": 0}
        for index in range(4000):
            if index % 2:
                data = self._near_valid_plain(source)
            else:
                data = source.randbytes(source.randrange(0, self.MAX_FUZZ_LEN + 1))
            assert len(data) <= self.MAX_FUZZ_LEN
            try:
                decode_plain(data)
                outcomes["decoded"] += 1
            except DecodeError:
                outcomes["rejected"] += 1

        assert outcomes["decoded"] > 0
        assert outcomes["rejected"] > 0

    def test_envelope_decoder(self):
        """Test unwrap_ndef on random and near-valid input"""
        source = random.Random(3)
        for _ in range(2000):
            data = source.randbytes(source.randrange(0, self.MAX_FUZZ_LEN + 1))
            if source.random() < 0.5:
                inner = source.randbytes(source.randrange(0, 256))
                data = wrap_ndef(inner)[:source.randrange(0, len(inner) + 9)]
            try:
                unwrap_ndef(data)
            except DecodeError:
                pass

    def test_status_parser(self):
        """Test parse_status on random input"""
        source = random.Random(4)
        for _ in range(3000):
            data = source.randbytes(source.randrange(0, 60))
            try:
                parse_status(data)
            except StatusFormatError:
                pass


@pytest.mark.unit
class TestFixtureErrors:
    """Malformed fixture text"""

    @pytest.mark.parametrize("invalid_type", [
        "missing_field", "unknown_key", "too_few_cells", "bad_scenario", "not_a_number", "no_equals",
    ])
    def test_invalid_pack_fixtures(self, pack_factory, invalid_type):
        """Test each malformed pack fixture raises FixtureError"""
        with pytest.raises(FixtureError):
            parse_pack_fixture(pack_factory.create_invalid(invalid_type))

    def test_factory_fixture_parses(self, pack_factory):
        """Test generated fixture text round-trips through the parser"""
        state = pack_factory.create_state()
        parsed = parse_pack_fixture(pack_factory.fixture_text(state))
        assert parsed.pack.cell_voltages == state.cell_voltages
        assert parsed.wake_latency_ms is None

    def test_duplicate_key(self):
        """Test repeated keys are rejected"""
        with pytest.raises(FixtureError):
            parse_identity_fixture("serial = 0102030405060708\nserial = 0102030405060708\n")

    @pytest.mark.parametrize("text", [
        "master_key = 2b7e151628aed2a6abf7158809cf4f3c\n",
        "serial = 01020304\nmaster_key = 2b7e151628aed2a6abf7158809cf4f3c\n",
        "serial = 0102030405060708\nmaster_key = xyz\n",
        "serial = 0102030405060708\nmaster_key = 2b7e15\n",
    ])
    def test_invalid_identity_fixtures(self, text):
        """Test missing, short or non-hex identity values are rejected"""
        with pytest.raises(FixtureError):
            parse_identity_fixture(text)

    def test_fixture_wake_latency_wins(self, pack_factory):
        """Test a fixture's wake latency overrides the configured default"""
        fixture = parse_pack_fixture(pack_factory.fixture_text(wake_latency_ms=7))
        assert fixture.build_device(default_wake_latency_ms=50).power.wake_latency_ms == 7
        assert parse_pack_fixture(pack_factory.fixture_text()).build_device(
            default_wake_latency_ms=50).power.wake_latency_ms == 50


@pytest.mark.security
class TestEndpointRobustness:
    """Garbage frames produce rejections and NAKs, not crashes"""

    def _device_link(self, default_pack, identity):
        entropy = SeededEntropy(12)
        device_endpoint = DeviceEndpoint(default_pack.build_device(), identity, CipherSuiteId.GCM,
                                         entropy.fork("device"))
        reader = ReaderEndpoint(identity, CipherSuiteId.GCM, entropy.fork("reader"))
        link = Link(latency_ms=1)
        link.attach(reader, device_endpoint)
        link.field_set(True)
        return link, reader, device_endpoint

    def test_random_frames_to_device(self, default_pack, identity):
        """Test random AUTH1, AUTH3 and DATA payloads never authenticate or crash the device"""
        link, _, device_endpoint = self._device_link(default_pack, identity)
        source = random.Random(5)
        frame_types = [FrameType.AUTH1, FrameType.AUTH3, FrameType.DATA]
        for _ in range(300):
            link.transmit("reader", source.choice(frame_types), source.randbytes(source.randrange(0, 80)))
        link.run_until_idle()

        assert device_endpoint.authenticated_count == 0
        assert device_endpoint.accepted == []
        assert device_endpoint.rejections

    def test_data_before_handshake(self, default_pack, identity):
        """Test DATA without a session is answered with NO_SESSION"""
        link, _, device_endpoint = self._device_link(default_pack, identity)
        link.transmit("reader", FrameType.DATA, wrap_ndef(b"\x02" + bytes(60)))
        link.run_until_idle()

        naks = [entry for entry in link.audit_log if entry.frame_type == "NAK" and entry.endpoint_event == "sent"]
        assert naks and naks[0].payload_hex == f"{NakReason.NO_SESSION:02x}"

    def test_auth3_without_auth1(self, default_pack, identity):
        """Test a stray AUTH3 is answered with NO_HANDSHAKE"""
        link, _, _ = self._device_link(default_pack, identity)
        link.transmit("reader", FrameType.AUTH3, bytes(32))
        link.run_until_idle()

        naks = [entry for entry in link.audit_log if entry.frame_type == "NAK" and entry.endpoint_event == "sent"]
        assert naks[0].payload_hex == f"{NakReason.NO_HANDSHAKE:02x}"

    def test_unsupported_request_type(self, default_pack, identity, test_helpers):
        """Test a sealed ACK sent to the device gets an ERROR reply"""
        link, _, device_endpoint = self._device_link(default_pack, identity)
        reader_session, device_session = test_helpers.session_pair(identity, CipherSuiteId.GCM, seed=3)
        device_endpoint.session = device_session
        record = seal_message(reader_session, MessageType.ACK, b"\x00\x00\x00\x01", SeededEntropy(1))
        link.transmit("reader", FrameType.DATA, record_to_wire(record))
        link.run_until_idle()

        sent = [entry for entry in link.audit_log if entry.endpoint_event == "sent"]
        assert [entry.direction for entry in sent] == ["reader->device", "device->reader"]
        assert device_endpoint.accepted[-1].message_type is MessageType.ACK
        assert "ignored DATA without a pending request" in [entry.endpoint_event for entry in link.audit_log]
