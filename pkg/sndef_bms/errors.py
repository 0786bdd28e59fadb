"""
Exception hierarchy for the secure NFC readout stack
"""


class SndefError(Exception):
    """Base class for every error raised by sndef_bms"""


# Codec

class CodecError(SndefError):
    """Wire format could not be produced or parsed"""


class InvalidRecord(CodecError):
    """SNDEF record violates a structural invariant"""


class DataTooLong(CodecError):
    """Application data exceeds the 182-byte limit"""


class DecodeError(CodecError):
    """Inbound bytes could not be parsed"""


class TruncatedRecord(DecodeError):
    pass


class UnknownSuite(DecodeError):
    pass


class LengthMismatch(DecodeError):
    pass


class TruncatedPayload(DecodeError):
    pass


class UnknownMessageType(DecodeError):
    pass


class ZeroCounter(DecodeError):
    pass


class MalformedRecord(DecodeError, InvalidRecord):
    """Decoded record bytes violate a structural invariant"""


class DeclaredDataTooLong(DecodeError, DataTooLong):
    """Decoded payload declares more than 182 bytes of data"""


class InvalidEnvelope(DecodeError):
    """NDEF envelope is not a single short 'sndef' external record"""


class StatusFormatError(DecodeError):
    """Status payload does not follow the telemetry layout"""


# Crypto

class CryptoError(SndefError):
    pass


class EntropyUnavailable(CryptoError):
    pass


class InvalidNonce(CryptoError):
    pass


class DegenerateKeys(CryptoError):
    pass


class InvalidKeyMaterial(CryptoError):
    pass


class InvalidLength(CryptoError):
    pass


class TagMismatch(CryptoError):
    """Integrity check failed; nothing was decrypted"""


class SuiteMismatch(TagMismatch):
    """Record carries a suite byte other than the session's.

    The suite byte is covered by the tag, so a relabelled record can never
    verify and is reported as a tag failure.
    """


class PaddingInvalid(CryptoError):
    pass


# Authentication

class AuthError(SndefError):
    pass


class MalformedMessage(AuthError):
    pass


class ChallengeMismatch(AuthError):
    pass


class ReflectionDetected(AuthError):
    pass


class LockedOut(AuthError):
    pass


class InvalidPhase(AuthError):
    pass


# Session channel

class ChannelError(SndefError):
    pass


class SessionClosed(ChannelError):
    pass


class WriteNotPermitted(ChannelError):
    pass


class ReplayDetected(ChannelError):
    pass


class CounterExhausted(ChannelError):
    pass


class InvalidSeed(ChannelError):
    pass


# Device model

class DeviceError(SndefError):
    pass


class DeviceUnpowered(DeviceError):
    pass


class ValueTooLong(DeviceError):
    pass


class UnknownConfigKey(DeviceError):
    pass


class InvalidConfigValue(DeviceError):
    pass


class IndexOutOfRange(DeviceError):
    pass


class ValueOutOfRange(DeviceError):
    pass


# Transport

class TransportError(SndefError):
    pass


class FrameTooLarge(TransportError):
    pass


class EndpointUnpowered(TransportError):
    pass


class LivelockDetected(TransportError):
    pass


# Files

class FixtureError(SndefError):
    pass


class ConfigError(SndefError):
    pass
