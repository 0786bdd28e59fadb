"""
Cipher suite primitives: nonces, session key derivation, seal/unseal

Suite 0x01 is Encrypt-then-MAC (AES-128-CBC, then AES-CMAC over
suite || iv || ciphertext). The AEAD suites authenticate suite || iv as
associated data.
"""

import logging
import random
from dataclasses import dataclass, field
from typing import Optional, Protocol

from Crypto.Cipher import AES
from Crypto.Hash import CMAC, HMAC, SHA256
from Crypto.Random import get_random_bytes
from Crypto.Util.Padding import pad, unpad

from .codec import BLOCK_LEN, IV_LEN, TAG_LEN, CipherSuiteId
from .errors import (
    DegenerateKeys,
    EntropyUnavailable,
    InvalidKeyMaterial,
    InvalidLength,
    InvalidNonce,
    PaddingInvalid,
    TagMismatch,
)

LOGGER = logging.getLogger(__name__)

KEY_LEN = 16
NONCE_LEN = 16
KDF_BLOCK_LEN = 64
MAX_NONCE_ATTEMPTS = 8

AEAD_NONCE_LEN = {
    CipherSuiteId.GCM: 12,
    CipherSuiteId.CCM: 13,
    CipherSuiteId.EAX: 16,
}

_AEAD_MODES = {
    CipherSuiteId.GCM: AES.MODE_GCM,
    CipherSuiteId.CCM: AES.MODE_CCM,
    CipherSuiteId.EAX: AES.MODE_EAX,
}


class EntropySource(Protocol):
    def read(self, n: int) -> bytes: ...


class SystemEntropy:
    """Operating-system randomness"""

    def read(self, n: int) -> bytes:
        try:
            return get_random_bytes(n)
        except OSError as exc:
            raise EntropyUnavailable(f"System entropy failed: {exc}") from exc


class SeededEntropy:
    """Deterministic byte stream for reproducible runs and tests"""

    def __init__(self, seed: int):
        self.seed = seed
        self._random = random.Random(seed)

    def read(self, n: int) -> bytes:
        return self._random.randbytes(n)

    def fork(self, label: str) -> "SeededEntropy":
        """Independent child stream, stable for a given seed and label"""
        return SeededEntropy(_stable_seed(self.seed, label))


def _stable_seed(seed: int, label: str) -> int:
    # str hashing is salted per process, so mix the label by hand
    value = seed & 0xFFFFFFFFFFFFFFFF
    for char in label:
        value = (value * 1_000_003 + ord(char)) & 0xFFFFFFFFFFFFFFFF
    return value


@dataclass(frozen=True)
class MasterKey:
    key: bytes = field(repr=False)

    def __post_init__(self):
        if len(self.key) != KEY_LEN:
            raise InvalidKeyMaterial(f"Master key must be {KEY_LEN} bytes")


@dataclass(frozen=True)
class Nonce128:
    value: bytes

    def __bytes__(self) -> bytes:
        return self.value


@dataclass
class SessionKeys:
    enc_key: bytearray = field(repr=False)
    mac_key: Optional[bytearray] = field(default=None, repr=False)
    zeroized: bool = False

    def zeroize(self) -> None:
        for buffer in (self.enc_key, self.mac_key):
            if buffer is not None:
                for index in range(len(buffer)):
                    buffer[index] = 0
        self.zeroized = True


class AesProvider:
    """Builds the AES objects used by seal/unseal and the handshake, and the KDF HMAC.

    Tests substitute a counting subclass to observe which primitives run.
    """

    def cbc(self, key: bytes, iv: bytes):
        return AES.new(bytes(key), AES.MODE_CBC, iv=bytes(iv))

    def cmac(self, key: bytes):
        return CMAC.new(bytes(key), ciphermod=AES)

    def aead(self, suite: CipherSuiteId, key: bytes, iv: bytes):
        nonce = bytes(iv[:AEAD_NONCE_LEN[suite]])
        return AES.new(bytes(key), _AEAD_MODES[suite], nonce=nonce, mac_len=TAG_LEN)

    def hmac(self, key: bytes, message: bytes):
        return HMAC.new(bytes(key), message, digestmod=SHA256)


DEFAULT_PROVIDER = AesProvider()


def _nonce_bytes(n) -> bytes:
    return n.value if isinstance(n, Nonce128) else bytes(n)


def validate_nonce(n, peer=None) -> bool:
    value = _nonce_bytes(n)
    if len(value) != NONCE_LEN:
        return False
    if value == bytes(NONCE_LEN) or value == b"\xff" * NONCE_LEN:
        return False
    if peer is not None and value == _nonce_bytes(peer):
        return False
    return True


def random_nonce(rng: EntropySource, peer=None) -> Nonce128:
    for attempt in range(MAX_NONCE_ATTEMPTS):
        try:
            value = bytes(rng.read(NONCE_LEN))
        except OSError as exc:
            raise EntropyUnavailable(f"Entropy source failed: {exc}") from exc
        if len(value) != NONCE_LEN:
            raise EntropyUnavailable(f"Entropy source returned {len(value)} bytes")
        if validate_nonce(value, peer):
            return Nonce128(value)
        LOGGER.debug("Rejected guard-value nonce on attempt %d", attempt + 1)
    raise EntropyUnavailable(f"No valid nonce after {MAX_NONCE_ATTEMPTS} attempts")


def kdf_message(dev_add_data: bytes, nonce_reader, nonce_device) -> bytes:
    message = bytes(dev_add_data) + _nonce_bytes(nonce_reader) + _nonce_bytes(nonce_device) + b"\x80"
    return message + bytes(-len(message) % KDF_BLOCK_LEN)


def derive_key_block(master: MasterKey, dev_add_data: bytes, nonce_reader, nonce_device,
                     provider: AesProvider = DEFAULT_PROVIDER) -> bytes:
    """K_d = HMAC-SHA256(K_M, dev_add_data || seed || padding)"""
    if not validate_nonce(nonce_reader) or not validate_nonce(nonce_device, nonce_reader):
        raise InvalidNonce("KDF nonces must be valid and distinct")
    mac = provider.hmac(master.key, kdf_message(dev_add_data, nonce_reader, nonce_device))
    return mac.digest()


def derive_session_keys(master: MasterKey, dev_add_data: bytes, nonce_reader, nonce_device,
                        suite: CipherSuiteId, provider: AesProvider = DEFAULT_PROVIDER) -> SessionKeys:
    key_block = derive_key_block(master, dev_add_data, nonce_reader, nonce_device, provider)
    suite = CipherSuiteId(suite)
    if suite.is_aead:
        return SessionKeys(enc_key=bytearray(key_block[:KEY_LEN]))

    enc_key, mac_key = key_block[:KEY_LEN], key_block[KEY_LEN:2 * KEY_LEN]
    if enc_key == mac_key:
        raise DegenerateKeys("Derived encryption and MAC keys are equal")
    return SessionKeys(enc_key=bytearray(enc_key), mac_key=bytearray(mac_key))


def _check_keys(suite: CipherSuiteId, keys: SessionKeys) -> None:
    if keys.zeroized:
        raise InvalidKeyMaterial("Session keys have been zeroized")
    if len(keys.enc_key) != KEY_LEN:
        raise InvalidKeyMaterial("Encryption key must be 16 bytes")
    if not suite.is_aead and (keys.mac_key is None or len(keys.mac_key) != KEY_LEN):
        raise InvalidKeyMaterial("CBC+CMAC needs a 16-byte MAC key")


def _associated_data(suite: CipherSuiteId, iv: bytes) -> bytes:
    return bytes([int(suite)]) + bytes(iv)


def seal(suite: CipherSuiteId, keys: SessionKeys, iv: bytes, plaintext: bytes,
         provider: AesProvider = DEFAULT_PROVIDER) -> tuple[bytes, bytes]:
    suite = CipherSuiteId(suite)
    _check_keys(suite, keys)
    if len(iv) != IV_LEN:
        raise InvalidLength(f"IV must be {IV_LEN} bytes")

    aad = _associated_data(suite, iv)
    if suite.is_aead:
        cipher = provider.aead(suite, keys.enc_key, iv)
        cipher.update(aad)
        return cipher.encrypt_and_digest(bytes(plaintext))

    ciphertext = provider.cbc(keys.enc_key, iv).encrypt(pad(bytes(plaintext), BLOCK_LEN))
    mac = provider.cmac(keys.mac_key)
    mac.update(aad + ciphertext)
    return ciphertext, mac.digest()


def unseal(suite: CipherSuiteId, keys: SessionKeys, iv: bytes, ciphertext: bytes, tag: bytes,
           provider: AesProvider = DEFAULT_PROVIDER) -> bytes:
    suite = CipherSuiteId(suite)
    _check_keys(suite, keys)
    if len(iv) != IV_LEN or len(tag) != TAG_LEN:
        raise InvalidLength("IV and tag must be 16 bytes each")

    aad = _associated_data(suite, iv)
    if suite.is_aead:
        cipher = provider.aead(suite, keys.enc_key, iv)
        cipher.update(aad)
        try:
            return cipher.decrypt_and_verify(bytes(ciphertext), bytes(tag))
        except ValueError as exc:
            raise TagMismatch("AEAD tag verification failed") from exc

    if not ciphertext or len(ciphertext) % BLOCK_LEN:
        raise InvalidLength("CBC ciphertext must be a positive multiple of 16 bytes")

    mac = provider.cmac(keys.mac_key)
    mac.update(aad + bytes(ciphertext))
    try:
        mac.verify(bytes(tag))
    except ValueError as exc:
        raise TagMismatch("CMAC verification failed") from exc

    padded = provider.cbc(keys.enc_key, iv).decrypt(bytes(ciphertext))
    try:
        return unpad(padded, BLOCK_LEN)
    except ValueError as exc:
        raise PaddingInvalid("Authenticated plaintext carries bad padding") from exc
