"""
sndef-bms: secure NFC readout of a simulated battery management system

SNDEF records, a three-pass mutual authentication, an encrypted session
channel with replay counters, a BMS device model and a discrete-event NFC
link with adversaries.
"""

from .codec import CipherSuiteId, MessageType, PlainMessage, SndefRecord
from .config import Settings, load_settings
from .errors import SndefError

__version__ = "1.0.0"

__all__ = [
    "CipherSuiteId",
    "MessageType",
    "PlainMessage",
    "SndefRecord",
    "Settings",
    "SndefError",
    "load_settings",
    "__version__",
]
