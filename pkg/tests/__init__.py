"""
Test suite for the sndef-bms secure NFC readout stack
"""

__version__ = "1.0.0"
__author__ = "Test Team"
