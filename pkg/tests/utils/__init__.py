"""
Test utilities
"""

from .test_helpers import TestHelpers

__all__ = ["TestHelpers"]
