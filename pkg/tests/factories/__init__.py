"""
Test data factories
"""

from .pack_factory import PackFactory

__all__ = ["PackFactory"]
