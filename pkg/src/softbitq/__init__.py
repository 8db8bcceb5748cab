"""Soft-bit compression for wideband LDPC-coded QAM links."""

__version__ = "0.1.0"
