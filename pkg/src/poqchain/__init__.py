"""Proof-of-quantum-work blockchain: hashing, validation, consensus and simulation."""

__version__ = "0.1.0"
