"""Cranked Nilsson + pairing Routhians solved with a number-conserving VQE ansatz."""

__version__ = "0.1.0"
