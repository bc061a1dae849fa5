"""Estimate the fidelity of separability of quantum states."""

__version__ = "0.1.0"
