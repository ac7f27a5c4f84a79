"""Nested quantum-gradient / classical re-encoding optimization of parameterized circuits."""

__version__ = "0.1.0"
