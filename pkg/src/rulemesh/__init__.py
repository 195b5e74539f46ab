"""rulemesh: a broker for heterogeneous production-rule engines."""

__version__ = "0.1.0"
