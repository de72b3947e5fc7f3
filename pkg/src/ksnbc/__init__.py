"""Finite-volume simulator and verification harness for chemotaxis systems
with logistic damping and power-law boundary influx."""

__version__ = "0.1.0"
