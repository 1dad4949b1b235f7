"""Spike-communication analytics and AER network-on-chip simulation."""

__version__ = "0.1.0"
