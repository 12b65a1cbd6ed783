"""Netlist -> circuit-algebra term -> SLH triple -> master equation toolkit."""

__version__ = "0.1.0"
