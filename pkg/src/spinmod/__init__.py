"""Spin-photon interface simulations for a charged quantum dot in a cavity."""

__version__ = "0.1.0"
