"""Simulation and analysis of polarization-encoded linear-optical gates built from
partially polarizing directional couplers."""

__version__ = "0.1.0"
