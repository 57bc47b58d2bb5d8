"""Arm events, crossing clusters and interface exploration for planar site percolation."""

__version__ = "0.1.0"
