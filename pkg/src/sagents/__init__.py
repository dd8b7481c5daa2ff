"""Simulated multi-agent organizations with hourglass planners in a voxel world."""

__version__ = "0.1.0"
