"""Computational laboratory for aperiodic Delone sets, their hulls and orbit-wise diffusion."""

__version__ = "0.1.0"
