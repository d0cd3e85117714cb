"""Simulation and analysis toolkit for quantum operations on multilevel trapped ions."""

__version__ = "0.1.0"
