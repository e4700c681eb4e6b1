"""Simulation, training and analysis of single-qubit photonic data
re-uploading classifiers built from Mach-Zehnder interferometers."""

from .model import CircuitSpec, Scheme

__all__ = ["CircuitSpec", "Scheme"]
__version__ = "0.1.0"
