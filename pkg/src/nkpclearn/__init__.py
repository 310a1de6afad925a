"""Constant-gain learning NKPC: simulation, NLS estimation, equilibria and inference."""

__version__ = "0.1.0"
