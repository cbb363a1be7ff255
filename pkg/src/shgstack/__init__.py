"""Nonlinear transfer-matrix modeling of SHG/SFG in van der Waals stacks, design sweeps and pair statistics."""

__version__ = "0.1.0"
