"""Desk-scale numerical laboratory for the radial focusing energy-critical
Hartree equation i u_t = Lap u + (|x|^{-4} * |u|^2) u in five dimensions."""

__version__ = "0.1.0"
