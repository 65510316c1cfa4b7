"""Fermi-surface geometry, oscillatory decay and lattice resolvent norms for
the discrete Laplacian on Z^3."""

__version__ = "0.1.0"
