"""Bukhgeim-phase CGO solutions, Dirichlet-to-Neumann maps and potential reconstruction on a square lattice."""

__version__ = "0.1.0"
