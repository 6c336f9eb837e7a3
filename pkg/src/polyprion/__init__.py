"""Polygonal discontinuous-Galerkin solvers for prion-spreading models."""

__version__ = "0.1.0"
