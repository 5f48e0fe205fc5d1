"""Variational integrator for the rotating shallow-water equations on the sphere."""
from .kernels import BACKEND
from .mesh import Mesh, build_mesh, overlap_ratios

__all__ = ["BACKEND", "Mesh", "build_mesh", "overlap_ratios"]
__version__ = "0.1.0"
