"""Entropy-stable split-form DGSEM for the incompressible Navier-Stokes
equations with artificial compressibility and variable density."""

__version__ = "0.1.0"

from .basis import ElementOps, build_ops, quadrature_1d
from .physics import PhysParams
from .mesh import Mesh, build_cartesian_mesh, build_curved_box_mesh

__all__ = [
    "ElementOps",
    "build_ops",
    "quadrature_1d",
    "PhysParams",
    "Mesh",
    "build_cartesian_mesh",
    "build_curved_box_mesh",
]
