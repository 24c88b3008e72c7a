"""Garment mesh deformation and multi-view texture synchronization.

Subpackages:
  mesh      triangle meshes, Wavefront I/O, surface sampling
  spatial   BVH closest point, signed distance, nearest neighbor
  losses    body-alignment and regularization losses with analytic gradients
  njf       per-face Jacobian field deformation via a prefactorized Poisson solve
  guidance  rectified-flow interval guidance on rendered normal maps
  optimize  the Adam-driven deformation loop
  texsync   multi-view texture aggregation and cyclic latent merging
  cli       command-line entry points
"""

from ._backend import active_backend

__version__ = "0.1.0"

__all__ = ["active_backend", "__version__"]
