"""wnfkit: winding-number-field geometry kernel for canonical-space garment
shape completion pipelines.

Submodules: mesh/meshio (containers and OBJ/PLY), nocs (canonical space),
winding (generalized winding numbers + BVH), volume/volb (scalar grids and
the VOLB container), extract (marching cubes + openings), scatter (feature
volumes), metrics (Chamfer / correspondence / alignment), cli.
"""

from . import backend

__version__ = "0.1.0"

__all__ = ["backend", "__version__"]
