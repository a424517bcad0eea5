"""Array-in/array-out bridge to the wnfkit geometry kernel.

Every function takes plain numpy arrays and returns plain numpy arrays or
floats, so training pipelines can call the kernel without touching its
dataclasses. Outputs are bitwise identical to the corresponding kernel
operations for identical inputs and seeds; shape and dtype problems raise
ValueError with a descriptive message. Arrays already in the expected
layout are passed through without copies.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from wnfkit.extract import classify_openings, default_opening_threshold, \
    marching_cubes
from wnfkit.mesh import TriMesh
from wnfkit.metrics import chamfer, correspondence_distance
from wnfkit.scatter import FeatureVolume, ScatterInput, gather_trilinear, \
    scatter_max
from wnfkit.volume import GridSpec, ScalarGrid, rasterize_wnf
from wnfkit.winding import WindingQueryParams

__version__ = "0.1.0"

__all__ = [
    "py_rasterize_wnf",
    "py_scatter_max",
    "py_gather_trilinear",
    "py_marching_openings",
    "py_chamfer",
    "py_correspondence",
]


def _as_points(arr, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {out.shape}")
    return out


def _mesh(vertices, triangles, labels=None) -> TriMesh:
    tris = np.asarray(triangles)
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise ValueError(f"triangles must have shape (M, 3), got {tris.shape}")
    if not np.issubdtype(tris.dtype, np.integer):
        raise ValueError(f"triangles must be an integer array, got {tris.dtype}")
    return TriMesh(
        _as_points(vertices, "vertices"), tris.astype(np.int32),
        nocs_labels=labels,
    )


def py_rasterize_wnf(
    vertices: np.ndarray,
    triangles: np.ndarray,
    dims: int,
    origin,
    voxel_size: float,
    beta: float = 2.0,
) -> np.ndarray:
    """Winding-number field of a triangle soup on a dims^3 grid.

    Returns a float32 (dims, dims, dims) array indexed [ix, iy, iz] with
    voxel centers at origin + index * voxel_size.
    """
    mesh = _mesh(vertices, triangles)
    spec = GridSpec((int(dims),) * 3, np.asarray(origin, dtype=np.float64),
                    float(voxel_size))
    grid = rasterize_wnf(mesh, spec, params=WindingQueryParams(beta=float(beta)))
    return grid.data


def py_scatter_max(nocs: np.ndarray, features: np.ndarray, dims: int) -> np.ndarray:
    """Channel-wise max scatter of per-point features into a dims^3 volume.

    nocs is (N, 3) in [0, 1]^3 and selects the cell; features is (N, C).
    Returns float32 (dims, dims, dims, C); untouched cells are exactly zero.
    """
    nocs = _as_points(nocs, "nocs")
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or len(feats) != len(nocs):
        raise ValueError(
            f"features must have shape ({len(nocs)}, C), got {feats.shape}"
        )
    n = len(nocs)
    inp = ScatterInput(
        positions=np.zeros((n, 3)),
        nocs=nocs,
        confidence=np.zeros((n, 3)),
        features=feats,
    )
    # The kernel prepends nine bookkeeping channels; return only the
    # caller's feature channels.
    return scatter_max(inp, int(dims)).data[..., 9:]


def py_gather_trilinear(volume: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Trilinear gather from a (D, D, D, C) feature volume at (Q, 3) points
    in [0, 1]^3; returns float (Q, C)."""
    vol = np.asarray(volume, dtype=np.float32)
    if vol.ndim != 4 or not vol.shape[0] == vol.shape[1] == vol.shape[2]:
        raise ValueError(
            f"volume must have shape (D, D, D, C), got {vol.shape}"
        )
    q = _as_points(queries, "queries")
    d = vol.shape[0]
    fv = FeatureVolume(
        dims=d, channels=vol.shape[3], data=vol,
        occupancy_mask=np.any(vol != 0.0, axis=-1),
    )
    return gather_trilinear(fv, q)


def py_marching_openings(
    volume: np.ndarray,
    origin,
    voxel_size: float,
    iso: float = 0.5,
    threshold: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Isosurface plus opening labels from a winding-number volume.

    volume is a (Nx, Ny, Nz) scalar array with voxel centers at
    origin + index * voxel_size. Returns (vertices float64 (V, 3),
    triangles int32 (T, 3), grad_mag float64 (V,), is_opening bool (V,)).
    threshold defaults to 0.5 / voxel_size.
    """
    data = np.asarray(volume, dtype=np.float32)
    if data.ndim != 3:
        raise ValueError(f"volume must be a 3D array, got shape {data.shape}")
    spec = GridSpec(data.shape, np.asarray(origin, dtype=np.float64),
                    float(voxel_size))
    grid = ScalarGrid(spec=spec, kind="wnf", data=data)
    if threshold is None:
        threshold = default_opening_threshold(grid)
    surface = marching_cubes(grid, float(iso))
    labeled = classify_openings(surface, grid, float(threshold), float(iso))
    return (
        labeled.mesh.vertices,
        labeled.mesh.triangles,
        labeled.grad_mag,
        labeled.is_opening,
    )


def py_chamfer(
    pred_vertices: np.ndarray,
    pred_triangles: np.ndarray,
    gt_vertices: np.ndarray,
    gt_triangles: np.ndarray,
    n: int = 10_000,
    seed: int = 0,
) -> float:
    """Symmetric Chamfer distance between two meshes (n samples each)."""
    result = chamfer(
        _mesh(pred_vertices, pred_triangles),
        _mesh(gt_vertices, gt_triangles),
        n=int(n), seed=int(seed),
    )
    return result.symmetric_mean


def py_correspondence(
    pred_vertices: np.ndarray,
    pred_triangles: np.ndarray,
    pred_nocs: np.ndarray,
    gt_vertices: np.ndarray,
    gt_triangles: np.ndarray,
    gt_nocs: np.ndarray,
    n: int = 10_000,
    seed: int = 0,
) -> float:
    """Correspondence distance: mean 3D distance between pairs matched by
    nearest per-vertex canonical-coordinate label."""
    return correspondence_distance(
        _mesh(pred_vertices, pred_triangles, labels=_as_points(pred_nocs, "pred_nocs")),
        _mesh(gt_vertices, gt_triangles, labels=_as_points(gt_nocs, "gt_nocs")),
        n=int(n), seed=int(seed),
    )
