"""Triangle mesh and point cloud containers.

All containers are frozen after construction and validated eagerly, so a
TriMesh that exists is a TriMesh that satisfies its invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FRAMES = ("task", "canonical")


class MeshError(ValueError):
    """Raised when mesh data violates a structural invariant."""


def _as_f64(a, name, cols=3):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise MeshError(f"{name} must be (N, {cols}), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle surface, optionally carrying per-vertex canonical
    (NOCS) coordinates in [0, 1]^3."""

    vertices: np.ndarray
    triangles: np.ndarray
    frame: str = "task"
    nocs_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        verts = _as_f64(self.vertices, "vertices")
        tris = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if tris.size == 0:
            tris = tris.reshape(0, 3)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError(f"triangles must be (M, 3), got shape {tris.shape}")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        if self.frame not in FRAMES:
            raise MeshError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if tris.size:
            if tris.min() < 0 or tris.max() >= len(verts):
                bad = int(np.argmax((tris < 0) | (tris >= len(verts))))
                raise MeshError(
                    f"triangle {bad // 3} references vertex index outside "
                    f"[0, {len(verts)}): {tris.reshape(-1, 3)[bad // 3].tolist()}"
                )
            same = (
                (tris[:, 0] == tris[:, 1])
                | (tris[:, 1] == tris[:, 2])
                | (tris[:, 0] == tris[:, 2])
            )
            if same.any():
                raise MeshError(
                    f"triangle {int(np.argmax(same))} repeats a vertex index"
                )
        if self.nocs_labels is not None:
            labels = _as_f64(self.nocs_labels, "nocs_labels")
            if len(labels) != len(verts):
                raise MeshError(
                    f"nocs_labels length {len(labels)} != vertex count {len(verts)}"
                )
            if labels.size and (labels.min() < -1e-9 or labels.max() > 1 + 1e-9):
                raise MeshError("nocs_labels components must lie in [0, 1]")
            object.__setattr__(self, "nocs_labels", labels)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def bounds(self) -> np.ndarray:
        """(2, 3) array of [min corner, max corner]."""
        if self.num_vertices == 0:
            return np.zeros((2, 3))
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def bbox_diagonal(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def triangle_corners(self):
        """Per-triangle corner arrays (v0, v1, v2), each (M, 3)."""
        t = self.triangles
        return self.vertices[t[:, 0]], self.vertices[t[:, 1]], self.vertices[t[:, 2]]

    def triangle_areas(self) -> np.ndarray:
        v0, v1, v2 = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        return TriMesh(vertices, self.triangles, self.frame, self.nocs_labels)


@dataclass(frozen=True)
class PointCloud:
    """Point set with optional per-point channels (all length-matched)."""

    points: np.ndarray
    colors: Optional[np.ndarray] = None
    nocs: Optional[np.ndarray] = None
    confidence: Optional[np.ndarray] = None
    features: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = _as_f64(self.points, "points")
        object.__setattr__(self, "points", pts)
        n = len(pts)
        for name in ("colors", "nocs", "confidence"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = _as_f64(val, name)
            if len(arr) != n:
                raise MeshError(f"{name} length {len(arr)} != point count {n}")
            object.__setattr__(self, name, arr)
        if self.features is not None:
            feats = np.ascontiguousarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or len(feats) != n:
                raise MeshError(
                    f"features must be (N, C) with N={n}, got {feats.shape}"
                )
            object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ValidationReport:
    degenerate_triangle_count: int
    duplicate_vertex_count: int
    is_watertight: bool
    bbox: np.ndarray  # (2, 3) min/max corners


def validate(mesh: TriMesh, area_epsilon: float = 1e-10) -> ValidationReport:
    """Audit a mesh: degenerate triangles, duplicate vertices, watertightness.

    Reports only, never raises; degenerate triangles are left in place since
    downstream solid-angle math tolerates them (zero contribution).
    """
    areas = mesh.triangle_areas()
    degenerate = int(np.count_nonzero(areas < area_epsilon))

    if mesh.num_vertices:
        _, counts = np.unique(mesh.vertices, axis=0, return_counts=True)
        duplicates = int(np.sum(counts[counts > 1] - 1))
    else:
        duplicates = 0

    return ValidationReport(
        degenerate_triangle_count=degenerate,
        duplicate_vertex_count=duplicates,
        is_watertight=_is_watertight(mesh),
        bbox=mesh.bounds(),
    )


def _is_watertight(mesh: TriMesh) -> bool:
    """Every undirected edge shared by exactly two triangles, traversed once
    in each direction (consistent orientation)."""
    tris = mesh.triangles
    if len(tris) == 0:
        return False
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    forward = edges[:, 0] < edges[:, 1]
    keys = lo.astype(np.int64) * mesh.num_vertices + hi
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    uniq, counts = np.unique(keys_sorted, return_counts=True)
    if not np.all(counts == 2):
        return False
    # Paired edges must run in opposite directions.
    fw = forward[order]
    return bool(np.all(fw[0::2] != fw[1::2]))


def boundary_edge_count(mesh: TriMesh) -> int:
    """Number of edges incident to exactly one triangle."""
    tris = mesh.triangles
    if len(tris) == 0:
        return 0
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    keys = (
        edges.min(axis=1).astype(np.int64) * mesh.num_vertices + edges.max(axis=1)
    )
    _, counts = np.unique(keys, return_counts=True)
    return int(np.count_nonzero(counts == 1))
