"""Evaluation metrics and task-space alignment.

Chamfer distance follows the sample-both-meshes protocol: n points drawn
area-uniformly from each surface, nearest neighbors via a KD-tree over the
samples. Correspondence distance matches points by nearest NOCS label
instead of nearest 3D position, so it measures pose rather than shape
agreement. All operations are deterministic given (inputs, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .mesh import MeshError, PointCloud, TriMesh
from .nocs import mirror_nocs
from .winding import build_accel, unsigned_distance

DEFAULT_SAMPLES = 10_000


def sample_surface(mesh: TriMesh, n: int, seed: int = 0) -> PointCloud:
    """Area-weighted uniform surface sampling with barycentric label
    interpolation; deterministic for a given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise MeshError("mesh has no non-degenerate triangles to sample")
    rng = np.random.default_rng(seed)
    tri_idx = rng.choice(len(areas), size=n, p=areas / total)
    r1 = rng.random(n)
    r2 = rng.random(n)
    # Square-root warp for uniform barycentric coordinates.
    s = np.sqrt(r1)
    u = 1.0 - s
    v = r2 * s
    w = 1.0 - u - v
    v0, v1, v2 = mesh.triangle_corners()
    pts = (
        u[:, None] * v0[tri_idx]
        + v[:, None] * v1[tri_idx]
        + w[:, None] * v2[tri_idx]
    )
    nocs = None
    if mesh.nocs_labels is not None:
        l0 = mesh.nocs_labels[mesh.triangles[tri_idx, 0]]
        l1 = mesh.nocs_labels[mesh.triangles[tri_idx, 1]]
        l2 = mesh.nocs_labels[mesh.triangles[tri_idx, 2]]
        nocs = u[:, None] * l0 + v[:, None] * l1 + w[:, None] * l2
        nocs = np.clip(nocs, 0.0, 1.0)
    return PointCloud(points=pts, nocs=nocs)


@dataclass(frozen=True)
class ChamferResult:
    accuracy_mean: float  # prediction -> ground truth
    completeness_mean: float  # ground truth -> prediction
    symmetric_mean: float
    sample_count: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "accuracy_mean": self.accuracy_mean,
            "completeness_mean": self.completeness_mean,
            "symmetric_mean": self.symmetric_mean,
            "sample_count": self.sample_count,
            "seed": self.seed,
        }


def chamfer(
    pred: TriMesh,
    gt: TriMesh,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    point_to_surface: bool = False,
) -> ChamferResult:
    """Symmetric Chamfer distance over n samples per mesh.

    point_to_surface swaps the sample-to-sample nearest neighbor for the
    exact distance to the other mesh's surface (diagnostic mode; removes
    the sampling-density bias in the nearest-neighbor estimate).
    """
    pred_pts = sample_surface(pred, n, seed).points
    gt_pts = sample_surface(gt, n, seed).points
    if point_to_surface:
        acc = float(unsigned_distance(build_accel(gt), pred_pts).mean())
        comp = float(unsigned_distance(build_accel(pred), gt_pts).mean())
    else:
        acc = float(cKDTree(gt_pts).query(pred_pts)[0].mean())
        comp = float(cKDTree(pred_pts).query(gt_pts)[0].mean())
    return ChamferResult(
        accuracy_mean=acc,
        completeness_mean=comp,
        symmetric_mean=0.5 * (acc + comp),
        sample_count=n,
        seed=seed,
    )


def correspondence_distance(
    pred: TriMesh,
    gt: TriMesh,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> float:
    """Mean 3D distance between pairs matched by nearest NOCS label
    (prediction -> ground truth direction); exact-duplicate label ties
    resolve to the lowest ground-truth sample index."""
    if pred.nocs_labels is None or gt.nocs_labels is None:
        raise MeshError("correspondence distance requires NOCS labels on both meshes")
    ps = sample_surface(pred, n, seed)
    gs = sample_surface(gt, n, seed)
    _, match = cKDTree(gs.nocs).query(ps.nocs)
    return float(np.linalg.norm(ps.points - gs.points[match], axis=1).mean())


def nocs_error(
    pred: np.ndarray,
    gt: np.ndarray,
    symmetric: bool = False,
    mirror_axis: str = "x",
) -> float:
    """Mean per-point L2 error in NOCS space; in symmetric mode the
    aggregate is also computed against the left-right mirrored ground truth
    and the minimum is reported."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"label shapes differ: {pred.shape} vs {gt.shape}")
    plain = float(np.linalg.norm(pred - gt, axis=1).mean())
    if not symmetric:
        return plain
    mirrored = float(
        np.linalg.norm(pred - mirror_nocs(gt, mirror_axis), axis=1).mean()
    )
    return min(plain, mirrored)


def infer_grasp_nocs(cloud: PointCloud) -> np.ndarray:
    """NOCS coordinate of the observed point nearest the gripper-frame
    origin (ties break to the lowest index)."""
    if len(cloud) == 0:
        raise MeshError("cannot infer a grasp point from an empty cloud")
    if cloud.nocs is None:
        raise MeshError("cloud has no nocs channel")
    idx = int(np.argmin(np.einsum("ij,ij->i", cloud.points, cloud.points)))
    return cloud.nocs[idx].copy()


def rotate_z(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return points @ rot.T


def align_rotation_z(
    pred: TriMesh,
    observed: PointCloud,
    coarse_steps: int = 72,
    refine_iters: int = 20,
    seed: int = 0,
    n: int = DEFAULT_SAMPLES,
) -> Tuple[float, TriMesh]:
    """Resolve the gravity-axis rotation ambiguity: grid search plus
    golden-section refinement of the one-directional Chamfer objective
    (observed -> rotated prediction samples). Returns (angle, rotated mesh).
    """
    if len(observed) == 0:
        raise MeshError("cannot align against an empty observed cloud")
    if coarse_steps < 1:
        raise ValueError("coarse_steps must be >= 1")
    samples = sample_surface(pred, n, seed).points
    tree = cKDTree(samples)
    obs = observed.points

    def objective(angle: float) -> float:
        # |R(a) s - o| == |s - R(-a) o|: rotate the observation instead of
        # rebuilding the tree.
        return float(tree.query(rotate_z(obs, -angle))[0].mean())

    angles = np.arange(coarse_steps) * (2.0 * np.pi / coarse_steps)
    values = np.array([objective(a) for a in angles])
    best = int(np.argmin(values))
    best_angle = float(angles[best])
    best_value = float(values[best])

    if refine_iters > 0 and coarse_steps > 1:
        step = 2.0 * np.pi / coarse_steps
        lo, hi = best_angle - step, best_angle + step
        phi = (np.sqrt(5.0) - 1.0) / 2.0
        a = hi - phi * (hi - lo)
        b = lo + phi * (hi - lo)
        fa, fb = objective(a), objective(b)
        for _ in range(refine_iters):
            if fa <= fb:
                hi, b, fb = b, a, fa
                a = hi - phi * (hi - lo)
                fa = objective(a)
            else:
                lo, a, fa = a, b, fb
                b = lo + phi * (hi - lo)
                fb = objective(b)
        mid = 0.5 * (lo + hi)
        fmid = objective(mid)
        if fmid < best_value:
            best_angle, best_value = mid % (2.0 * np.pi), fmid

    aligned = pred.with_vertices(rotate_z(pred.vertices, best_angle))
    return best_angle, aligned
