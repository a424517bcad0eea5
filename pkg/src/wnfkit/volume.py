"""Dense scalar grids: rasterization, sampling, gradients, slicing.

Grids sample fields at voxel centers: the center of voxel (i, j, k) sits at
origin + (i, j, k) * h. Data is stored as a float32 array of shape
(Nx, Ny, Nz); serialization is x-fastest (see wnfkit.volb).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .mesh import TriMesh
from .winding import WindingAccel, WindingQueryParams, build_accel, \
    unsigned_distance, winding_batch

GRID_KINDS = ("wnf", "occupancy", "tsdf", "tdf")
DEFAULT_DIMS = 128
DEFAULT_MARGIN = 4


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned regular grid placement: dims per axis, center of voxel
    (0,0,0), isotropic voxel size."""

    dims: Tuple[int, int, int]
    origin: np.ndarray
    voxel_size: float

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 2 for d in dims):
            raise ValueError(f"dims must be three integers >= 2, got {self.dims}")
        if not self.voxel_size > 0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(
            self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3)
        )

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def voxel_centers(self) -> np.ndarray:
        """(Nx*Ny*Nz, 3) centers in x-fastest order."""
        axes = [
            self.origin[a] + np.arange(self.dims[a]) * self.voxel_size
            for a in range(3)
        ]
        zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        return np.stack([xx, yy, zz], axis=-1).reshape(-1, 3)

    def index_grid_shape(self) -> Tuple[int, int, int]:
        return self.dims

    def hull(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sampling hull: span of voxel centers (outer half-voxel excluded)."""
        lo = self.origin
        hi = self.origin + (np.asarray(self.dims) - 1) * self.voxel_size
        return lo, hi

    def covers(self, bounds: np.ndarray, margin_voxels: int = 1) -> bool:
        lo, hi = self.hull()
        pad = margin_voxels * self.voxel_size
        return bool(
            np.all(bounds[0] >= lo + pad - 1e-12)
            and np.all(bounds[1] <= hi - pad + 1e-12)
        )


def canonical_grid_spec(
    dims: int = DEFAULT_DIMS, margin: int = DEFAULT_MARGIN
) -> GridSpec:
    """Grid covering the canonical unit cube with a voxel margin on each
    side (dims=128, margin=4 gives h = 1/120)."""
    h = 1.0 / (dims - 2 * margin)
    origin = np.full(3, (-margin + 0.5) * h)
    return GridSpec(dims=(dims, dims, dims), origin=origin, voxel_size=h)


def grid_spec_for_bounds(
    bounds: np.ndarray, dims: int = DEFAULT_DIMS, margin: int = DEFAULT_MARGIN
) -> GridSpec:
    """Isotropic grid covering an arbitrary bbox with a voxel margin along
    the largest extent; smaller axes get extra slack, centered."""
    bounds = np.asarray(bounds, dtype=np.float64)
    extents = bounds[1] - bounds[0]
    largest = float(extents.max())
    if largest <= 0:
        raise ValueError("bounds have zero extent")
    h = largest / (dims - 2 * margin)
    center = 0.5 * (bounds[0] + bounds[1])
    origin = center - 0.5 * (dims - 1) * h
    return GridSpec(dims=(dims, dims, dims), origin=origin, voxel_size=h)


@dataclass(frozen=True)
class ScalarGrid:
    spec: GridSpec
    kind: str
    data: np.ndarray  # (Nx, Ny, Nz) float32
    trunc: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"kind must be one of {GRID_KINDS}, got {self.kind!r}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.shape != self.spec.dims:
            raise ValueError(
                f"data shape {data.shape} != grid dims {self.spec.dims}"
            )
        object.__setattr__(self, "data", data)
        if self.kind in ("tsdf", "tdf") and self.trunc is None:
            raise ValueError(f"{self.kind} grid requires a truncation distance")


def _check_coverage(mesh: TriMesh, spec: GridSpec, what: str) -> None:
    if mesh.num_vertices and not spec.covers(mesh.bounds()):
        warnings.warn(
            f"{what}: grid does not cover the mesh bbox with a one-voxel "
            "margin; boundary values will be clipped",
            stacklevel=3,
        )


def rasterize_wnf(
    mesh: TriMesh,
    spec: GridSpec,
    accel: Optional[WindingAccel] = None,
    params: Optional[WindingQueryParams] = None,
) -> ScalarGrid:
    """Winding number field sampled at voxel centers."""
    _check_coverage(mesh, spec, "rasterize_wnf")
    accel = accel or build_accel(mesh)
    values = winding_batch(accel, spec.voxel_centers(), params)
    return ScalarGrid(spec=spec, kind="wnf", data=_to_grid(values, spec))


def _to_grid(flat: np.ndarray, spec: GridSpec) -> np.ndarray:
    nx, ny, nz = spec.dims
    return np.ascontiguousarray(
        flat.reshape(nz, ny, nx).transpose(2, 1, 0).astype(np.float32)
    )


def rasterize_occupancy(mesh: TriMesh, spec: GridSpec) -> ScalarGrid:
    """Binary voxelization: 1 where a triangle overlaps the voxel cube
    (separating-axis test), 0 elsewhere."""
    _check_coverage(mesh, spec, "rasterize_occupancy")
    nx, ny, nz = spec.dims
    occ = np.zeros((nx, ny, nz), dtype=bool)
    h = spec.voxel_size
    half = 0.5 * h
    v0, v1, v2 = mesh.triangle_corners()
    dims = np.asarray(spec.dims)
    for a, b, c in zip(v0, v1, v2):
        tlo = np.minimum(np.minimum(a, b), c)
        thi = np.maximum(np.maximum(a, b), c)
        ilo = np.floor((tlo - spec.origin) / h + 0.5 - 1e-9).astype(int)
        ihi = np.floor((thi - spec.origin) / h + 0.5 + 1e-9).astype(int)
        ilo = np.clip(ilo, 0, dims - 1)
        ihi = np.clip(ihi, 0, dims - 1)
        if np.any(ihi < ilo):
            continue
        ii, jj, kk = np.meshgrid(
            np.arange(ilo[0], ihi[0] + 1),
            np.arange(ilo[1], ihi[1] + 1),
            np.arange(ilo[2], ihi[2] + 1),
            indexing="ij",
        )
        idx = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3)
        centers = spec.origin + idx * h
        hits = _tri_box_overlap(centers, half, a, b, c)
        hit_idx = idx[hits]
        occ[hit_idx[:, 0], hit_idx[:, 1], hit_idx[:, 2]] = True
    return ScalarGrid(spec=spec, kind="occupancy", data=occ.astype(np.float32))


def _tri_box_overlap(centers, half, a, b, c):
    """Vectorized triangle vs axis-aligned cube separating-axis test for a
    single triangle against many congruent boxes (Akenine-Moller)."""
    va = a[None, :] - centers
    vb = b[None, :] - centers
    vc = c[None, :] - centers

    ok = np.ones(len(centers), dtype=bool)

    # Box-axis tests.
    lo = np.minimum(np.minimum(va, vb), vc)
    hi = np.maximum(np.maximum(va, vb), vc)
    ok &= np.all((hi >= -half) & (lo <= half), axis=1)

    # Triangle plane test.
    n = np.cross(b - a, c - a)
    r = half * np.abs(n).sum()
    d = np.einsum("ij,j->i", va, n)
    ok &= np.abs(d) <= r + 1e-12

    # Nine cross-axis tests.
    edges = (b - a, c - b, a - c)
    for e in edges:
        for axis in range(3):
            u = np.zeros(3)
            u[axis] = 1.0
            ax = np.cross(u, e)
            ra = half * (np.abs(ax).sum())
            pa = np.einsum("ij,j->i", va, ax)
            pb = np.einsum("ij,j->i", vb, ax)
            pc = np.einsum("ij,j->i", vc, ax)
            pmin = np.minimum(np.minimum(pa, pb), pc)
            pmax = np.maximum(np.maximum(pa, pb), pc)
            ok &= (pmin <= ra + 1e-12) & (pmax >= -ra - 1e-12)
    return ok


def rasterize_tsdf(
    mesh: TriMesh,
    spec: GridSpec,
    trunc: float,
    accel: Optional[WindingAccel] = None,
    params: Optional[WindingQueryParams] = None,
) -> ScalarGrid:
    """Truncated signed distance: negative inside (winding > 0.5)."""
    if not trunc > 0:
        raise ValueError("trunc must be positive")
    _check_coverage(mesh, spec, "rasterize_tsdf")
    accel = accel or build_accel(mesh)
    centers = spec.voxel_centers()
    dist = np.minimum(unsigned_distance(accel, centers), trunc)
    inside = winding_batch(accel, centers, params) > 0.5
    signed = np.where(inside, -dist, dist)
    return ScalarGrid(
        spec=spec, kind="tsdf", data=_to_grid(signed, spec), trunc=float(trunc)
    )


def rasterize_tdf(
    mesh: TriMesh,
    spec: GridSpec,
    trunc: float,
    accel: Optional[WindingAccel] = None,
) -> ScalarGrid:
    """Truncated unsigned distance."""
    if not trunc > 0:
        raise ValueError("trunc must be positive")
    _check_coverage(mesh, spec, "rasterize_tdf")
    accel = accel or build_accel(mesh)
    dist = np.minimum(unsigned_distance(accel, spec.voxel_centers()), trunc)
    return ScalarGrid(
        spec=spec, kind="tdf", data=_to_grid(dist, spec), trunc=float(trunc)
    )


def trilinear_sample(grid: ScalarGrid, p) -> np.ndarray:
    """Trilinear interpolation of the 8 surrounding voxel centers.

    Accepts (3,) or (N, 3); raises if any point leaves the sampling hull.
    """
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    pts = p.reshape(-1, 3)
    u = (pts - grid.spec.origin) / grid.spec.voxel_size
    dims = np.asarray(grid.spec.dims)
    if np.any(u < -1e-9) or np.any(u > dims - 1 + 1e-9):
        raise ValueError("sample point outside the grid's sampling hull")
    u = np.clip(u, 0.0, dims - 1)
    i0 = np.minimum(np.floor(u).astype(int), dims - 2)
    f = u - i0
    d = grid.data
    ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c000 = d[ix, iy, iz]
    c100 = d[ix + 1, iy, iz]
    c010 = d[ix, iy + 1, iz]
    c110 = d[ix + 1, iy + 1, iz]
    c001 = d[ix, iy, iz + 1]
    c101 = d[ix + 1, iy, iz + 1]
    c011 = d[ix, iy + 1, iz + 1]
    c111 = d[ix + 1, iy + 1, iz + 1]
    out = (
        c000 * (1 - fx) * (1 - fy) * (1 - fz)
        + c100 * fx * (1 - fy) * (1 - fz)
        + c010 * (1 - fx) * fy * (1 - fz)
        + c110 * fx * fy * (1 - fz)
        + c001 * (1 - fx) * (1 - fy) * fz
        + c101 * fx * (1 - fy) * fz
        + c011 * (1 - fx) * fy * fz
        + c111 * fx * fy * fz
    )
    return float(out[0]) if single else out


def gradient(grid: ScalarGrid, p) -> np.ndarray:
    """Central-difference gradient of the trilinear field, step = half a
    voxel.

    The half-voxel step keeps both samples inside a single interpolation
    cell for points near a field jump, so a unit jump across one voxel
    measures as |grad| ~ 1/h rather than being smeared to 1/(2h).

    Accepts (3,) or (N, 3); points must sit at least one voxel inside the
    sampling hull.
    """
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    pts = p.reshape(-1, 3)
    h = 0.5 * grid.spec.voxel_size
    out = np.empty_like(pts)
    for a in range(3):
        step = np.zeros(3)
        step[a] = h
        out[:, a] = (
            trilinear_sample(grid, pts + step) - trilinear_sample(grid, pts - step)
        ) / (2 * h)
    return out[0] if single else out


def slice_volume(grid: ScalarGrid) -> List[ScalarGrid]:
    """Split into 2x2x2 octant blocks (x-fastest octant order)."""
    nx, ny, nz = grid.spec.dims
    if nx % 2 or ny % 2 or nz % 2:
        raise ValueError(f"dims {grid.spec.dims} not divisible by 2")
    hx, hy, hz = nx // 2, ny // 2, nz // 2
    h = grid.spec.voxel_size
    parts = []
    for bz in range(2):
        for by in range(2):
            for bx in range(2):
                sub = grid.data[
                    bx * hx : (bx + 1) * hx,
                    by * hy : (by + 1) * hy,
                    bz * hz : (bz + 1) * hz,
                ]
                origin = grid.spec.origin + np.array(
                    [bx * hx, by * hy, bz * hz]
                ) * h
                parts.append(
                    ScalarGrid(
                        spec=GridSpec((hx, hy, hz), origin, h),
                        kind=grid.kind,
                        data=np.ascontiguousarray(sub),
                        trunc=grid.trunc,
                    )
                )
    return parts


def merge_volume(parts: Sequence[ScalarGrid]) -> ScalarGrid:
    """Exact inverse of slice_volume."""
    if len(parts) != 8:
        raise ValueError(f"expected 8 parts, got {len(parts)}")
    hx, hy, hz = parts[0].spec.dims
    h = parts[0].spec.voxel_size
    data = np.empty((2 * hx, 2 * hy, 2 * hz), dtype=np.float32)
    for n, part in enumerate(parts):
        bx, by, bz = n % 2, (n // 2) % 2, n // 4
        data[
            bx * hx : (bx + 1) * hx,
            by * hy : (by + 1) * hy,
            bz * hz : (bz + 1) * hz,
        ] = part.data
    origin = parts[0].spec.origin
    return ScalarGrid(
        spec=GridSpec((2 * hx, 2 * hy, 2 * hz), origin, h),
        kind=parts[0].kind,
        data=data,
        trunc=parts[0].trunc,
    )
