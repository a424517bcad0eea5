"""Scatter per-point features into a dense canonical-space volume.

Each point's feature vector lands in the cell indexed by its NOCS
coordinate; collisions aggregate by channel-wise maximum, untouched cells
stay exactly zero. The operation is order-invariant bitwise, so parallel
or shuffled inputs give identical volumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, PointCloud
from .nocs import bin_coord

DEFAULT_DIMS = 32


@dataclass(frozen=True)
class ScatterInput:
    """Concatenated per-point scatter payload, channel order
    [task xyz | nocs xyz | confidence xyz | backbone]."""

    positions: np.ndarray
    nocs: np.ndarray
    confidence: np.ndarray
    features: np.ndarray  # (N, F), F may be 0

    def __post_init__(self):
        n = len(self.positions)
        for name in ("positions", "nocs", "confidence"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (n, 3):
                raise MeshError(f"{name} must be ({n}, 3), got {arr.shape}")
            object.__setattr__(self, name, arr)
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or len(feats) != n:
            raise MeshError(f"features must be ({n}, F), got {feats.shape}")
        object.__setattr__(self, "features", feats)

    @property
    def channels(self) -> int:
        return 9 + self.features.shape[1]

    def concatenated(self) -> np.ndarray:
        """(N, 9+F) matrix in the documented channel order."""
        return np.concatenate(
            [self.positions, self.nocs, self.confidence, self.features], axis=1
        )


@dataclass(frozen=True)
class FeatureVolume:
    """Dense D^3 x C feature grid with a hit mask; untouched cells are
    all-zero and masked false."""

    dims: int
    channels: int
    data: np.ndarray  # (D, D, D, C) float32
    occupancy_mask: np.ndarray  # (D, D, D) bool

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        d, c = self.dims, self.channels
        if data.shape != (d, d, d, c):
            raise ValueError(f"data shape {data.shape} != {(d, d, d, c)}")
        mask = np.ascontiguousarray(self.occupancy_mask, dtype=bool)
        if mask.shape != (d, d, d):
            raise ValueError(f"mask shape {mask.shape} != {(d, d, d)}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "occupancy_mask", mask)


def assemble_features(cloud: PointCloud) -> ScatterInput:
    """Build the scatter payload from a cloud carrying nocs, confidence and
    (optionally) backbone feature channels. C = 9 + F."""
    if cloud.nocs is None:
        raise MeshError("assemble_features requires a nocs channel")
    if cloud.confidence is None:
        raise MeshError("assemble_features requires a confidence channel")
    feats = cloud.features
    if feats is None:
        feats = np.zeros((len(cloud), 0))
    return ScatterInput(
        positions=cloud.points,
        nocs=cloud.nocs,
        confidence=cloud.confidence,
        features=feats,
    )


def scatter_max(inp: ScatterInput, dims: int = DEFAULT_DIMS) -> FeatureVolume:
    """Channel-wise max scatter into a dims^3 volume."""
    if dims < 2:
        raise ValueError(f"dims must be >= 2, got {dims}")
    idx = bin_coord(inp.nocs, dims)
    payload = inp.concatenated().astype(np.float32)
    c = payload.shape[1]
    data = np.full((dims, dims, dims, c), -np.inf, dtype=np.float32)
    np.maximum.at(data, (idx[:, 0], idx[:, 1], idx[:, 2]), payload)
    mask = np.zeros((dims, dims, dims), dtype=bool)
    mask[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    data[~mask] = 0.0
    return FeatureVolume(dims=dims, channels=c, data=data, occupancy_mask=mask)


def gather_trilinear(volume: FeatureVolume, q) -> np.ndarray:
    """Per-channel trilinear blend of the 8 cell centers around q in
    [0, 1]^3; exact at cell centers, clamped at the hull boundary.

    Accepts (3,) or (Q, 3); returns (C,) or (Q, C).
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    pts = q.reshape(-1, 3)
    d = volume.dims
    # Cell centers sit at (i + 0.5) / D.
    u = np.clip(pts * d - 0.5, 0.0, d - 1)
    i0 = np.minimum(np.floor(u).astype(int), d - 2)
    f = (u - i0)[:, :, None]
    g = volume.data
    ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    out = (
        g[ix, iy, iz] * (1 - fx) * (1 - fy) * (1 - fz)
        + g[ix + 1, iy, iz] * fx * (1 - fy) * (1 - fz)
        + g[ix, iy + 1, iz] * (1 - fx) * fy * (1 - fz)
        + g[ix + 1, iy + 1, iz] * fx * fy * (1 - fz)
        + g[ix, iy, iz + 1] * (1 - fx) * (1 - fy) * fz
        + g[ix + 1, iy, iz + 1] * fx * (1 - fy) * fz
        + g[ix, iy + 1, iz + 1] * (1 - fx) * fy * fz
        + g[ix + 1, iy + 1, iz + 1] * fx * fy * fz
    )
    return out[0] if single else out
