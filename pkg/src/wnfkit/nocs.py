"""Category-level normalized canonical coordinate space.

A category transform uniformly scales and translates every instance so the
joint bounding box's largest dimension spans [0, 1] and the remaining axes
are centered inside the unit cube. Coordinates are discretized by dividing
each axis into B bins (64 by default).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .mesh import TriMesh

DEFAULT_BINS = 64
_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class NocsTransform:
    """p_nocs = scale * p + translation, shared by a whole category."""

    scale: float
    translation: np.ndarray
    category_id: str = ""

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(
            self, "translation",
            np.asarray(self.translation, dtype=np.float64).reshape(3),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "category_id": self.category_id,
                "scale": self.scale,
                "translation": self.translation.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "NocsTransform":
        doc = json.loads(text)
        return cls(
            scale=float(doc["scale"]),
            translation=np.asarray(doc["translation"], dtype=np.float64),
            category_id=doc.get("category_id", ""),
        )


def fit_category_transform(
    meshes: Sequence[TriMesh], category_id: str = ""
) -> NocsTransform:
    """Fit the shared unit-cube transform from a category's canonical meshes.

    The largest dimension of the joint bounding box spans [0, 1]; the other
    axes are centered within the cube.
    """
    meshes = list(meshes)
    if not meshes:
        raise ValueError("need at least one mesh to fit a category transform")
    los = np.min([m.bounds()[0] for m in meshes], axis=0)
    his = np.max([m.bounds()[1] for m in meshes], axis=0)
    extents = his - los
    largest = float(extents.max())
    if largest <= 0:
        raise ValueError("joint bounding box has zero extent")
    scale = 1.0 / largest
    translation = -scale * los + 0.5 * (1.0 - scale * extents)
    return NocsTransform(scale=scale, translation=translation,
                         category_id=category_id)


def to_nocs(transform: NocsTransform, p: np.ndarray) -> np.ndarray:
    """Map task/canonical-frame points into NOCS. Accepts (3,) or (N, 3)."""
    return transform.scale * np.asarray(p, dtype=np.float64) + transform.translation


def from_nocs(transform: NocsTransform, p: np.ndarray) -> np.ndarray:
    return (np.asarray(p, dtype=np.float64) - transform.translation) / transform.scale


def bin_coord(p: np.ndarray, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Discretize NOCS coordinates: index = min(floor(p * B), B - 1), clamped.

    Accepts (3,) or (N, 3); returns int32 of the same shape.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    p = np.asarray(p, dtype=np.float64)
    idx = np.floor(p * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1).astype(np.int32)


def unbin_coord(idx: np.ndarray, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin-center reconstruction: (i + 0.5) / B."""
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= bins):
        raise ValueError(f"bin index outside [0, {bins})")
    return (idx.astype(np.float64) + 0.5) / bins


def mirror_nocs(p: np.ndarray, axis: str = "x") -> np.ndarray:
    """Reflect NOCS coordinates across the mid-plane of one axis.

    Default axis x: the lateral (left-right) axis of the T-posed canonical
    configuration. Involutive: mirror(mirror(p)) == p.
    """
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {tuple(_AXES)}, got {axis!r}")
    p = np.array(p, dtype=np.float64)
    a = _AXES[axis]
    p[..., a] = 1.0 - p[..., a]
    return p
