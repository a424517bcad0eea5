"""VOLB volume container.

One UTF-8 JSON header line terminated by a newline, then raw little-endian
float32 data in x-fastest order. Feature volumes use kind "feat" with an
extra "channels" header field and cell-major-then-channel layout. Writers
are canonical, so write -> read -> write is byte identical.
"""

from __future__ import annotations

import json
from typing import Union

import numpy as np

from .scatter import FeatureVolume
from .volume import GridSpec, ScalarGrid


class VolbError(ValueError):
    pass


def _header_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, separators=(", ", ": ")) + "\n").encode("utf-8")


def save_volume(grid: Union[ScalarGrid, FeatureVolume], path: str) -> None:
    if isinstance(grid, FeatureVolume):
        _save_feature(grid, path)
        return
    doc = {
        "kind": grid.kind,
        "dims": list(grid.spec.dims),
        "origin": grid.spec.origin.tolist(),
        "voxel_size": grid.spec.voxel_size,
    }
    if grid.trunc is not None:
        doc["trunc"] = grid.trunc
    payload = grid.data.transpose(2, 1, 0).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_header_bytes(doc))
        fh.write(payload)


def _save_feature(vol: FeatureVolume, path: str) -> None:
    doc = {
        "kind": "feat",
        "dims": [vol.dims] * 3,
        "origin": [0.0, 0.0, 0.0],
        "voxel_size": 1.0 / vol.dims,
        "channels": vol.channels,
    }
    # Cells x-fastest, each cell's channels contiguous.
    payload = vol.data.transpose(2, 1, 0, 3).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_header_bytes(doc))
        fh.write(payload)


def load_volume(path: str) -> Union[ScalarGrid, FeatureVolume]:
    with open(path, "rb") as fh:
        header = fh.readline()
        body = fh.read()
    try:
        doc = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VolbError(f"{path}: bad VOLB header: {exc}") from exc
    dims = tuple(int(d) for d in doc["dims"])
    kind = doc["kind"]
    if kind == "feat":
        channels = int(doc["channels"])
        expect = dims[0] * dims[1] * dims[2] * channels * 4
        if len(body) != expect:
            raise VolbError(
                f"{path}: payload is {len(body)} bytes, expected {expect}"
            )
        flat = np.frombuffer(body, dtype="<f4")
        data = flat.reshape(dims[2], dims[1], dims[0], channels).transpose(
            2, 1, 0, 3
        )
        mask = np.any(data != 0.0, axis=-1)
        return FeatureVolume(
            dims=dims[0],
            channels=channels,
            data=np.ascontiguousarray(data),
            occupancy_mask=mask,
        )
    expect = dims[0] * dims[1] * dims[2] * 4
    if len(body) != expect:
        raise VolbError(f"{path}: payload is {len(body)} bytes, expected {expect}")
    flat = np.frombuffer(body, dtype="<f4")
    data = np.ascontiguousarray(
        flat.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0)
    )
    spec = GridSpec(
        dims=dims,
        origin=np.asarray(doc["origin"], dtype=np.float64),
        voxel_size=float(doc["voxel_size"]),
    )
    return ScalarGrid(spec=spec, kind=kind, data=data, trunc=doc.get("trunc"))
