"""OBJ / PLY readers and writers.

OBJ carries geometry only (positions + 1-based faces). PLY is the carrier
for every per-vertex attribute: canonical coordinates travel as float32
vertex properties nocs_x/nocs_y/nocs_z, opening labels as grad_mag (float32)
and is_opening (uchar). Writers emit canonical binary little-endian PLY so a
save -> load -> save cycle is byte identical; the reader additionally accepts
ASCII PLY.
"""

from __future__ import annotations

import os
from typing import Dict, Optional, Tuple

import numpy as np

from .mesh import MeshError, PointCloud, TriMesh


class MeshIOError(MeshError):
    """Malformed file or unsupported encoding, with location context."""


_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _detect_format(path: str, format: Optional[str]) -> str:
    if format is not None:
        if format not in ("obj", "ply"):
            raise MeshIOError(f"unsupported format {format!r} (expected obj or ply)")
        return format
    ext = os.path.splitext(path)[1].lower().lstrip(".")
    if ext in ("obj", "ply"):
        return ext
    raise MeshIOError(f"cannot infer format from {path!r}; pass format explicitly")


# ---------------------------------------------------------------------------
# OBJ

def _load_obj(path: str) -> TriMesh:
    verts = []
    faces = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshIOError(f"{path}:{lineno}: malformed vertex line")
                try:
                    verts.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise MeshIOError(f"{path}:{lineno}: {exc}") from exc
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshIOError(f"{path}:{lineno}: face needs >= 3 indices")
                try:
                    idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                except ValueError as exc:
                    raise MeshIOError(f"{path}:{lineno}: {exc}") from exc
                if any(i < 0 for i in idx):
                    raise MeshIOError(
                        f"{path}:{lineno}: only positive 1-based indices supported"
                    )
                # fan-triangulate polygons
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    verts_arr = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    faces_arr = np.asarray(faces, dtype=np.int32).reshape(-1, 3)
    if faces_arr.size and faces_arr.max() >= len(verts_arr):
        bad = int(faces_arr.max())
        raise MeshIOError(
            f"{path}: face references vertex {bad + 1} but only "
            f"{len(verts_arr)} vertices are defined"
        )
    return TriMesh(verts_arr, faces_arr)


def _save_obj(mesh: TriMesh, path: str) -> None:
    if mesh.nocs_labels is not None:
        raise MeshIOError(
            "OBJ cannot carry per-vertex NOCS labels; save as PLY instead"
        )
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# PLY

def _parse_ply_header(fh, path: str):
    """Returns (fmt, elements) where elements is a list of
    (name, count, [(prop_name, dtype_str or ('list', count_t, item_t))])."""
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise MeshIOError(f"{path}: not a PLY file (missing 'ply' magic)")
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise MeshIOError(f"{path}:{lineno}: unexpected EOF in header")
        line = raw.decode("ascii", "replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if parts[1] not in ("ascii", "binary_little_endian"):
                raise MeshIOError(
                    f"{path}:{lineno}: unsupported PLY format {parts[1]!r}"
                )
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshIOError(f"{path}:{lineno}: property before element")
            if parts[1] == "list":
                count_t, item_t = _PLY_TYPES.get(parts[2]), _PLY_TYPES.get(parts[3])
                if count_t is None or item_t is None:
                    raise MeshIOError(f"{path}:{lineno}: unknown list types")
                elements[-1][2].append((parts[4], ("list", count_t, item_t)))
            else:
                dt = _PLY_TYPES.get(parts[1])
                if dt is None:
                    raise MeshIOError(
                        f"{path}:{lineno}: unknown property type {parts[1]!r}"
                    )
                elements[-1][2].append((parts[2], dt))
        elif parts[0] == "end_header":
            break
        else:
            raise MeshIOError(f"{path}:{lineno}: unknown header line {line!r}")
    if fmt is None:
        raise MeshIOError(f"{path}: PLY header missing format line")
    return fmt, elements


def _read_ply(path: str) -> Dict[str, Dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh, path)
        body = fh.read()
    data: Dict[str, Dict[str, np.ndarray]] = {}
    if fmt == "binary_little_endian":
        offset = 0
        for name, count, props in elements:
            fields = []
            for i, (pname, ptype) in enumerate(props):
                if isinstance(ptype, tuple):
                    # Constant-length-3 lists only (triangle faces).
                    _, count_t, item_t = ptype
                    fields.append((f"_n{i}", "<" + count_t))
                    fields.append((pname, "<" + item_t, (3,)))
                else:
                    fields.append((pname, "<" + ptype))
            dt = np.dtype(fields)
            need = dt.itemsize * count
            if offset + need > len(body):
                raise MeshIOError(f"{path}: truncated body for element {name!r}")
            rec = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            offset += need
            cols = {}
            for i, (pname, ptype) in enumerate(props):
                if isinstance(ptype, tuple):
                    counts = rec[f"_n{i}"]
                    if counts.size and not np.all(counts == 3):
                        raise MeshIOError(
                            f"{path}: element {name!r} has non-triangle faces"
                        )
                cols[pname] = np.array(rec[pname])
            data[name] = cols
    else:  # ascii
        tokens = body.split()
        pos = 0
        for name, count, props in elements:
            cols = {pname: [] for pname, _ in props}
            for _ in range(count):
                for pname, ptype in props:
                    if isinstance(ptype, tuple):
                        n = int(tokens[pos]); pos += 1
                        if n != 3:
                            raise MeshIOError(
                                f"{path}: element {name!r} has non-triangle faces"
                            )
                        cols[pname].append(
                            [int(tokens[pos + k]) for k in range(n)]
                        )
                        pos += n
                    else:
                        cols[pname].append(float(tokens[pos])); pos += 1
            out = {}
            for pname, ptype in props:
                if isinstance(ptype, tuple):
                    out[pname] = np.asarray(cols[pname], dtype=np.int32)
                else:
                    out[pname] = np.asarray(cols[pname], dtype="<" + ptype)
            data[name] = out
    return data


def _write_ply(path: str, vertex_cols, face_indices: Optional[np.ndarray]) -> None:
    """vertex_cols: list of (name, array, ply_type). Canonical binary LE."""
    n = len(vertex_cols[0][1]) if vertex_cols else 0
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    for name, _, ply_type in vertex_cols:
        header.append(f"property {ply_type} {name}")
    if face_indices is not None:
        header.append(f"element face {len(face_indices)}")
        header.append("property list uchar int vertex_indices")
    header.append("end_header")

    fields = [
        (name, "<" + _PLY_TYPES[ply_type]) for name, _, ply_type in vertex_cols
    ]
    rec = np.zeros(n, dtype=np.dtype(fields))
    for name, arr, _ in vertex_cols:
        rec[name] = arr
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(rec.tobytes())
        if face_indices is not None:
            fdt = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
            frec = np.zeros(len(face_indices), dtype=fdt)
            frec["n"] = 3
            frec["idx"] = face_indices
            fh.write(frec.tobytes())


def _vertex_xyz(cols: Dict[str, np.ndarray], path: str) -> np.ndarray:
    for axis in ("x", "y", "z"):
        if axis not in cols:
            raise MeshIOError(f"{path}: vertex element missing property {axis!r}")
    return np.stack(
        [cols["x"], cols["y"], cols["z"]], axis=1
    ).astype(np.float64)


def _optional_triple(cols, prefix) -> Optional[np.ndarray]:
    names = [f"{prefix}_x", f"{prefix}_y", f"{prefix}_z"]
    if all(nm in cols for nm in names):
        return np.stack([cols[nm] for nm in names], axis=1).astype(np.float64)
    return None


# ---------------------------------------------------------------------------
# public API

def load_mesh(path: str, format: Optional[str] = None) -> TriMesh:
    """Load a triangle mesh from OBJ or PLY (format inferred from extension)."""
    fmt = _detect_format(path, format)
    if fmt == "obj":
        return _load_obj(path)
    data = _read_ply(path)
    if "vertex" not in data:
        raise MeshIOError(f"{path}: PLY has no vertex element")
    vcols = data["vertex"]
    verts = _vertex_xyz(vcols, path)
    faces = data.get("face", {}).get("vertex_indices")
    if faces is None:
        faces = np.zeros((0, 3), dtype=np.int32)
    nocs = _optional_triple(vcols, "nocs")
    if faces.size and faces.max() >= len(verts):
        raise MeshIOError(
            f"{path}: face references vertex {int(faces.max())} of {len(verts)}"
        )
    return TriMesh(verts, faces.astype(np.int32), nocs_labels=nocs)


def save_mesh(mesh: TriMesh, path: str, format: Optional[str] = None) -> None:
    """Save a triangle mesh; NOCS labels require PLY."""
    fmt = _detect_format(path, format)
    if fmt == "obj":
        _save_obj(mesh, path)
        return
    cols = [
        ("x", mesh.vertices[:, 0].astype("<f4"), "float"),
        ("y", mesh.vertices[:, 1].astype("<f4"), "float"),
        ("z", mesh.vertices[:, 2].astype("<f4"), "float"),
    ]
    if mesh.nocs_labels is not None:
        for i, nm in enumerate(("nocs_x", "nocs_y", "nocs_z")):
            cols.append((nm, mesh.nocs_labels[:, i].astype("<f4"), "float"))
    _write_ply(path, cols, mesh.triangles)


def load_cloud(path: str) -> PointCloud:
    """Load a point cloud from PLY (x,y,z plus optional channels)."""
    data = _read_ply(path)
    if "vertex" not in data:
        raise MeshIOError(f"{path}: PLY has no vertex element")
    cols = data["vertex"]
    points = _vertex_xyz(cols, path)
    colors = None
    if all(nm in cols for nm in ("red", "green", "blue")):
        rgb = np.stack([cols["red"], cols["green"], cols["blue"]], axis=1)
        colors = rgb.astype(np.float64) / 255.0
    nocs = _optional_triple(cols, "nocs")
    conf = _optional_triple(cols, "conf")
    feat_names = sorted(
        (nm for nm in cols if nm.startswith("feat_")),
        key=lambda nm: int(nm[5:]),
    )
    features = None
    if feat_names:
        features = np.stack([cols[nm] for nm in feat_names], axis=1).astype(
            np.float64
        )
    return PointCloud(points, colors=colors, nocs=nocs, confidence=conf,
                      features=features)


def save_cloud(cloud: PointCloud, path: str) -> None:
    cols = [
        ("x", cloud.points[:, 0].astype("<f4"), "float"),
        ("y", cloud.points[:, 1].astype("<f4"), "float"),
        ("z", cloud.points[:, 2].astype("<f4"), "float"),
    ]
    if cloud.colors is not None:
        rgb = np.clip(np.round(cloud.colors * 255.0), 0, 255).astype("u1")
        for i, nm in enumerate(("red", "green", "blue")):
            cols.append((nm, rgb[:, i], "uchar"))
    if cloud.nocs is not None:
        for i, nm in enumerate(("nocs_x", "nocs_y", "nocs_z")):
            cols.append((nm, cloud.nocs[:, i].astype("<f4"), "float"))
    if cloud.confidence is not None:
        for i, nm in enumerate(("conf_x", "conf_y", "conf_z")):
            cols.append((nm, cloud.confidence[:, i].astype("<f4"), "float"))
    if cloud.features is not None:
        for c in range(cloud.features.shape[1]):
            cols.append((f"feat_{c}", cloud.features[:, c].astype("<f4"), "float"))
    _write_ply(path, cols, None)


def save_labeled_mesh(
    mesh: TriMesh, grad_mag: np.ndarray, is_opening: np.ndarray, path: str
) -> None:
    """Extracted isosurface with per-vertex gradient magnitude and
    surface/opening classification."""
    if len(grad_mag) != mesh.num_vertices or len(is_opening) != mesh.num_vertices:
        raise MeshIOError("label arrays must match vertex count")
    cols = [
        ("x", mesh.vertices[:, 0].astype("<f4"), "float"),
        ("y", mesh.vertices[:, 1].astype("<f4"), "float"),
        ("z", mesh.vertices[:, 2].astype("<f4"), "float"),
    ]
    if mesh.nocs_labels is not None:
        for i, nm in enumerate(("nocs_x", "nocs_y", "nocs_z")):
            cols.append((nm, mesh.nocs_labels[:, i].astype("<f4"), "float"))
    cols.append(("grad_mag", np.asarray(grad_mag).astype("<f4"), "float"))
    cols.append(
        ("is_opening", np.asarray(is_opening).astype(bool).astype("u1"), "uchar")
    )
    _write_ply(path, cols, mesh.triangles)


def load_labeled_mesh(path: str) -> Tuple[TriMesh, np.ndarray, np.ndarray]:
    """Returns (mesh, grad_mag, is_opening)."""
    data = _read_ply(path)
    cols = data["vertex"]
    if "grad_mag" not in cols or "is_opening" not in cols:
        raise MeshIOError(f"{path}: missing grad_mag / is_opening properties")
    verts = _vertex_xyz(cols, path)
    faces = data.get("face", {}).get("vertex_indices")
    if faces is None:
        faces = np.zeros((0, 3), dtype=np.int32)
    mesh = TriMesh(verts, faces.astype(np.int32),
                   nocs_labels=_optional_triple(cols, "nocs"))
    return (
        mesh,
        cols["grad_mag"].astype(np.float64),
        cols["is_opening"].astype(bool),
    )
