"""Batch command-line front end.

Every command is a pure function of (inputs, flags, seed): identical
invocations produce bit-identical outputs, and each invocation drops a JSON
run manifest beside its outputs. Exit codes: 0 success, 1 computation
error, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .extract import classify_openings, default_opening_threshold, \
    marching_cubes, strip_openings
from .mesh import MeshError, PointCloud, TriMesh, validate
from .meshio import load_cloud, load_mesh, save_labeled_mesh, save_mesh
from .metrics import align_rotation_z, chamfer, correspondence_distance, \
    nocs_error, sample_surface
from .nocs import NocsTransform, fit_category_transform, to_nocs
from .scatter import assemble_features, scatter_max
from .volb import load_volume, save_volume
from .volume import ScalarGrid, canonical_grid_spec, grid_spec_for_bounds, \
    rasterize_occupancy, rasterize_tdf, rasterize_tsdf, rasterize_wnf
from .winding import WindingQueryParams, build_accel


def _write_manifest(out_path: str, command: str, params: dict, inputs, outputs,
                    seed: int, t0: float) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "seed": seed,
        "toolkit_version": __version__,
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    path = out_path + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


@click.group()
@click.option("--threads", type=int, default=None,
              help="Cap worker threads (does not affect results).")
def main(threads):
    """Winding-number-field toolkit: canonical-space dataset preparation
    and evaluation."""
    if threads is not None:
        os.environ["WNFKIT_THREADS"] = str(threads)


@main.command()
@click.argument("meshes", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--category", required=True, help="Category id for the transform.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def normalize(meshes, category, out_dir):
    """Fit the category unit-cube transform and write normalized meshes."""
    t0 = time.monotonic()
    loaded = [load_mesh(p) for p in meshes]
    transform = fit_category_transform(loaded, category_id=category)
    os.makedirs(out_dir, exist_ok=True)
    tf_path = os.path.join(out_dir, f"{category}_transform.json")
    with open(tf_path, "w") as fh:
        fh.write(transform.to_json() + "\n")
    outputs = [tf_path]
    for path, mesh in zip(meshes, loaded):
        normalized = TriMesh(
            to_nocs(transform, mesh.vertices),
            mesh.triangles,
            frame="canonical",
            nocs_labels=mesh.nocs_labels,
        )
        stem = os.path.splitext(os.path.basename(path))[0]
        out_path = os.path.join(out_dir, f"{stem}_nocs.ply")
        save_mesh(normalized, out_path)
        outputs.append(out_path)
    _write_manifest(tf_path, "normalize", {"category": category},
                    meshes, outputs, 0, t0)
    click.echo(f"scale={transform.scale:.6g} -> {tf_path}")


@main.command()
@click.argument("mesh_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["wnf", "occ", "tsdf", "tdf"]),
              default="wnf", show_default=True)
@click.option("--dims", type=int, default=None,
              help="Grid resolution per axis [default: 128; 64 for occ].")
@click.option("--trunc", type=float, default=None,
              help="Truncation distance for tsdf/tdf [default: 10 voxels].")
@click.option("--beta", type=float, default=2.0, show_default=True,
              help="Far-field accuracy parameter.")
@click.option("--canonical/--fit-bbox", default=False,
              help="Place the grid over the unit cube instead of the mesh bbox.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def field(mesh_path, kind, dims, trunc, beta, canonical, out_path):
    """Rasterize a mesh into a scalar field volume (VOLB)."""
    t0 = time.monotonic()
    mesh = load_mesh(mesh_path)
    if dims is None:
        dims = 64 if kind == "occ" else 128
    spec = (
        canonical_grid_spec(dims)
        if canonical
        else grid_spec_for_bounds(mesh.bounds(), dims)
    )
    params = WindingQueryParams(beta=beta)
    if kind in ("tsdf", "tdf") and trunc is None:
        trunc = 10.0 * spec.voxel_size
    if kind == "wnf":
        grid = rasterize_wnf(mesh, spec, params=params)
    elif kind == "occ":
        grid = rasterize_occupancy(mesh, spec)
        rate = float(grid.data.mean())
        click.echo(f"occupancy rate: {rate:.4%}")
    elif kind == "tsdf":
        grid = rasterize_tsdf(mesh, spec, trunc, params=params)
    else:
        grid = rasterize_tdf(mesh, spec, trunc)
    save_volume(grid, out_path)
    _write_manifest(
        out_path, "field",
        {"kind": kind, "dims": dims, "trunc": trunc, "beta": beta,
         "canonical": canonical, "voxel_size": spec.voxel_size},
        [mesh_path], [out_path], 0, t0,
    )
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("volume_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--iso", type=float, default=0.5, show_default=True)
@click.option("--open-threshold", type=float, default=None,
              help="Gradient-magnitude opening threshold [default: 0.5/h].")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def extract(volume_path, iso, open_threshold, out_path):
    """Extract the isosurface and label surface/opening vertices (PLY)."""
    t0 = time.monotonic()
    grid = load_volume(volume_path)
    if not isinstance(grid, ScalarGrid):
        raise MeshError("extract expects a scalar volume, got a feature volume")
    if open_threshold is None:
        open_threshold = default_opening_threshold(grid)
    surface = marching_cubes(grid, iso)
    labeled = classify_openings(surface, grid, open_threshold, iso)
    save_labeled_mesh(labeled.mesh, labeled.grad_mag, labeled.is_opening, out_path)
    _write_manifest(
        out_path, "extract",
        {"iso": iso, "open_threshold": open_threshold},
        [volume_path], [out_path], 0, t0,
    )
    n_open = int(labeled.is_opening.sum())
    click.echo(
        f"{labeled.mesh.num_vertices} vertices "
        f"({n_open} opening) -> {out_path}"
    )


@main.command()
@click.argument("cloud_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--dims", type=int, default=32, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def scatter(cloud_path, dims, out_path):
    """Scatter per-point features into a canonical feature volume (VOLB)."""
    t0 = time.monotonic()
    cloud = load_cloud(cloud_path)
    volume = scatter_max(assemble_features(cloud), dims)
    save_volume(volume, out_path)
    _write_manifest(out_path, "scatter", {"dims": dims, "channels": volume.channels},
                    [cloud_path], [out_path], 0, t0)
    click.echo(f"channels={volume.channels} -> {out_path}")


@main.command("eval")
@click.argument("pred_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("gt_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", type=click.Choice(["chamfer", "corr", "nocs"]),
              default="chamfer", show_default=True)
@click.option("--n", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cm", is_flag=True,
              help="Report distances scaled by 100 (centimeters for meter meshes).")
@click.option("--symmetric", is_flag=True,
              help="nocs metric: also score against mirrored ground truth.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def eval_cmd(pred_path, gt_path, metric, n, seed, cm, symmetric, out_path):
    """Evaluate a predicted mesh against ground truth (JSON record)."""
    t0 = time.monotonic()
    pred = load_mesh(pred_path)
    gt = load_mesh(gt_path)
    scale = 100.0 if cm else 1.0
    units = "cm" if cm else "native"
    if metric == "chamfer":
        result = chamfer(pred, gt, n=n, seed=seed)
        value = result.symmetric_mean * scale
        extra = {
            "accuracy_mean": result.accuracy_mean * scale,
            "completeness_mean": result.completeness_mean * scale,
        }
    elif metric == "corr":
        value = correspondence_distance(pred, gt, n=n, seed=seed) * scale
        extra = {}
    else:
        ps = sample_surface(pred, n, seed)
        gs = sample_surface(gt, n, seed)
        if ps.nocs is None or gs.nocs is None:
            raise MeshError("nocs metric requires NOCS labels on both meshes")
        value = nocs_error(ps.nocs, gs.nocs, symmetric=symmetric)
        extra = {"symmetric": symmetric}
    record = {"metric": metric, "value": value, "n": n, "seed": seed,
              "units": units, **extra}
    text = json.dumps(record)
    click.echo(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
        _write_manifest(out_path, "eval",
                        {"metric": metric, "n": n, "cm": cm,
                         "symmetric": symmetric},
                        [pred_path, gt_path], [out_path], seed, t0)


@main.command()
@click.argument("pred_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("cloud_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--steps", type=int, default=72, show_default=True)
@click.option("--refine-iters", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-mesh", default=None, type=click.Path(dir_okay=False))
def align(pred_path, cloud_path, steps, refine_iters, seed, out_mesh):
    """Rotation alignment about the gravity (z) axis by Chamfer descent."""
    t0 = time.monotonic()
    pred = load_mesh(pred_path)
    observed = load_cloud(cloud_path)
    angle, aligned = align_rotation_z(
        pred, observed, coarse_steps=steps, refine_iters=refine_iters, seed=seed
    )
    record = {"angle_rad": angle, "angle_deg": float(np.degrees(angle)),
              "steps": steps, "seed": seed}
    click.echo(json.dumps(record))
    if out_mesh:
        save_mesh(aligned, out_mesh)
        _write_manifest(out_mesh, "align",
                        {"steps": steps, "refine_iters": refine_iters},
                        [pred_path, cloud_path], [out_mesh], seed, t0)


def run() -> None:  # pragma: no cover - exercised via subprocess in tests
    try:
        main.main(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except (MeshError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
