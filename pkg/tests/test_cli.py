"""End-to-end command-line tests run through the installed entry point."""

import json
import subprocess
import sys

import numpy as np
import pytest

import shapes
from wnfkit.mesh import PointCloud
from wnfkit.meshio import load_labeled_mesh, load_mesh, save_cloud, save_mesh
from wnfkit.metrics import rotate_z, sample_surface
from wnfkit.volb import load_volume

CLI = [sys.executable, "-c", "from wnfkit.cli import run; run()"]


def run_cli(*args, check=True):
    proc = subprocess.run(
        CLI + [str(a) for a in args], capture_output=True, text=True
    )
    if check and proc.returncode != 0:
        raise AssertionError(
            f"exit {proc.returncode}\nstdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


@pytest.fixture()
def cube_path(tmp_path):
    path = str(tmp_path / "cube.ply")
    save_mesh(shapes.cube(0.3, 0.7), path)
    return path


class TestNormalize:
    def test_fit_and_outputs(self, tmp_path):
        m1 = str(tmp_path / "a.ply")
        m2 = str(tmp_path / "b.ply")
        save_mesh(shapes.cube(0.0, 2.0), m1)
        save_mesh(shapes.cube(0.0, 1.0), m2)
        out = tmp_path / "norm"
        proc = run_cli("normalize", m1, m2, "--category", "dress",
                       "--out-dir", out)
        assert "scale=0.5" in proc.stdout
        doc = json.loads((out / "dress_transform.json").read_text())
        assert doc["scale"] == 0.5
        normalized = load_mesh(str(out / "a_nocs.ply"))
        assert normalized.vertices.min() >= -1e-6
        assert normalized.vertices.max() <= 1 + 1e-6
        manifest = json.loads(
            (out / "dress_transform.json.manifest.json").read_text()
        )
        assert manifest["command"] == "normalize"
        assert len(manifest["outputs"]) == 3

    def test_missing_input_is_usage_error(self, tmp_path):
        proc = run_cli("normalize", "--category", "x", "--out-dir",
                       tmp_path, check=False)
        assert proc.returncode == 2

    def test_nonexistent_file_is_usage_error(self, tmp_path):
        proc = run_cli("normalize", tmp_path / "missing.obj", "--category",
                       "x", "--out-dir", tmp_path, check=False)
        assert proc.returncode == 2


class TestField:
    def test_wnf_cube_interior(self, cube_path, tmp_path):
        out = tmp_path / "cube.volb"
        run_cli("field", cube_path, "--kind", "wnf", "--dims", "32",
                "--canonical", "--out", out)
        grid = load_volume(str(out))
        assert grid.kind == "wnf"
        assert grid.spec.dims == (32, 32, 32)
        center = grid.data[16, 16, 16]
        assert center == pytest.approx(1.0, abs=0.01)

    def test_occupancy_rate_printed(self, tmp_path):
        mesh_path = str(tmp_path / "shell.ply")
        save_mesh(shapes.wavy_shell(n=21), mesh_path)
        out = tmp_path / "occ.volb"
        proc = run_cli("field", mesh_path, "--kind", "occ", "--dims", "64",
                       "--canonical", "--out", out)
        assert "occupancy rate" in proc.stdout
        rate = float(proc.stdout.split("occupancy rate:")[1].split("%")[0])
        assert rate < 5.0

    def test_tsdf_default_trunc_in_manifest(self, cube_path, tmp_path):
        out = tmp_path / "t.volb"
        run_cli("field", cube_path, "--kind", "tsdf", "--dims", "24",
                "--canonical", "--out", out)
        manifest = json.loads((tmp_path / "t.volb.manifest.json").read_text())
        h = manifest["parameters"]["voxel_size"]
        assert manifest["parameters"]["trunc"] == pytest.approx(10 * h)
        assert load_volume(str(out)).trunc == pytest.approx(10 * h)

    def test_deterministic_bitwise(self, cube_path, tmp_path):
        o1, o2 = tmp_path / "r1.volb", tmp_path / "r2.volb"
        for o in (o1, o2):
            run_cli("field", cube_path, "--dims", "24", "--canonical",
                    "--out", o)
        assert o1.read_bytes() == o2.read_bytes()

    def test_threads_flag_does_not_change_output(self, cube_path, tmp_path):
        o1, o2 = tmp_path / "t1.volb", tmp_path / "t2.volb"
        run_cli("--threads", "1", "field", cube_path, "--dims", "24",
                "--canonical", "--out", o1)
        run_cli("--threads", "4", "field", cube_path, "--dims", "24",
                "--canonical", "--out", o2)
        assert o1.read_bytes() == o2.read_bytes()


class TestExtract:
    def test_cylinder_openings_marked(self, tmp_path):
        mesh_path = str(tmp_path / "cyl.ply")
        save_mesh(shapes.capless_cylinder(), mesh_path)
        vol = tmp_path / "cyl.volb"
        run_cli("field", mesh_path, "--dims", "96", "--canonical", "--out", vol)
        out = tmp_path / "cyl_surface.ply"
        proc = run_cli("extract", vol, "--out", out)
        assert "opening" in proc.stdout
        mesh, grad, opening = load_labeled_mesh(str(out))
        assert opening.any() and (~opening).any()
        assert mesh.num_vertices == len(grad) == len(opening)

    def test_closed_cube_no_openings(self, cube_path, tmp_path):
        vol = tmp_path / "c.volb"
        run_cli("field", cube_path, "--dims", "48", "--canonical", "--out", vol)
        out = tmp_path / "c_surf.ply"
        run_cli("extract", vol, "--out", out)
        _, _, opening = load_labeled_mesh(str(out))
        assert opening.sum() == 0

    def test_feature_volume_rejected(self, tmp_path):
        cloud_path = str(tmp_path / "c.ply")
        rng = np.random.default_rng(0)
        save_cloud(
            PointCloud(points=rng.random((10, 3)), nocs=rng.random((10, 3)),
                       confidence=rng.random((10, 3))),
            cloud_path,
        )
        vol = tmp_path / "f.volb"
        run_cli("scatter", cloud_path, "--out", vol)
        proc = run_cli("extract", vol, "--out", tmp_path / "x.ply", check=False)
        assert proc.returncode == 1
        assert "scalar" in proc.stderr


class TestScatter:
    def test_channels_and_shuffle_invariance(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 200
        cloud = PointCloud(
            points=rng.random((n, 3)), nocs=rng.random((n, 3)),
            confidence=rng.random((n, 3)), features=rng.random((n, 4)),
        )
        perm = rng.permutation(n)
        shuffled = PointCloud(
            points=cloud.points[perm], nocs=cloud.nocs[perm],
            confidence=cloud.confidence[perm], features=cloud.features[perm],
        )
        p1, p2 = str(tmp_path / "a.ply"), str(tmp_path / "b.ply")
        save_cloud(cloud, p1)
        save_cloud(shuffled, p2)
        o1, o2 = tmp_path / "a.volb", tmp_path / "b.volb"
        proc = run_cli("scatter", p1, "--out", o1)
        assert "channels=13" in proc.stdout
        run_cli("scatter", p2, "--out", o2)
        assert o1.read_bytes() == o2.read_bytes()
        vol = load_volume(str(o1))
        assert vol.channels == 13
        assert vol.dims == 32


class TestEval:
    def _two_meshes(self, tmp_path):
        a = str(tmp_path / "a.ply")
        b = str(tmp_path / "b.ply")
        save_mesh(shapes.icosphere(0.3, (0.5, 0.5, 0.5), 2), a)
        save_mesh(shapes.icosphere(0.32, (0.5, 0.5, 0.5), 2), b)
        return a, b

    def test_self_chamfer_zero(self, cube_path):
        proc = run_cli("eval", cube_path, cube_path, "--n", "1000")
        record = json.loads(proc.stdout)
        assert record["value"] == 0.0
        assert record["metric"] == "chamfer"
        assert record["units"] == "native"

    def test_cm_scaling(self, tmp_path):
        a, b = self._two_meshes(tmp_path)
        native = json.loads(run_cli("eval", a, b, "--n", "1000").stdout)
        cm = json.loads(run_cli("eval", a, b, "--n", "1000", "--cm").stdout)
        assert cm["value"] == pytest.approx(100 * native["value"], rel=1e-9)
        assert cm["units"] == "cm"

    def test_corr_missing_labels_fails(self, tmp_path):
        a, b = self._two_meshes(tmp_path)
        proc = run_cli("eval", a, b, "--metric", "corr", check=False)
        assert proc.returncode == 1

    def test_nocs_metric_symmetric(self, tmp_path):
        gt = shapes.two_lobe_labeled()
        mirrored = gt.nocs_labels.copy()
        mirrored[:, 0] = 1.0 - mirrored[:, 0]
        import wnfkit.mesh as m

        pred = m.TriMesh(gt.vertices, gt.triangles, nocs_labels=mirrored)
        pg = str(tmp_path / "gt.ply")
        pp = str(tmp_path / "pred.ply")
        save_mesh(gt, pg)
        save_mesh(pred, pp)
        plain = json.loads(
            run_cli("eval", pp, pg, "--metric", "nocs", "--n", "2000").stdout
        )
        sym = json.loads(
            run_cli("eval", pp, pg, "--metric", "nocs", "--n", "2000",
                    "--symmetric").stdout
        )
        assert plain["value"] > 0.1
        assert sym["value"] < 1e-6

    def test_repeat_identical_json(self, tmp_path):
        a, b = self._two_meshes(tmp_path)
        s1 = run_cli("eval", a, b, "--seed", "5").stdout
        s2 = run_cli("eval", a, b, "--seed", "5").stdout
        assert s1 == s2

    def test_record_written_with_manifest(self, tmp_path):
        a, b = self._two_meshes(tmp_path)
        out = tmp_path / "result.json"
        run_cli("eval", a, b, "--n", "500", "--out", out)
        record = json.loads(out.read_text())
        assert record["n"] == 500
        manifest = json.loads((tmp_path / "result.json.manifest.json").read_text())
        assert manifest["command"] == "eval"
        assert manifest["seed"] == 0


class TestAlignCmd:
    def test_synthetic_rotation_recovered(self, tmp_path):
        mesh = shapes.wavy_shell(n=15)
        mesh_path = str(tmp_path / "m.ply")
        save_mesh(mesh, mesh_path)
        pts = rotate_z(sample_surface(mesh, 2000, 0).points, np.radians(37))
        cloud_path = str(tmp_path / "obs.ply")
        save_cloud(PointCloud(points=pts), cloud_path)
        out_mesh = tmp_path / "aligned.ply"
        proc = run_cli("align", mesh_path, cloud_path, "--out-mesh", out_mesh)
        record = json.loads(proc.stdout)
        assert abs(record["angle_deg"] - 37.0) < 1.0
        aligned = load_mesh(str(out_mesh))
        np.testing.assert_allclose(
            aligned.vertices,
            rotate_z(mesh.vertices, record["angle_rad"]),
            atol=1e-6,
        )

    def test_bad_usage_exit_2(self):
        proc = run_cli("align", check=False)
        assert proc.returncode == 2


class TestExitCodes:
    def test_unknown_command(self):
        proc = run_cli("frobnicate", check=False)
        assert proc.returncode == 2

    def test_corrupt_input_exit_1(self, tmp_path):
        bad = tmp_path / "bad.ply"
        bad.write_bytes(b"garbage\n")
        proc = run_cli("field", bad, "--out", tmp_path / "x.volb", check=False)
        assert proc.returncode == 1
        assert "error" in proc.stderr.lower() or "magic" in proc.stderr
