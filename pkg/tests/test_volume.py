import numpy as np
import pytest

import shapes
from wnfkit.volb import VolbError, load_volume, save_volume
from wnfkit.volume import (
    GridSpec,
    ScalarGrid,
    canonical_grid_spec,
    gradient,
    grid_spec_for_bounds,
    merge_volume,
    rasterize_occupancy,
    rasterize_tdf,
    rasterize_tsdf,
    rasterize_wnf,
    slice_volume,
    trilinear_sample,
)
from wnfkit.winding import build_accel, unsigned_distance, winding_exact_many


def linear_grid(spec: GridSpec, coeffs=(2.0, -3.0, 0.5), const=1.0) -> ScalarGrid:
    """Grid sampling an affine field; trilinear interpolation reproduces it
    exactly."""
    centers = spec.voxel_centers()
    vals = centers @ np.asarray(coeffs) + const
    nx, ny, nz = spec.dims
    data = vals.reshape(nz, ny, nx).transpose(2, 1, 0)
    return ScalarGrid(spec=spec, kind="wnf", data=data)


class TestGridSpec:
    def test_canonical_voxel_size_is_exact(self):
        spec = canonical_grid_spec(128, margin=4)
        assert spec.voxel_size == 1.0 / 120.0
        np.testing.assert_allclose(spec.origin, -3.5 / 120.0)

    def test_canonical_covers_unit_cube(self):
        spec = canonical_grid_spec(128)
        assert spec.covers(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))

    def test_voxel_centers_x_fastest(self):
        spec = GridSpec((3, 2, 2), np.zeros(3), 1.0)
        c = spec.voxel_centers()
        assert c.shape == (12, 3)
        np.testing.assert_array_equal(c[0], [0, 0, 0])
        np.testing.assert_array_equal(c[1], [1, 0, 0])
        np.testing.assert_array_equal(c[3], [0, 1, 0])
        np.testing.assert_array_equal(c[6], [0, 0, 1])

    def test_fit_bounds_isotropic_and_covering(self):
        bounds = np.array([[0.0, -1.0, 2.0], [3.0, 1.0, 2.5]])
        spec = grid_spec_for_bounds(bounds, dims=64)
        assert spec.covers(bounds)
        assert spec.voxel_size == pytest.approx(3.0 / (64 - 8))

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(ValueError, match="zero extent"):
            grid_spec_for_bounds(np.zeros((2, 3)))

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError, match="dims"):
            GridSpec((1, 4, 4), np.zeros(3), 0.1)


class TestScalarGrid:
    def test_shape_mismatch_rejected(self):
        spec = GridSpec((4, 4, 4), np.zeros(3), 0.1)
        with pytest.raises(ValueError, match="shape"):
            ScalarGrid(spec=spec, kind="wnf", data=np.zeros((4, 4, 3)))

    def test_tsdf_requires_trunc(self):
        spec = GridSpec((4, 4, 4), np.zeros(3), 0.1)
        with pytest.raises(ValueError, match="truncation"):
            ScalarGrid(spec=spec, kind="tsdf", data=np.zeros((4, 4, 4)))

    def test_unknown_kind_rejected(self):
        spec = GridSpec((4, 4, 4), np.zeros(3), 0.1)
        with pytest.raises(ValueError, match="kind"):
            ScalarGrid(spec=spec, kind="sdf", data=np.zeros((4, 4, 4)))


class TestRasterizeWnf:
    def test_matches_exact_winding_at_centers(self):
        mesh = shapes.cube(lo=0.2, hi=0.8)
        spec = canonical_grid_spec(24, margin=2)
        grid = rasterize_wnf(mesh, spec)
        centers = spec.voxel_centers()
        exact = winding_exact_many(mesh, centers)
        nx, ny, nz = spec.dims
        expected = exact.reshape(nz, ny, nx).transpose(2, 1, 0)
        np.testing.assert_allclose(grid.data, expected, atol=0.01)

    def test_indexing_convention(self):
        # Off-center cube: data[i, j, k] must correspond to the point
        # origin + (i, j, k) h, not a transposed layout.
        mesh = shapes.cube(lo=0.1, hi=0.4)
        spec = canonical_grid_spec(20, margin=2)
        grid = rasterize_wnf(mesh, spec)
        inside = np.array([0.25, 0.25, 0.25])
        idx = np.round((inside - spec.origin) / spec.voxel_size).astype(int)
        assert grid.data[tuple(idx)] == pytest.approx(1.0, abs=0.01)
        assert grid.data[tuple(idx[::-1] + np.array([8, 0, 0]))] == pytest.approx(
            0.0, abs=0.01
        )

    def test_uncovered_mesh_warns(self):
        spec = GridSpec((8, 8, 8), np.zeros(3), 0.01)
        with pytest.warns(UserWarning, match="cover"):
            rasterize_wnf(shapes.cube(), spec)


class TestRasterizeOccupancy:
    def test_plate_occupies_exactly_two_layers(self):
        # A plane exactly between two voxel-center layers touches both.
        spec = GridSpec((12, 12, 12), np.full(3, -0.2), 0.1)
        mesh = shapes.plate(side=0.8, z=0.45, res=6)
        grid = rasterize_occupancy(mesh, spec)
        occupied_z = np.where(grid.data.any(axis=(0, 1)))[0]
        np.testing.assert_array_equal(occupied_z, [6, 7])

    def test_surface_samples_land_in_occupied_voxels(self):
        mesh = shapes.wavy_shell(n=21)
        spec = canonical_grid_spec(32, margin=2)
        grid = rasterize_occupancy(mesh, spec)
        from wnfkit.metrics import sample_surface

        pts = sample_surface(mesh, 2000, seed=0).points
        idx = np.round((pts - spec.origin) / spec.voxel_size).astype(int)
        assert np.all(grid.data[idx[:, 0], idx[:, 1], idx[:, 2]] == 1.0)

    def test_occupied_voxels_near_surface(self):
        # Necessary condition: an occupied voxel's center is within half a
        # cube diagonal of the surface.
        mesh = shapes.icosphere(radius=0.3, center=(0.5, 0.5, 0.5))
        spec = canonical_grid_spec(32, margin=2)
        grid = rasterize_occupancy(mesh, spec)
        occ_idx = np.argwhere(grid.data > 0)
        centers = spec.origin + occ_idx * spec.voxel_size
        d = unsigned_distance(build_accel(mesh), centers)
        assert d.max() <= spec.voxel_size * np.sqrt(3) / 2 + 1e-9

    def test_binary_values(self):
        grid = rasterize_occupancy(shapes.cube(0.3, 0.7), canonical_grid_spec(16, 1))
        assert set(np.unique(grid.data)) <= {0.0, 1.0}

    def test_sparse_for_thin_shell(self):
        mesh = shapes.wavy_shell(n=21)
        grid = rasterize_occupancy(mesh, canonical_grid_spec(64, margin=2))
        rate = grid.data.mean()
        assert 0.0005 < rate < 0.05


class TestRasterizeDistance:
    def test_tsdf_cube_analytic(self):
        mesh = shapes.cube(lo=0.25, hi=0.75)
        spec = canonical_grid_spec(40, margin=2)
        trunc = 0.2
        grid = rasterize_tsdf(mesh, spec, trunc)
        centers = spec.voxel_centers()
        # Analytic signed distance to an axis-aligned box.
        q = np.abs(centers - 0.5) - 0.25
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        sdf = np.clip(outside + inside, -trunc, trunc)
        nx, ny, nz = spec.dims
        expected = sdf.reshape(nz, ny, nx).transpose(2, 1, 0)
        np.testing.assert_allclose(grid.data, expected, atol=1e-5)

    def test_tdf_is_abs_of_tsdf_for_closed_mesh(self):
        mesh = shapes.icosphere(radius=0.3, center=(0.5, 0.5, 0.5), subdivisions=2)
        spec = canonical_grid_spec(24, margin=2)
        tsdf = rasterize_tsdf(mesh, spec, 0.15)
        tdf = rasterize_tdf(mesh, spec, 0.15)
        np.testing.assert_allclose(tdf.data, np.abs(tsdf.data), atol=1e-6)
        assert np.all(tdf.data >= 0)

    def test_tdf_well_defined_for_open_patch(self):
        mesh = shapes.square_patch(half_side=0.3)
        spec = grid_spec_for_bounds(
            np.array([[-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]]), dims=16, margin=1
        )
        grid = rasterize_tdf(mesh, spec, 0.4)
        assert np.all(np.isfinite(grid.data))
        assert np.all(grid.data >= 0)

    def test_trunc_caps_values(self):
        mesh = shapes.cube(0.4, 0.6)
        grid = rasterize_tdf(mesh, canonical_grid_spec(24, 2), 0.05)
        assert grid.data.max() == pytest.approx(0.05, abs=1e-7)

    def test_nonpositive_trunc_rejected(self):
        with pytest.raises(ValueError, match="trunc"):
            rasterize_tsdf(shapes.cube(), canonical_grid_spec(16, 1), 0.0)


class TestSampling:
    def test_trilinear_reproduces_affine_field(self):
        spec = GridSpec((8, 8, 8), np.array([-0.1, 0.2, 0.0]), 0.05)
        grid = linear_grid(spec)
        rng = np.random.default_rng(0)
        lo, hi = spec.hull()
        pts = rng.uniform(lo, hi, size=(200, 3))
        expected = pts @ np.array([2.0, -3.0, 0.5]) + 1.0
        np.testing.assert_allclose(trilinear_sample(grid, pts), expected, atol=1e-4)

    def test_exact_at_voxel_centers(self):
        spec = GridSpec((6, 6, 6), np.zeros(3), 0.2)
        grid = linear_grid(spec)
        centers = spec.voxel_centers()
        vals = trilinear_sample(grid, centers)
        nx, ny, nz = spec.dims
        np.testing.assert_allclose(
            vals.reshape(nz, ny, nx).transpose(2, 1, 0), grid.data, atol=1e-6
        )

    def test_scalar_point_returns_float(self):
        spec = GridSpec((4, 4, 4), np.zeros(3), 1.0)
        grid = linear_grid(spec)
        out = trilinear_sample(grid, [1.5, 1.5, 1.5])
        assert isinstance(out, float)

    def test_outside_hull_raises(self):
        spec = GridSpec((4, 4, 4), np.zeros(3), 1.0)
        grid = linear_grid(spec)
        with pytest.raises(ValueError, match="hull"):
            trilinear_sample(grid, [-0.5, 1.0, 1.0])

    def test_gradient_of_affine_field(self):
        spec = GridSpec((8, 8, 8), np.zeros(3), 0.1)
        grid = linear_grid(spec, coeffs=(1.5, -0.5, 4.0))
        pts = np.array([[0.3, 0.3, 0.3], [0.21, 0.44, 0.39]])
        g = gradient(grid, pts)
        np.testing.assert_allclose(g, [[1.5, -0.5, 4.0]] * 2, atol=1e-4)


class TestSliceMerge:
    def test_roundtrip_bitwise(self):
        spec = canonical_grid_spec(16, margin=1)
        rng = np.random.default_rng(1)
        grid = ScalarGrid(
            spec=spec, kind="wnf",
            data=rng.standard_normal(spec.dims).astype(np.float32),
        )
        back = merge_volume(slice_volume(grid))
        np.testing.assert_array_equal(back.data, grid.data)
        np.testing.assert_array_equal(back.spec.origin, grid.spec.origin)
        assert back.spec.dims == grid.spec.dims

    def test_octant_origins_and_order(self):
        spec = GridSpec((4, 4, 4), np.zeros(3), 1.0)
        data = np.arange(64, dtype=np.float32).reshape(4, 4, 4)
        parts = slice_volume(ScalarGrid(spec=spec, kind="wnf", data=data))
        assert len(parts) == 8
        # Octant n = bx + 2 by + 4 bz.
        np.testing.assert_array_equal(parts[1].spec.origin, [2, 0, 0])
        np.testing.assert_array_equal(parts[2].spec.origin, [0, 2, 0])
        np.testing.assert_array_equal(parts[4].spec.origin, [0, 0, 2])
        np.testing.assert_array_equal(parts[0].data, data[:2, :2, :2])
        np.testing.assert_array_equal(parts[7].data, data[2:, 2:, 2:])

    def test_128_slices_to_64(self):
        spec = canonical_grid_spec(128)
        grid = ScalarGrid(
            spec=spec, kind="wnf", data=np.zeros(spec.dims, dtype=np.float32)
        )
        parts = slice_volume(grid)
        assert all(p.spec.dims == (64, 64, 64) for p in parts)

    def test_odd_dims_rejected(self):
        spec = GridSpec((3, 4, 4), np.zeros(3), 1.0)
        grid = ScalarGrid(spec=spec, kind="wnf", data=np.zeros((3, 4, 4)))
        with pytest.raises(ValueError, match="divisible"):
            slice_volume(grid)

    def test_merge_needs_eight(self):
        with pytest.raises(ValueError, match="8"):
            merge_volume([])


class TestVolb:
    def _grid(self, kind="wnf", trunc=None):
        spec = GridSpec((5, 4, 3), np.array([0.1, -0.2, 0.3]), 0.25)
        rng = np.random.default_rng(2)
        data = rng.standard_normal(spec.dims).astype(np.float32)
        return ScalarGrid(spec=spec, kind=kind, data=data, trunc=trunc)

    def test_roundtrip_bitwise(self, tmp_path):
        grid = self._grid()
        p1 = str(tmp_path / "a.volb")
        p2 = str(tmp_path / "b.volb")
        save_volume(grid, p1)
        back = load_volume(p1)
        np.testing.assert_array_equal(back.data, grid.data)
        np.testing.assert_array_equal(back.spec.origin, grid.spec.origin)
        assert back.spec.voxel_size == grid.spec.voxel_size
        assert back.kind == grid.kind
        save_volume(back, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_trunc_persisted(self, tmp_path):
        grid = self._grid(kind="tsdf", trunc=0.125)
        path = str(tmp_path / "t.volb")
        save_volume(grid, path)
        assert load_volume(path).trunc == 0.125

    def test_header_is_single_json_line(self, tmp_path):
        import json

        path = str(tmp_path / "h.volb")
        save_volume(self._grid(), path)
        header = open(path, "rb").readline()
        doc = json.loads(header)
        assert doc["dims"] == [5, 4, 3]
        assert doc["kind"] == "wnf"

    def test_payload_is_x_fastest(self, tmp_path):
        spec = GridSpec((2, 2, 2), np.zeros(3), 1.0)
        data = np.zeros((2, 2, 2), dtype=np.float32)
        data[1, 0, 0] = 7.0  # second value in x-fastest order
        path = str(tmp_path / "x.volb")
        save_volume(ScalarGrid(spec=spec, kind="wnf", data=data), path)
        with open(path, "rb") as fh:
            fh.readline()
            flat = np.frombuffer(fh.read(), dtype="<f4")
        np.testing.assert_array_equal(flat, [0, 7, 0, 0, 0, 0, 0, 0])

    def test_bad_header_raises(self, tmp_path):
        path = str(tmp_path / "bad.volb")
        with open(path, "wb") as fh:
            fh.write(b"not json\n\x00\x00")
        with pytest.raises(VolbError, match="header"):
            load_volume(path)

    def test_short_payload_raises(self, tmp_path):
        path = str(tmp_path / "short.volb")
        save_volume(self._grid(), path)
        blob = open(path, "rb").read()
        with open(path, "wb") as fh:
            fh.write(blob[:-4])
        with pytest.raises(VolbError, match="bytes"):
            load_volume(path)

    def test_feature_volume_roundtrip(self, tmp_path):
        from wnfkit.scatter import FeatureVolume

        rng = np.random.default_rng(3)
        data = rng.standard_normal((4, 4, 4, 6)).astype(np.float32)
        vol = FeatureVolume(
            dims=4, channels=6, data=data, occupancy_mask=np.any(data != 0, axis=-1)
        )
        path = str(tmp_path / "f.volb")
        save_volume(vol, path)
        back = load_volume(path)
        assert isinstance(back, FeatureVolume)
        assert back.channels == 6
        np.testing.assert_array_equal(back.data, vol.data)
        np.testing.assert_array_equal(back.occupancy_mask, vol.occupancy_mask)
