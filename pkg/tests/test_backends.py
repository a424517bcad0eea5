"""Compiled-core vs numpy-fallback equivalence and determinism."""

import os
import subprocess
import sys

import numpy as np
import pytest

import shapes
from wnfkit import backend
from wnfkit.winding import (
    WindingQueryParams,
    build_accel,
    unsigned_distance,
    winding_batch,
    winding_exact_many,
)

needs_compiled = pytest.mark.skipif(
    not backend.compiled_available(), reason="compiled core not built"
)


def _kernels_agree(mesh, queries, atol):
    accel = build_accel(mesh, leaf_size=8)
    core = backend.get()
    pure = backend.get_pure()
    args = (
        accel.node_left, accel.node_right, accel.node_start, accel.node_count,
        accel.node_centroid, accel.node_dipole, accel.node_radius,
        accel.v0, accel.v1, accel.v2,
    )
    fast_core = core.winding_fast_batch(queries, *args, 2.0, 2)
    fast_pure = pure.winding_fast_batch(queries, *args, 2.0, 1)
    np.testing.assert_allclose(fast_core, fast_pure, atol=atol)

    exact_core = core.winding_exact_batch(queries, accel.v0, accel.v1, accel.v2, 2)
    exact_pure = pure.winding_exact_batch(queries, accel.v0, accel.v1, accel.v2, 1)
    np.testing.assert_allclose(exact_core, exact_pure, atol=atol)

    d_core = core.udist_batch(
        queries, accel.node_left, accel.node_right, accel.node_bbmin,
        accel.node_bbmax, accel.node_start, accel.node_count,
        accel.v0, accel.v1, accel.v2, 2,
    )
    d_pure = pure.udist_batch(
        queries, accel.node_left, accel.node_right, accel.node_bbmin,
        accel.node_bbmax, accel.node_start, accel.node_count,
        accel.v0, accel.v1, accel.v2, 1,
    )
    np.testing.assert_allclose(d_core, d_pure, atol=atol)


@needs_compiled
class TestBackendEquivalence:
    def test_sphere(self):
        rng = np.random.default_rng(0)
        _kernels_agree(
            shapes.icosphere(subdivisions=2), rng.standard_normal((200, 3)), 1e-10
        )

    def test_open_shell(self):
        rng = np.random.default_rng(1)
        _kernels_agree(
            shapes.wavy_shell(n=21), rng.random((200, 3)) * 1.4 - 0.2, 1e-10
        )

    def test_cube_near_surface(self):
        rng = np.random.default_rng(2)
        q = rng.random((100, 3))
        q[:, 2] = 1.0 + rng.uniform(-1e-6, 1e-6, 100)
        _kernels_agree(shapes.cube(), q, 1e-8)


class TestDeterminism:
    def test_winding_repeat_bitwise(self):
        mesh = shapes.wavy_shell(n=21)
        accel = build_accel(mesh)
        q = np.random.default_rng(3).random((300, 3))
        a = winding_batch(accel, q, WindingQueryParams(beta=2.0))
        b = winding_batch(accel, q, WindingQueryParams(beta=2.0))
        np.testing.assert_array_equal(a, b)

    def test_thread_count_invariant_bitwise(self):
        # Per-query work is independent, so results cannot depend on the
        # number of worker threads.
        mesh = shapes.wavy_shell(n=21)
        q = np.random.default_rng(4).random((300, 3))
        results = []
        for nt in ("1", "4"):
            os.environ["WNFKIT_THREADS"] = nt
            try:
                accel = build_accel(mesh)
                results.append(winding_batch(accel, q))
            finally:
                del os.environ["WNFKIT_THREADS"]
        np.testing.assert_array_equal(results[0], results[1])

    def test_udist_repeat_bitwise(self):
        accel = build_accel(shapes.icosphere(subdivisions=2))
        q = np.random.default_rng(5).standard_normal((200, 3))
        np.testing.assert_array_equal(
            unsigned_distance(accel, q), unsigned_distance(accel, q)
        )


class TestForcedFallback:
    def test_env_var_forces_python_backend(self):
        code = (
            "import wnfkit.backend as b; print(b.backend_name())"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={**os.environ, "WNFKIT_PURE_PYTHON": "1"},
            capture_output=True, text=True, check=True,
        )
        assert out.stdout.strip() == "python"

    def test_fallback_end_to_end_matches(self):
        # Full winding query pipeline under the forced fallback agrees with
        # the in-process (possibly compiled) backend.
        mesh = shapes.icosphere(subdivisions=1)
        accel = build_accel(mesh)
        q = np.random.default_rng(6).standard_normal((50, 3))
        here = winding_exact_many(mesh, q)
        pure = backend.get_pure().winding_exact_batch(q, accel.v0, accel.v1, accel.v2)
        np.testing.assert_allclose(here, pure, atol=1e-10)
