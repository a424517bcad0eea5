#!/usr/bin/env python3
"""Compare the compiled kernel backend against the numpy fallback.

Runs the three kernel entry points (exact winding, hierarchical winding,
unsigned distance) over a garment-like open shell and reports wall time and
agreement. The fallback is exercised in-process through the backend module,
so a single run covers both paths.

Usage: python3 benchmarks/bench_backends.py [--triangles N] [--queries Q]
"""

import argparse
import time

import numpy as np

from wnfkit import backend
from wnfkit.mesh import TriMesh
from wnfkit.winding import build_accel


def shell(n: int) -> TriMesh:
    xs = np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    zz = 0.15 * (np.sin(2.5 * np.pi * xx) * np.cos(1.5 * np.pi * yy)
                 + 0.4 * np.sin(4.0 * np.pi * yy))
    verts = np.stack([xx, yy, zz + 0.5], axis=-1).reshape(-1, 3)
    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j
            faces += [[a, a + 1, a + n + 1], [a, a + n + 1, a + n]]
    return TriMesh(verts, np.asarray(faces, dtype=np.int32))


def timed(fn, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--triangles", type=int, default=10_000,
                    help="approximate triangle count of the test shell")
    ap.add_argument("--queries", type=int, default=20_000)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    n = max(3, int(np.sqrt(args.triangles / 2)) + 1)
    mesh = shell(n)
    accel = build_accel(mesh)
    rng = np.random.default_rng(0)
    q = rng.random((args.queries, 3)) * 1.6 - 0.3

    core = backend.get()
    pure = backend.get_pure()
    print(f"mesh: {mesh.num_triangles} triangles, "
          f"{args.queries} queries, {args.threads} threads")
    print(f"active backend: {backend.backend_name()}")
    if not backend.compiled_available():
        print("compiled core not built; both columns below are the fallback")

    rows = []
    for name, fn_args in [
        ("winding_exact", lambda m: m.winding_exact_batch(
            q, accel.v0, accel.v1, accel.v2, args.threads)),
        ("winding_fast", lambda m: m.winding_fast_batch(
            q, accel.node_left, accel.node_right, accel.node_start,
            accel.node_count, accel.node_centroid, accel.node_dipole,
            accel.node_radius, accel.v0, accel.v1, accel.v2, 2.0,
            args.threads)),
        ("unsigned_dist", lambda m: m.udist_batch(
            q, accel.node_left, accel.node_right, accel.node_bbmin,
            accel.node_bbmax, accel.node_start, accel.node_count,
            accel.v0, accel.v1, accel.v2, args.threads)),
    ]:
        out_c, t_c = timed(lambda: fn_args(core))
        out_p, t_p = timed(lambda: fn_args(pure), repeat=1)
        diff = float(np.abs(out_c - out_p).max())
        rows.append((name, t_c, t_p, t_p / t_c, diff))

    print(f"\n{'kernel':<14} {'compiled s':>11} {'fallback s':>11} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for name, t_c, t_p, speedup, diff in rows:
        print(f"{name:<14} {t_c:>11.4f} {t_p:>11.4f} "
              f"{speedup:>7.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
