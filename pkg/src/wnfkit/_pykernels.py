"""Pure numpy kernel fallback.

Mirrors the compiled extension's entry points. The nthreads argument is
accepted for interface parity but ignored; numpy's own vectorization does
the heavy lifting.
"""

from __future__ import annotations

import numpy as np

_FOUR_PI = 4.0 * np.pi
# Cap on points-x-triangles pairs held in memory at once.
_PAIR_BUDGET = 4_000_000


def _solid_angles(q, v0, v1, v2):
    """(P, T) signed solid angles of triangles (v0, v1, v2) seen from q."""
    a = v0[None, :, :] - q[:, None, :]
    b = v1[None, :, :] - q[:, None, :]
    c = v2[None, :, :] - q[:, None, :]
    la = np.linalg.norm(a, axis=2)
    lb = np.linalg.norm(b, axis=2)
    lc = np.linalg.norm(c, axis=2)
    num = np.einsum("ptk,ptk->pt", a, np.cross(b, c))
    den = (
        la * lb * lc
        + np.einsum("ptk,ptk->pt", a, b) * lc
        + np.einsum("ptk,ptk->pt", a, c) * lb
        + np.einsum("ptk,ptk->pt", b, c) * la
    )
    omega = 2.0 * np.arctan2(num, den)
    degenerate = (la < 1e-300) | (lb < 1e-300) | (lc < 1e-300)
    if degenerate.any():
        omega[degenerate] = 0.0
    return omega


def winding_exact_batch(q, v0, v1, v2, nthreads=1):
    out = np.zeros(len(q))
    ntri = max(len(v0), 1)
    chunk = max(1, _PAIR_BUDGET // ntri)
    for i in range(0, len(q), chunk):
        out[i : i + chunk] = _solid_angles(q[i : i + chunk], v0, v1, v2).sum(axis=1)
    return out / _FOUR_PI


def winding_fast_batch(
    q, left, right, start, count, centroid, dipole, radius, v0, v1, v2,
    beta, nthreads=1,
):
    out = np.zeros(len(q))
    beta2 = beta * beta

    def visit(node, idx):
        d = centroid[node] - q[idx]
        d2 = np.einsum("ij,ij->i", d, d)
        far = d2 > beta2 * radius[node] * radius[node]
        if far.any():
            fi = idx[far]
            r3 = d2[far] * np.sqrt(d2[far])
            out[fi] += (d[far] @ dipole[node]) / r3
        near = idx[~far]
        if near.size == 0:
            return
        if left[node] < 0:
            s, c = start[node], count[node]
            out[near] += _solid_angles(
                q[near], v0[s : s + c], v1[s : s + c], v2[s : s + c]
            ).sum(axis=1)
        else:
            visit(left[node], near)
            visit(right[node], near)

    visit(0, np.arange(len(q)))
    return out / _FOUR_PI


def _point_triangle_dist2(p, a, b, c):
    """(P, T) squared distances from points p to triangles (a, b, c).

    Vectorized closest-point-on-triangle (Ericson's region walk)."""
    ab = b - a
    ac = c - a
    ap = p[:, None, :] - a[None, :, :]

    d1 = np.einsum("tk,ptk->pt", ab, ap)
    d2 = np.einsum("tk,ptk->pt", ac, ap)

    bp = p[:, None, :] - b[None, :, :]
    d3 = np.einsum("tk,ptk->pt", ab, bp)
    d4 = np.einsum("tk,ptk->pt", ac, bp)

    cp = p[:, None, :] - c[None, :, :]
    d5 = np.einsum("tk,ptk->pt", ab, cp)
    d6 = np.einsum("tk,ptk->pt", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    # Barycentric coordinates of the interior case.
    denom = va + vb + vc
    safe = np.where(np.abs(denom) > 1e-300, denom, 1.0)
    v_in = vb / safe
    w_in = vc / safe

    # Edge parameters, clamped.
    t_ab = np.clip(d1 / np.where(d1 - d3 != 0.0, d1 - d3, 1.0), 0.0, 1.0)
    t_ac = np.clip(d2 / np.where(d2 - d6 != 0.0, d2 - d6, 1.0), 0.0, 1.0)
    denom_bc = (d4 - d3) + (d5 - d6)
    t_bc = np.clip(
        (d4 - d3) / np.where(denom_bc != 0.0, denom_bc, 1.0), 0.0, 1.0
    )

    # Region selection, evaluated innermost-first so earlier (vertex/edge)
    # regions override.
    v = v_in
    w = w_in
    on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    v = np.where(on_bc, 1.0 - t_bc, v)
    w = np.where(on_bc, t_bc, w)
    on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    v = np.where(on_ac, 0.0, v)
    w = np.where(on_ac, t_ac, w)
    on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    v = np.where(on_ab, t_ab, v)
    w = np.where(on_ab, 0.0, w)
    at_c = (d6 >= 0) & (d5 <= d6)
    v = np.where(at_c, 0.0, v)
    w = np.where(at_c, 1.0, w)
    at_b = (d3 >= 0) & (d4 <= d3)
    v = np.where(at_b, 1.0, v)
    w = np.where(at_b, 0.0, w)
    at_a = (d1 <= 0) & (d2 <= 0)
    v = np.where(at_a, 0.0, v)
    w = np.where(at_a, 0.0, w)

    closest = (
        a[None, :, :] + v[:, :, None] * ab[None, :, :] + w[:, :, None] * ac[None, :, :]
    )
    diff = p[:, None, :] - closest
    return np.einsum("ptk,ptk->pt", diff, diff)


def udist_batch(
    q, left, right, bbmin, bbmax, start, count, v0, v1, v2, nthreads=1
):
    # Brute force over triangles, chunked; the compiled backend uses the
    # BVH for pruning instead.
    out = np.empty(len(q))
    ntri = max(len(v0), 1)
    chunk = max(1, _PAIR_BUDGET // ntri)
    for i in range(0, len(q), chunk):
        d2 = _point_triangle_dist2(q[i : i + chunk], v0, v1, v2)
        out[i : i + chunk] = np.sqrt(d2.min(axis=1))
    return out
