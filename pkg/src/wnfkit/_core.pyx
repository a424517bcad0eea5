# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: exact winding sums, BVH dipole traversal, and
BVH-pruned point-triangle distance. Per-query work is independent, so
results are bitwise stable for any thread count."""

from cython.parallel cimport parallel, prange
from libc.math cimport atan2, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

cdef double FOUR_PI = 12.566370614359172
cdef int STACK_CAP = 512


cdef inline double _solid_angle(
    double qx, double qy, double qz,
    double ax, double ay, double az,
    double bx, double by, double bz,
    double cx, double cy, double cz,
) noexcept nogil:
    cdef double avx = ax - qx, avy = ay - qy, avz = az - qz
    cdef double bvx = bx - qx, bvy = by - qy, bvz = bz - qz
    cdef double cvx = cx - qx, cvy = cy - qy, cvz = cz - qz
    cdef double la = sqrt(avx * avx + avy * avy + avz * avz)
    cdef double lb = sqrt(bvx * bvx + bvy * bvy + bvz * bvz)
    cdef double lc = sqrt(cvx * cvx + cvy * cvy + cvz * cvz)
    if la < 1e-300 or lb < 1e-300 or lc < 1e-300:
        return 0.0
    cdef double crx = bvy * cvz - bvz * cvy
    cdef double cry = bvz * cvx - bvx * cvz
    cdef double crz = bvx * cvy - bvy * cvx
    cdef double num = avx * crx + avy * cry + avz * crz
    cdef double den = (
        la * lb * lc
        + (avx * bvx + avy * bvy + avz * bvz) * lc
        + (avx * cvx + avy * cvy + avz * cvz) * lb
        + (bvx * cvx + bvy * cvy + bvz * cvz) * la
    )
    return 2.0 * atan2(num, den)


def winding_exact_batch(
    double[:, ::1] q,
    double[:, ::1] v0,
    double[:, ::1] v1,
    double[:, ::1] v2,
    int nthreads=1,
):
    cdef Py_ssize_t npts = q.shape[0]
    cdef Py_ssize_t ntri = v0.shape[0]
    out_arr = np.zeros(npts)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef double acc
    for i in prange(npts, nogil=True, schedule="static", num_threads=nthreads):
        acc = 0.0
        for t in range(ntri):
            acc = acc + _solid_angle(
                q[i, 0], q[i, 1], q[i, 2],
                v0[t, 0], v0[t, 1], v0[t, 2],
                v1[t, 0], v1[t, 1], v1[t, 2],
                v2[t, 0], v2[t, 1], v2[t, 2],
            )
        out[i] = acc / FOUR_PI
    return out_arr


def winding_fast_batch(
    double[:, ::1] q,
    int[::1] left,
    int[::1] right,
    int[::1] start,
    int[::1] count,
    double[:, ::1] centroid,
    double[:, ::1] dipole,
    double[::1] radius,
    double[:, ::1] v0,
    double[:, ::1] v1,
    double[:, ::1] v2,
    double beta,
    int nthreads=1,
):
    cdef Py_ssize_t npts = q.shape[0]
    out_arr = np.zeros(npts)
    cdef double[::1] out = out_arr
    cdef double beta2 = beta * beta
    cdef Py_ssize_t i
    cdef int node, sp, s, e, t
    cdef double acc, dx, dy, dz, d2, r
    cdef int* stack

    with nogil, parallel(num_threads=nthreads):
        stack = <int*> malloc(STACK_CAP * sizeof(int))
        for i in prange(npts, schedule="static"):
            acc = 0.0
            sp = 0
            stack[sp] = 0
            sp = sp + 1
            while sp > 0:
                sp = sp - 1
                node = stack[sp]
                dx = centroid[node, 0] - q[i, 0]
                dy = centroid[node, 1] - q[i, 1]
                dz = centroid[node, 2] - q[i, 2]
                d2 = dx * dx + dy * dy + dz * dz
                r = radius[node]
                if d2 > beta2 * r * r:
                    acc = acc + (
                        dipole[node, 0] * dx
                        + dipole[node, 1] * dy
                        + dipole[node, 2] * dz
                    ) / (d2 * sqrt(d2))
                elif left[node] < 0:
                    s = start[node]
                    e = s + count[node]
                    for t in range(s, e):
                        acc = acc + _solid_angle(
                            q[i, 0], q[i, 1], q[i, 2],
                            v0[t, 0], v0[t, 1], v0[t, 2],
                            v1[t, 0], v1[t, 1], v1[t, 2],
                            v2[t, 0], v2[t, 1], v2[t, 2],
                        )
                else:
                    stack[sp] = left[node]
                    sp = sp + 1
                    stack[sp] = right[node]
                    sp = sp + 1
            out[i] = acc / FOUR_PI
        free(stack)
    return out_arr


cdef inline double _box_dist2(
    double px, double py, double pz,
    double lox, double loy, double loz,
    double hix, double hiy, double hiz,
) noexcept nogil:
    cdef double d = 0.0, t
    if px < lox:
        t = lox - px; d += t * t
    elif px > hix:
        t = px - hix; d += t * t
    if py < loy:
        t = loy - py; d += t * t
    elif py > hiy:
        t = py - hiy; d += t * t
    if pz < loz:
        t = loz - pz; d += t * t
    elif pz > hiz:
        t = pz - hiz; d += t * t
    return d


cdef inline double _tri_dist2(
    double px, double py, double pz,
    double ax, double ay, double az,
    double bx, double by, double bz,
    double cx, double cy, double cz,
) noexcept nogil:
    # Closest point on triangle (Ericson's region walk).
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double apx = px - ax, apy = py - ay, apz = pz - az
    cdef double d1 = abx * apx + aby * apy + abz * apz
    cdef double d2 = acx * apx + acy * apy + acz * apz
    cdef double qx, qy, qz, v, w, denom
    if d1 <= 0.0 and d2 <= 0.0:
        qx = ax; qy = ay; qz = az
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2

    cdef double bpx = px - bx, bpy = py - by, bpz = pz - bz
    cdef double d3 = abx * bpx + aby * bpy + abz * bpz
    cdef double d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz

    cdef double vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0 and d1 != d3:
        v = d1 / (d1 - d3)
        qx = ax + v * abx; qy = ay + v * aby; qz = az + v * abz
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2

    cdef double cpx = px - cx, cpy = py - cy, cpz = pz - cz
    cdef double d5 = abx * cpx + aby * cpy + abz * cpz
    cdef double d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz

    cdef double vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0 and d2 != d6:
        w = d2 / (d2 - d6)
        qx = ax + w * acx; qy = ay + w * acy; qz = az + w * acz
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2

    cdef double va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0 and (d4 - d3) + (d5 - d6) != 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bx + w * (cx - bx); qy = by + w * (cy - by); qz = bz + w * (cz - bz)
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2

    denom = va + vb + vc
    if denom == 0.0:
        # Fully degenerate triangle: fall back to nearest corner.
        qx = ax; qy = ay; qz = az
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    v = vb / denom
    w = vc / denom
    qx = ax + v * abx + w * acx
    qy = ay + v * aby + w * acy
    qz = az + v * abz + w * acz
    return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2


def udist_batch(
    double[:, ::1] q,
    int[::1] left,
    int[::1] right,
    double[:, ::1] bbmin,
    double[:, ::1] bbmax,
    int[::1] start,
    int[::1] count,
    double[:, ::1] v0,
    double[:, ::1] v1,
    double[:, ::1] v2,
    int nthreads=1,
):
    cdef Py_ssize_t npts = q.shape[0]
    out_arr = np.empty(npts)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int node, sp, s, e, t, lc, rc
    cdef double best, d2, dl, dr
    cdef int* stack

    with nogil, parallel(num_threads=nthreads):
        stack = <int*> malloc(STACK_CAP * sizeof(int))
        for i in prange(npts, schedule="static"):
            best = 1e300
            sp = 0
            stack[sp] = 0
            sp = sp + 1
            while sp > 0:
                sp = sp - 1
                node = stack[sp]
                if _box_dist2(
                    q[i, 0], q[i, 1], q[i, 2],
                    bbmin[node, 0], bbmin[node, 1], bbmin[node, 2],
                    bbmax[node, 0], bbmax[node, 1], bbmax[node, 2],
                ) >= best:
                    continue
                if left[node] < 0:
                    s = start[node]
                    e = s + count[node]
                    for t in range(s, e):
                        d2 = _tri_dist2(
                            q[i, 0], q[i, 1], q[i, 2],
                            v0[t, 0], v0[t, 1], v0[t, 2],
                            v1[t, 0], v1[t, 1], v1[t, 2],
                            v2[t, 0], v2[t, 1], v2[t, 2],
                        )
                        if d2 < best:
                            best = d2
                else:
                    lc = left[node]
                    rc = right[node]
                    dl = _box_dist2(
                        q[i, 0], q[i, 1], q[i, 2],
                        bbmin[lc, 0], bbmin[lc, 1], bbmin[lc, 2],
                        bbmax[lc, 0], bbmax[lc, 1], bbmax[lc, 2],
                    )
                    dr = _box_dist2(
                        q[i, 0], q[i, 1], q[i, 2],
                        bbmin[rc, 0], bbmin[rc, 1], bbmin[rc, 2],
                        bbmax[rc, 0], bbmax[rc, 1], bbmax[rc, 2],
                    )
                    # Push the farther child first so the nearer is popped
                    # first and tightens the bound sooner.
                    if dl <= dr:
                        stack[sp] = rc
                        sp = sp + 1
                        stack[sp] = lc
                        sp = sp + 1
                    else:
                        stack[sp] = lc
                        sp = sp + 1
                        stack[sp] = rc
                        sp = sp + 1
            out[i] = sqrt(best)
        free(stack)
    return out_arr
