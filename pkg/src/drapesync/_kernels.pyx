# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: BVH closest-point traversal and raster fill.

Must produce the same results as kernels_numpy (the pure fallback); the
test suite compares both backends directly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, ceil, floor

cnp.import_array()


cdef inline double _dot3(double ax, double ay, double az,
                         double bx, double by, double bz) nogil:
    return ax * bx + ay * by + az * bz


cdef inline void _closest_on_tri(
    const double* p, const double* a, const double* b, const double* c,
    double* out_cp, double* out_bary) nogil:
    # Ericson-style region classification; clamped barycentric output.
    cdef double abx = b[0] - a[0], aby = b[1] - a[1], abz = b[2] - a[2]
    cdef double acx = c[0] - a[0], acy = c[1] - a[1], acz = c[2] - a[2]
    cdef double apx = p[0] - a[0], apy = p[1] - a[1], apz = p[2] - a[2]
    cdef double d1 = _dot3(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _dot3(acx, acy, acz, apx, apy, apz)
    cdef double bpx = p[0] - b[0], bpy = p[1] - b[1], bpz = p[2] - b[2]
    cdef double d3 = _dot3(abx, aby, abz, bpx, bpy, bpz)
    cdef double d4 = _dot3(acx, acy, acz, bpx, bpy, bpz)
    cdef double cpx = p[0] - c[0], cpy = p[1] - c[1], cpz = p[2] - c[2]
    cdef double d5 = _dot3(abx, aby, abz, cpx, cpy, cpz)
    cdef double d6 = _dot3(acx, acy, acz, cpx, cpy, cpz)
    cdef double vc = d1 * d4 - d3 * d2
    cdef double vb = d5 * d2 - d1 * d6
    cdef double va = d3 * d6 - d5 * d4
    cdef double v, w, den
    cdef double b0, b1, b2

    if d1 <= 0.0 and d2 <= 0.0:
        b0, b1, b2 = 1.0, 0.0, 0.0
    elif d3 >= 0.0 and d4 <= d3:
        b0, b1, b2 = 0.0, 1.0, 0.0
    elif d6 >= 0.0 and d5 <= d6:
        b0, b1, b2 = 0.0, 0.0, 1.0
    elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        den = d1 - d3
        v = d1 / den if den != 0.0 else d1
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        b0, b1, b2 = 1.0 - v, v, 0.0
    elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        den = d2 - d6
        w = d2 / den if den != 0.0 else d2
        if w < 0.0:
            w = 0.0
        elif w > 1.0:
            w = 1.0
        b0, b1, b2 = 1.0 - w, 0.0, w
    elif va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        den = (d4 - d3) + (d5 - d6)
        w = (d4 - d3) / den if den != 0.0 else (d4 - d3)
        if w < 0.0:
            w = 0.0
        elif w > 1.0:
            w = 1.0
        b0, b1, b2 = 0.0, 1.0 - w, w
    else:
        den = va + vb + vc
        if den == 0.0:
            den = 1.0
        v = vb / den
        w = vc / den
        b0, b1, b2 = 1.0 - v - w, v, w

    out_bary[0] = b0
    out_bary[1] = b1
    out_bary[2] = b2
    out_cp[0] = b0 * a[0] + b1 * b[0] + b2 * c[0]
    out_cp[1] = b0 * a[1] + b1 * b[1] + b2 * c[1]
    out_cp[2] = b0 * a[2] + b1 * b[2] + b2 * c[2]


def bvh_closest_points(
    cnp.ndarray[double, ndim=2] queries,
    cnp.ndarray[double, ndim=2] bb_min,
    cnp.ndarray[double, ndim=2] bb_max,
    cnp.ndarray[cnp.int64_t, ndim=1] left,
    cnp.ndarray[cnp.int64_t, ndim=1] right,
    cnp.ndarray[cnp.int64_t, ndim=1] start,
    cnp.ndarray[cnp.int64_t, ndim=1] count,
    cnp.ndarray[cnp.int64_t, ndim=1] tri_order,
    cnp.ndarray[double, ndim=2] tri_a,
    cnp.ndarray[double, ndim=2] tri_b,
    cnp.ndarray[double, ndim=2] tri_c,
):
    cdef Py_ssize_t n = queries.shape[0]
    cdef cnp.ndarray[double, ndim=1] dist2 = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] face_id = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] closest = np.empty((n, 3))
    cdef cnp.ndarray[double, ndim=2] bary = np.empty((n, 3))
    cdef cnp.int64_t[512] stack
    cdef Py_ssize_t qi, top, node, k, t
    cdef cnp.int64_t fid
    cdef double best_d2, dx, dy, dz, box_d2, d2
    cdef double q[3]
    cdef double cp[3]
    cdef double bc[3]
    cdef cnp.int64_t best_f
    cdef double best_cp[3]
    cdef double best_bc[3]

    for qi in range(n):
        q[0] = queries[qi, 0]
        q[1] = queries[qi, 1]
        q[2] = queries[qi, 2]
        best_d2 = INFINITY
        best_f = -1
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            dx = bb_min[node, 0] - q[0]
            if q[0] - bb_max[node, 0] > dx:
                dx = q[0] - bb_max[node, 0]
            if dx < 0.0:
                dx = 0.0
            dy = bb_min[node, 1] - q[1]
            if q[1] - bb_max[node, 1] > dy:
                dy = q[1] - bb_max[node, 1]
            if dy < 0.0:
                dy = 0.0
            dz = bb_min[node, 2] - q[2]
            if q[2] - bb_max[node, 2] > dz:
                dz = q[2] - bb_max[node, 2]
            if dz < 0.0:
                dz = 0.0
            box_d2 = dx * dx + dy * dy + dz * dz
            if box_d2 >= best_d2:
                continue
            if count[node] > 0:
                for k in range(count[node]):
                    t = tri_order[start[node] + k]
                    _closest_on_tri(q, &tri_a[t, 0], &tri_b[t, 0], &tri_c[t, 0], cp, bc)
                    dx = q[0] - cp[0]
                    dy = q[1] - cp[1]
                    dz = q[2] - cp[2]
                    d2 = dx * dx + dy * dy + dz * dz
                    fid = <cnp.int64_t> t
                    if d2 < best_d2 or (d2 == best_d2 and fid < best_f):
                        best_d2 = d2
                        best_f = fid
                        best_cp[0] = cp[0]
                        best_cp[1] = cp[1]
                        best_cp[2] = cp[2]
                        best_bc[0] = bc[0]
                        best_bc[1] = bc[1]
                        best_bc[2] = bc[2]
            else:
                stack[top] = left[node]
                stack[top + 1] = right[node]
                top += 2
        dist2[qi] = best_d2
        face_id[qi] = best_f
        for k in range(3):
            closest[qi, k] = best_cp[k]
            bary[qi, k] = best_bc[k]
    return dist2, face_id, closest, bary


def raster_fill(
    cnp.ndarray[double, ndim=3] xy,
    cnp.ndarray[double, ndim=2] zview,
    cnp.ndarray[double, ndim=2] invw,
    int height,
    int width,
    double z_near=1e-9,
):
    cdef cnp.ndarray[double, ndim=2] depth = np.full((height, width), np.inf)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] face_id = np.full(
        (height, width), -1, dtype=np.int64
    )
    cdef cnp.ndarray[double, ndim=3] bary = np.zeros((height, width, 3))
    cdef Py_ssize_t nf = xy.shape[0]
    cdef Py_ssize_t f, i, j, i0, i1, j0, j1
    cdef double x0, y0, x1, y1, x2, y2, area2, sgn
    cdef double minx, maxx, miny, maxy
    cdef double px, py, e01, e12, e20, b0, b1, b2, c0, c1, c2, den, d

    for f in range(nf):
        if zview[f, 0] <= z_near or zview[f, 1] <= z_near or zview[f, 2] <= z_near:
            continue
        x0 = xy[f, 0, 0]
        y0 = xy[f, 0, 1]
        x1 = xy[f, 1, 0]
        y1 = xy[f, 1, 1]
        x2 = xy[f, 2, 0]
        y2 = xy[f, 2, 1]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0.0:
            continue
        sgn = 1.0 if area2 > 0.0 else -1.0
        minx = min(x0, min(x1, x2))
        maxx = max(x0, max(x1, x2))
        miny = min(y0, min(y1, y2))
        maxy = max(y0, max(y1, y2))
        i0 = <Py_ssize_t> ceil(minx - 0.5)
        i1 = <Py_ssize_t> floor(maxx - 0.5)
        j0 = <Py_ssize_t> ceil(miny - 0.5)
        j1 = <Py_ssize_t> floor(maxy - 0.5)
        if i0 < 0:
            i0 = 0
        if i1 > width - 1:
            i1 = width - 1
        if j0 < 0:
            j0 = 0
        if j1 > height - 1:
            j1 = height - 1
        for j in range(j0, j1 + 1):
            py = j + 0.5
            for i in range(i0, i1 + 1):
                px = i + 0.5
                e12 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                if sgn * e12 < 0.0:
                    continue
                e20 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                if sgn * e20 < 0.0:
                    continue
                e01 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                if sgn * e01 < 0.0:
                    continue
                b0 = e12 / area2
                b1 = e20 / area2
                b2 = e01 / area2
                c0 = b0 * invw[f, 0]
                c1 = b1 * invw[f, 1]
                c2 = b2 * invw[f, 2]
                den = c0 + c1 + c2
                if den == 0.0:
                    den = 1.0
                c0 = c0 / den
                c1 = c1 / den
                c2 = c2 / den
                d = c0 * zview[f, 0] + c1 * zview[f, 1] + c2 * zview[f, 2]
                if d > z_near and d < depth[j, i]:
                    depth[j, i] = d
                    face_id[j, i] = f
                    bary[j, i, 0] = c0
                    bary[j, i, 1] = c1
                    bary[j, i, 2] = c2
    return depth, face_id, bary
