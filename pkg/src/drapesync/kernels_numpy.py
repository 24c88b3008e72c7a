"""Pure-numpy implementations of the hot kernels.

These are the fallback backend when the compiled extension is unavailable,
and the brute-force reference the accelerated paths are tested against.
Both backends must agree to floating-point roundoff on every query.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256  # queries per brute-force block, bounds the (chunk, F) temporaries


def closest_point_on_triangles(p, a, b, c):
    """Closest points on triangles (a, b, c) for points p, elementwise.

    All inputs broadcast against each other with a trailing axis of 3.
    Returns (closest, bary) with the same broadcast shape.
    """
    p, a, b, c = np.broadcast_arrays(p, a, b, c)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("...k,...k->...", ab, ap)
    d2 = np.einsum("...k,...k->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...k,...k->...", ab, bp)
    d4 = np.einsum("...k,...k->...", ac, bp)
    cp = p - c
    d5 = np.einsum("...k,...k->...", ab, cp)
    d6 = np.einsum("...k,...k->...", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def safe_div(num, den):
        den = np.where(den == 0.0, 1.0, den)
        return num / den

    v_ab = np.clip(safe_div(d1, d1 - d3), 0.0, 1.0)
    w_ac = np.clip(safe_div(d2, d2 - d6), 0.0, 1.0)
    w_bc = np.clip(safe_div(d4 - d3, (d4 - d3) + (d5 - d6)), 0.0, 1.0)
    denom = va + vb + vc
    v_in = safe_div(vb, denom)
    w_in = safe_div(vc, denom)

    zeros = np.zeros_like(d1)
    ones = np.ones_like(d1)
    conds = [
        (d1 <= 0.0) & (d2 <= 0.0),                            # vertex a
        (d3 >= 0.0) & (d4 <= d3),                             # vertex b
        (d6 >= 0.0) & (d5 <= d6),                             # vertex c
        (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0),              # edge ab
        (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0),              # edge ac
        (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0),    # edge bc
    ]
    bary1 = [zeros, ones, zeros, v_ab, zeros, ones - w_bc]
    bary2 = [zeros, zeros, ones, zeros, w_ac, w_bc]
    b1 = np.select(conds, bary1, default=v_in)
    b2 = np.select(conds, bary2, default=w_in)
    b0 = 1.0 - b1 - b2
    bary = np.stack([b0, b1, b2], axis=-1)
    closest = b0[..., None] * a + b1[..., None] * b + b2[..., None] * c
    return closest, bary


def brute_closest_points(queries, tri_a, tri_b, tri_c):
    """All-triangle scan: nearest surface point for each query.

    Returns (dist2, face_id, closest, bary) arrays over the queries.
    Ties resolve to the lowest face index (np.argmin).
    """
    queries = np.asarray(queries, dtype=np.float64)
    n = len(queries)
    dist2 = np.empty(n)
    face_id = np.empty(n, dtype=np.int64)
    closest = np.empty((n, 3))
    bary = np.empty((n, 3))
    for s in range(0, n, _CHUNK):
        q = queries[s : s + _CHUNK, None, :]
        cp, bc = closest_point_on_triangles(q, tri_a[None], tri_b[None], tri_c[None])
        d2 = np.sum((q - cp) ** 2, axis=-1)
        idx = np.argmin(d2, axis=1)
        rows = np.arange(len(idx))
        dist2[s : s + _CHUNK] = d2[rows, idx]
        face_id[s : s + _CHUNK] = idx
        closest[s : s + _CHUNK] = cp[rows, idx]
        bary[s : s + _CHUNK] = bc[rows, idx]
    return dist2, face_id, closest, bary


def bvh_closest_points(queries, nodes, tri_order, tri_a, tri_b, tri_c):
    """Python BVH traversal; same contract as the compiled kernel.

    nodes is the flat array layout from spatial.build_bvh.
    """
    bb_min, bb_max, left, right, start, count = nodes
    queries = np.asarray(queries, dtype=np.float64)
    n = len(queries)
    dist2 = np.empty(n)
    face_id = np.empty(n, dtype=np.int64)
    closest = np.empty((n, 3))
    bary = np.empty((n, 3))
    stack = np.empty(128, dtype=np.int64)
    for qi in range(n):
        q = queries[qi]
        best_d2 = np.inf
        best_f = -1
        best_cp = None
        best_bc = None
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            d = np.maximum(bb_min[node] - q, 0.0) + np.maximum(q - bb_max[node], 0.0)
            if d @ d >= best_d2:
                continue
            if count[node] > 0:
                ids = tri_order[start[node] : start[node] + count[node]]
                cp, bc = closest_point_on_triangles(
                    q[None], tri_a[ids], tri_b[ids], tri_c[ids]
                )
                d2 = np.sum((q[None] - cp) ** 2, axis=-1)
                # ties resolve to the lowest face id, like the compiled kernel
                k = int(np.lexsort((ids, d2))[0])
                if d2[k] < best_d2 or (d2[k] == best_d2 and ids[k] < best_f):
                    best_d2 = d2[k]
                    best_f = int(ids[k])
                    best_cp = cp[k]
                    best_bc = bc[k]
            else:
                stack[top] = left[node]
                stack[top + 1] = right[node]
                top += 2
        dist2[qi] = best_d2
        face_id[qi] = best_f
        closest[qi] = best_cp
        bary[qi] = best_bc
    return dist2, face_id, closest, bary


def raster_fill(xy, zview, invw, height, width, z_near=1e-9):
    """Z-buffered fill of screen-space triangles.

    xy: (F, 3, 2) pixel coordinates, zview: (F, 3) positive view depths,
    invw: (F, 3) per-vertex 1/w for perspective-correct interpolation
    (all ones for orthographic).

    Returns (depth, face_id, bary): depth is the perspective-correct view
    depth (inf for background), face_id is -1 for background, and bary are
    the perspective-corrected barycentric weights of the winning face.
    """
    depth = np.full((height, width), np.inf)
    face_id = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3))
    nf = xy.shape[0]
    for f in range(nf):
        if zview[f].min() <= z_near:
            continue
        x0, y0 = xy[f, 0]
        x1, y1 = xy[f, 1]
        x2, y2 = xy[f, 2]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0.0:
            continue
        sgn = 1.0 if area2 > 0.0 else -1.0
        xs = (x0, x1, x2)
        ys = (y0, y1, y2)
        # pixel centers at integer + 0.5
        i0 = max(0, int(np.ceil(min(xs) - 0.5)))
        i1 = min(width - 1, int(np.floor(max(xs) - 0.5)))
        j0 = max(0, int(np.ceil(min(ys) - 0.5)))
        j1 = min(height - 1, int(np.floor(max(ys) - 0.5)))
        if i0 > i1 or j0 > j1:
            continue
        cx = np.arange(i0, i1 + 1) + 0.5
        cy = np.arange(j0, j1 + 1) + 0.5
        px, py = np.meshgrid(cx, cy)
        e12 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        e20 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        e01 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        inside = (sgn * e12 >= 0.0) & (sgn * e20 >= 0.0) & (sgn * e01 >= 0.0)
        if not inside.any():
            continue
        b0 = e12 / area2
        b1 = e20 / area2
        b2 = e01 / area2
        c0 = b0 * invw[f, 0]
        c1 = b1 * invw[f, 1]
        c2 = b2 * invw[f, 2]
        denom = c0 + c1 + c2
        denom = np.where(denom == 0.0, 1.0, denom)
        c0, c1, c2 = c0 / denom, c1 / denom, c2 / denom
        d = c0 * zview[f, 0] + c1 * zview[f, 1] + c2 * zview[f, 2]
        win = inside & (d > z_near) & (d < depth[j0 : j1 + 1, i0 : i1 + 1])
        if not win.any():
            continue
        sub = (slice(j0, j1 + 1), slice(i0, i1 + 1))
        depth[sub] = np.where(win, d, depth[sub])
        face_id[sub] = np.where(win, f, face_id[sub])
        for k, ck in enumerate((c0, c1, c2)):
            bary[sub[0], sub[1], k] = np.where(win, ck, bary[sub[0], sub[1], k])
    return depth, face_id, bary
