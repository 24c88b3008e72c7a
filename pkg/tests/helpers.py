"""Independent oracles used by the tests.

These intentionally do not share code with the library paths they check:
closest points come from per-edge clamping instead of region
classification, visibility from ray casting instead of z-buffers, and
gradients from central finite differences.
"""

from __future__ import annotations

import numpy as np


def closest_point_on_segment(p, a, b):
    ab = b - a
    t = float(np.dot(p - a, ab) / np.dot(ab, ab))
    t = min(1.0, max(0.0, t))
    return a + t * ab


def closest_point_on_triangle_oracle(p, a, b, c):
    """Plane projection if inside, else the best of the three edges."""
    n = np.cross(b - a, c - a)
    nn = np.dot(n, n)
    proj = p - n * (np.dot(p - a, n) / nn)
    # barycentric test of the projection
    v0, v1, v2 = b - a, c - a, proj - a
    d00, d01, d11 = np.dot(v0, v0), np.dot(v0, v1), np.dot(v1, v1)
    d20, d21 = np.dot(v2, v0), np.dot(v2, v1)
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    if v >= 0.0 and w >= 0.0 and v + w <= 1.0:
        return proj
    candidates = [
        closest_point_on_segment(p, a, b),
        closest_point_on_segment(p, b, c),
        closest_point_on_segment(p, c, a),
    ]
    d2 = [np.dot(p - q, p - q) for q in candidates]
    return candidates[int(np.argmin(d2))]


def brute_closest_point_mesh(p, mesh):
    """(distance, closest point, face id) by scanning every triangle."""
    p = np.asarray(p, dtype=np.float64)
    best_d2, best_q, best_f = np.inf, None, -1
    v, f = mesh.vertices, mesh.faces
    for i in range(len(f)):
        q = closest_point_on_triangle_oracle(p, v[f[i, 0]], v[f[i, 1]], v[f[i, 2]])
        d2 = float(np.dot(p - q, p - q))
        if d2 < best_d2:
            best_d2, best_q, best_f = d2, q, i
    return np.sqrt(best_d2), best_q, best_f


def ray_triangle(origin, direction, a, b, c, eps=1e-12):
    """Moller-Trumbore; returns the ray parameter t or None."""
    e1 = b - a
    e2 = c - a
    h = np.cross(direction, e2)
    det = np.dot(e1, h)
    if abs(det) < eps:
        return None
    inv = 1.0 / det
    s = origin - a
    u = inv * np.dot(s, h)
    if u < -1e-12 or u > 1.0 + 1e-12:
        return None
    q = np.cross(s, e1)
    v = inv * np.dot(direction, q)
    if v < -1e-12 or u + v > 1.0 + 1e-12:
        return None
    t = inv * np.dot(e2, q)
    return t if t > eps else None


def ray_mesh_first_hit(origin, direction, mesh):
    """(t, face id) of the nearest intersection, or (inf, -1)."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    best_t, best_f = np.inf, -1
    v, f = mesh.vertices, mesh.faces
    for i in range(len(f)):
        t = ray_triangle(origin, direction, v[f[i, 0]], v[f[i, 1]], v[f[i, 2]])
        if t is not None and t < best_t:
            best_t, best_f = t, i
    return best_t, best_f


def fd_gradient(fun, x, h=1e-6):
    """Central finite differences of a scalar function over a flat array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x).reshape(-1)
    flat = x.reshape(-1)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (fun(xp.reshape(x.shape)) - fun(xm.reshape(x.shape))) / (2.0 * h)
    return grad.reshape(x.shape)


def rel_err(approx, exact):
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = max(float(np.linalg.norm(exact)), 1e-12)
    return float(np.linalg.norm(approx - exact)) / denom
