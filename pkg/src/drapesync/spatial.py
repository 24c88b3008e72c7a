"""Spatial queries: BVH closest point, signed distance to a closed body,
winding-number oracle, and exact nearest-neighbor search.

The signed distance follows the angle-weighted pseudonormal construction:
the sign at a query point is the sign of (p - closest) dotted with the
pseudonormal of the closest feature (face, edge, or vertex), which is
correct for any closed, consistently oriented triangle mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .errors import MeshError, OpenSurfaceError
from .mesh import TriMesh, boundary_edges, face_corners, face_normals, unique_edges

_LEAF_SIZE = 4
_SAH_BINS = 16
_FEATURE_TOL = 1e-12
_SURFACE_EPS = 1e-9


# ---------------------------------------------------------------------------
# BVH (binary AABB tree, binned SAH splits)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bvh:
    nodes: tuple  # (bb_min, bb_max, left, right, start, count)
    tri_order: np.ndarray
    tri_a: np.ndarray
    tri_b: np.ndarray
    tri_c: np.ndarray

    def closest_points(self, queries):
        """(dist2, face_id, closest, bary) for each query point."""
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        return _backend.bvh_closest_points(
            queries, self.nodes, self.tri_order, self.tri_a, self.tri_b, self.tri_c
        )


def build_bvh(mesh: TriMesh, leaf_size: int = _LEAF_SIZE) -> Bvh:
    a, b, c = face_corners(mesh)
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    c = np.ascontiguousarray(c)
    lo = np.minimum(np.minimum(a, b), c)
    hi = np.maximum(np.maximum(a, b), c)
    centroid = (a + b + c) / 3.0

    nf = len(a)
    order = np.arange(nf, dtype=np.int64)
    bb_min, bb_max = [], []
    lefts, rights, starts, counts = [], [], [], []

    def new_node(ids):
        bb_min.append(lo[ids].min(axis=0))
        bb_max.append(hi[ids].max(axis=0))
        lefts.append(-1)
        rights.append(-1)
        starts.append(-1)
        counts.append(0)
        return len(bb_min) - 1

    # (node index, triangle ids, output offset) work stack
    flat_order = np.empty(nf, dtype=np.int64)
    root = new_node(order)
    stack = [(root, order, 0)]
    while stack:
        node, ids, offset = stack.pop()
        if len(ids) <= leaf_size:
            starts[node] = offset
            counts[node] = len(ids)
            flat_order[offset : offset + len(ids)] = ids
            continue
        cen = centroid[ids]
        cmin, cmax = cen.min(axis=0), cen.max(axis=0)
        extent = cmax - cmin
        axis = int(np.argmax(extent))
        if extent[axis] <= 0.0:
            half = len(ids) // 2
            left_ids, right_ids = ids[:half], ids[half:]
        else:
            left_ids, right_ids = _sah_split(
                ids, cen[:, axis], cmin[axis], extent[axis], lo, hi
            )
            if len(left_ids) == 0 or len(right_ids) == 0:
                half = len(ids) // 2
                part = np.argsort(cen[:, axis], kind="stable")
                left_ids, right_ids = ids[part[:half]], ids[part[half:]]
        lefts[node] = new_node(left_ids)
        rights[node] = new_node(right_ids)
        stack.append((lefts[node], left_ids, offset))
        stack.append((rights[node], right_ids, offset + len(left_ids)))

    nodes = (
        np.ascontiguousarray(bb_min, dtype=np.float64),
        np.ascontiguousarray(bb_max, dtype=np.float64),
        np.asarray(lefts, dtype=np.int64),
        np.asarray(rights, dtype=np.int64),
        np.asarray(starts, dtype=np.int64),
        np.asarray(counts, dtype=np.int64),
    )
    return Bvh(nodes, flat_order, a, b, c)


def _sah_split(ids, coords, cmin, extent, lo, hi):
    # Binned surface-area heuristic on one axis.
    bins = np.clip(
        ((coords - cmin) / extent * _SAH_BINS).astype(np.int64), 0, _SAH_BINS - 1
    )
    counts = np.bincount(bins, minlength=_SAH_BINS)
    bin_lo = np.full((_SAH_BINS, 3), np.inf)
    bin_hi = np.full((_SAH_BINS, 3), -np.inf)
    for k in range(3):
        np.minimum.at(bin_lo[:, k], bins, lo[ids, k])
        np.maximum.at(bin_hi[:, k], bins, hi[ids, k])

    def grow(lo_arr, hi_arr):
        ext = np.maximum(hi_arr - lo_arr, 0.0)
        return 2.0 * (ext[:, 0] * ext[:, 1] + ext[:, 1] * ext[:, 2] + ext[:, 0] * ext[:, 2])

    pre_lo = np.minimum.accumulate(bin_lo, axis=0)
    pre_hi = np.maximum.accumulate(bin_hi, axis=0)
    suf_lo = np.minimum.accumulate(bin_lo[::-1], axis=0)[::-1]
    suf_hi = np.maximum.accumulate(bin_hi[::-1], axis=0)[::-1]
    n_left = np.cumsum(counts)[:-1]
    n_right = len(ids) - n_left
    cost = grow(pre_lo[:-1], pre_hi[:-1]) * n_left + grow(suf_lo[1:], suf_hi[1:]) * n_right
    valid = (n_left > 0) & (n_right > 0)
    if not valid.any():
        return ids[:0], ids
    cost = np.where(valid, cost, np.inf)
    cut = int(np.argmin(cost))
    go_left = bins <= cut
    return ids[go_left], ids[~go_left]


# ---------------------------------------------------------------------------
# Signed distance with angle-weighted pseudonormals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BodySdf:
    mesh: TriMesh
    bvh: Bvh
    face_n: np.ndarray
    vertex_pn: np.ndarray
    edge_pn: np.ndarray  # per unique edge, sum of the two incident face normals
    edge_lookup: dict  # (lo, hi) vertex pair -> edge row


def build_body_sdf(body: TriMesh) -> BodySdf:
    """Prepares signed-distance queries against a closed, oriented body mesh."""
    bnd = boundary_edges(body.faces)
    if len(bnd) > 0:
        raise OpenSurfaceError(bnd)
    face_n = face_normals(body)
    vertex_pn = _angle_weighted_vertex_normals(body, face_n)
    edges, incident = unique_edges(body.faces)
    edge_pn = np.zeros((len(edges), 3))
    lookup = {}
    for i, (e, fs) in enumerate(zip(edges, incident)):
        if len(fs) != 2:
            raise MeshError(
                f"edge {tuple(int(v) for v in e)} has {len(fs)} incident faces; "
                "body must be 2-manifold"
            )
        edge_pn[i] = face_n[fs[0]] + face_n[fs[1]]
        lookup[(int(e[0]), int(e[1]))] = i
    return BodySdf(body, build_bvh(body), face_n, vertex_pn, edge_pn, lookup)


def _angle_weighted_vertex_normals(mesh: TriMesh, face_n: np.ndarray) -> np.ndarray:
    v, f = mesh.vertices, mesh.faces
    out = np.zeros_like(v)
    for k in range(3):
        p0 = v[f[:, k]]
        e1 = v[f[:, (k + 1) % 3]] - p0
        e2 = v[f[:, (k + 2) % 3]] - p0
        cosang = np.einsum("ij,ij->i", e1, e2) / (
            np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
        )
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(out, f[:, k], ang[:, None] * face_n)
    return out


def signed_distances(sdf: BodySdf, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed distance, gradient, and closest face id for a batch of points.

    Negative inside the body. The gradient is (p - closest)/|p - closest|
    carrying the sign, replaced by the closest face normal within 1e-9 of
    the surface.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    dist2, face_id, closest, bary = sdf.bvh.closest_points(points)
    delta = points - closest
    dist = np.sqrt(dist2)
    normals = _feature_pseudonormals(sdf, face_id, bary)
    sign = np.where(np.einsum("ij,ij->i", delta, normals) >= 0.0, 1.0, -1.0)
    on_surface = dist < _SURFACE_EPS
    grad = np.where(
        on_surface[:, None],
        sdf.face_n[face_id],
        sign[:, None] * delta / np.where(dist[:, None] == 0.0, 1.0, dist[:, None]),
    )
    return sign * dist, grad, face_id


def signed_distance(sdf: BodySdf, p) -> tuple[float, np.ndarray, int]:
    """Single-point version; returns (distance, closest point, face id)."""
    p = np.asarray(p, dtype=np.float64).reshape(1, 3)
    dist2, face_id, closest, bary = sdf.bvh.closest_points(p)
    normals = _feature_pseudonormals(sdf, face_id, bary)
    delta = p - closest
    sign = 1.0 if float(delta[0] @ normals[0]) >= 0.0 else -1.0
    return sign * float(np.sqrt(dist2[0])), closest[0], int(face_id[0])


def _feature_pseudonormals(sdf: BodySdf, face_id, bary) -> np.ndarray:
    """Pseudonormal of the closest feature per query (face, edge, or vertex)."""
    faces = sdf.mesh.faces[face_id]
    zero = np.abs(bary) <= _FEATURE_TOL
    nzero = zero.sum(axis=1)
    out = sdf.face_n[face_id].copy()
    # vertex feature: two barycentrics vanish
    on_vertex = nzero >= 2
    if on_vertex.any():
        corner = np.argmax(bary[on_vertex], axis=1)
        vids = faces[on_vertex, corner]
        out[on_vertex] = sdf.vertex_pn[vids]
    # edge feature: exactly one vanishes; the edge is the opposite pair
    on_edge = nzero == 1
    if on_edge.any():
        rows = np.where(on_edge)[0]
        gone = np.argmax(zero[rows], axis=1)
        for r, g in zip(rows, gone):
            i, j = [faces[r, k] for k in range(3) if k != g]
            key = (int(min(i, j)), int(max(i, j)))
            out[r] = sdf.edge_pn[sdf.edge_lookup[key]]
    return out


# ---------------------------------------------------------------------------
# Winding-number oracle
# ---------------------------------------------------------------------------


def winding_number(mesh: TriMesh, p) -> float:
    """Solid angle of the mesh seen from p, divided by 4*pi.

    Approximately 1 inside a closed mesh, 0 outside; values near 0.5 flag
    points too close to the surface to classify.
    """
    p = np.asarray(p, dtype=np.float64)
    va, vb, vc = face_corners(mesh)
    a = va - p
    b = vb - p
    c = vc - p
    la = np.linalg.norm(a, axis=1)
    lb = np.linalg.norm(b, axis=1)
    lc = np.linalg.norm(c, axis=1)
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    denom = (
        la * lb * lc
        + np.einsum("ij,ij->i", a, b) * lc
        + np.einsum("ij,ij->i", b, c) * la
        + np.einsum("ij,ij->i", c, a) * lb
    )
    omega = 2.0 * np.arctan2(det, denom)
    return float(omega.sum() / (4.0 * np.pi))


# ---------------------------------------------------------------------------
# Nearest-neighbor index
# ---------------------------------------------------------------------------


class PointIndex:
    """Exact nearest-neighbor lookup over a fixed point set.

    A KD-tree supplies the argmin; squared distances are recomputed from
    the resolved pairs so results match a brute-force scan bitwise.
    """

    def __init__(self, points):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise ValueError(f"need a non-empty (N, 3) point set, got {points.shape}")
        self.points = points
        self._tree = cKDTree(points)

    def nearest(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """(ids, squared distances) of the nearest indexed point per query."""
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        single = queries.ndim == 1
        q = queries.reshape(-1, 3)
        _, ids = self._tree.query(q, k=1)
        ids = np.asarray(ids, dtype=np.int64)
        d2 = np.sum((q - self.points[ids]) ** 2, axis=1)
        if single:
            return ids[0], d2[0]
        return ids, d2


def nearest_neighbor(index: PointIndex, q) -> tuple[int, float]:
    ids, d2 = index.nearest(np.asarray(q, dtype=np.float64))
    return int(ids), float(d2)
