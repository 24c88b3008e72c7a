"""Geometric loss terms with values and analytic gradients.

Sample-based losses (collision, blocking, symmetry) return per-sample
gradients; mesh-based regularizers (laplacian, normal consistency) return
per-vertex gradients. total_geometry_loss combines everything into one
per-vertex gradient by scattering sample gradients through barycentric
weights. All reductions are fixed-order so results are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GradientError, MeshError
from .mesh import (
    SamplePoints,
    TriMesh,
    face_cross,
    interior_edge_faces,
    scatter_cross_gradient,
    scatter_sample_gradient,
    vertex_adjacency,
)
from .spatial import BodySdf, PointIndex, signed_distances

_MIRROR = np.array([-1.0, 1.0, 1.0])


@dataclass(frozen=True)
class BlockingCylinder:
    """Semi-infinite cylinder with one closed end, anchored near a joint.

    The axis points away from the body into the excluded region; points
    past the closed-end plane and within the radius are penalized by their
    axial distance to that plane.
    """

    closed_end_center: np.ndarray
    axis: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "closed_end_center",
                           np.asarray(self.closed_end_center, dtype=np.float64))
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=np.float64))
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise ValueError(f"cylinder axis must be unit length, got {self.axis}")
        if not self.radius > 0.0:
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class LossWeights:
    """Term weights; defaults are the production values."""

    coll: float = 5e5
    blk: float = 1e5
    sym: float = 5e5
    lap: float = 2e4
    nc: float = 2e4
    eps: float = 0.005

    def __post_init__(self):
        for name in ("coll", "blk", "sym", "lap", "nc"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"weight {name} must be non-negative")
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")


def load_cylinders(path) -> list[BlockingCylinder]:
    """Reads a JSON array of {center, axis, radius}; axes are normalized."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for i, entry in enumerate(data):
        axis = np.asarray(entry["axis"], dtype=np.float64)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise ValueError(f"cylinder {i}: zero axis")
        out.append(
            BlockingCylinder(
                np.asarray(entry["center"], dtype=np.float64),
                axis / norm,
                float(entry["radius"]),
            )
        )
    return out


def save_cylinders(cylinders, path) -> None:
    data = [
        {
            "center": list(map(float, c.closed_end_center)),
            "axis": list(map(float, c.axis)),
            "radius": float(c.radius),
        }
        for c in cylinders
    ]
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Sample-based losses
# ---------------------------------------------------------------------------


def collision_loss(samples: SamplePoints, sdf: BodySdf, eps: float):
    """Mean hinge on the signed distance: penalizes samples closer than eps.

    Returns (value, per-sample gradient).
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    d, grad_d, _ = signed_distances(sdf, samples.positions)
    active = d < eps
    n = samples.count
    value = float(np.maximum(eps - d, 0.0).sum() / n)
    grad = np.where(active[:, None], -grad_d / n, 0.0)
    return value, grad


def blocking_loss(samples: SamplePoints, cylinders):
    """Mean axial excess past each cylinder's closed end, for inside samples.

    Returns (value, per-sample gradient); the gradient of an active
    (sample, cylinder) pair is the cylinder axis.
    """
    p = samples.positions
    n = samples.count
    value = 0.0
    grad = np.zeros_like(p)
    for cyl in cylinders:
        rel = p - cyl.closed_end_center
        axial = rel @ cyl.axis
        radial = rel - axial[:, None] * cyl.axis
        inside = (axial >= 0.0) & (np.linalg.norm(radial, axis=1) <= cyl.radius)
        value += float(axial[inside].sum() / n)
        grad[inside] += cyl.axis / n
    return value, grad


def symmetry_loss(samples: SamplePoints):
    """Chamfer distance between the samples and their x-mirrored copies.

    Gradients account for each point appearing both directly and as a
    mirror source. Returns (value, per-sample gradient).
    """
    p = samples.positions
    n = samples.count
    q = p * _MIRROR
    idx_pq = PointIndex(q)
    idx_qp = PointIndex(p)
    j_of_i, d2_pq = idx_pq.nearest(p)
    i_of_j, d2_qp = idx_qp.nearest(q)
    value = float(d2_pq.sum() / n + d2_qp.sum() / n)

    grad = np.zeros_like(p)
    r = p - q[j_of_i]
    np.add.at(grad, np.arange(n), 2.0 * r / n)
    np.add.at(grad, j_of_i, -2.0 * (r * _MIRROR) / n)
    s = q - p[i_of_j]
    np.add.at(grad, np.arange(n), 2.0 * (s * _MIRROR) / n)
    np.add.at(grad, i_of_j, -2.0 * s / n)
    return value, grad


def brute_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """O(n^2) symmetric Chamfer; the oracle for the accelerated path."""
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


# ---------------------------------------------------------------------------
# Mesh regularizers
# ---------------------------------------------------------------------------


def _uniform_laplacian(mesh: TriMesh):
    """(L, counted) where L maps vertices to their offset from the neighbor
    mean and counted marks vertices with at least one neighbor."""
    offsets, neighbors = vertex_adjacency(mesh)
    nv = mesh.num_vertices
    deg = np.diff(offsets)
    counted = deg > 0
    rows = np.repeat(np.arange(nv), deg)
    weights = -1.0 / deg[rows]
    diag = sp.coo_matrix(
        (np.ones(int(counted.sum())), (np.where(counted)[0], np.where(counted)[0])),
        shape=(nv, nv),
    )
    adj = sp.coo_matrix((weights, (rows, neighbors)), shape=(nv, nv))
    return (diag + adj).tocsr(), counted


def laplacian_vertex_terms(mesh: TriMesh):
    """Per-vertex squared offsets from the neighbor mean, plus the counted mask."""
    lap, counted = _uniform_laplacian(mesh)
    delta = lap @ mesh.vertices
    return np.sum(delta**2, axis=1), counted


def laplacian_loss(mesh: TriMesh):
    """Uniform-graph Laplacian smoothness: mean ||v_i - mean(neighbors)||^2.

    Isolated vertices are excluded from the mean; the number skipped is
    returned as the third element. Returns (value, per-vertex gradient,
    n_isolated).
    """
    lap, counted = _uniform_laplacian(mesh)
    n_counted = int(counted.sum())
    if n_counted == 0:
        raise MeshError("mesh has no connected vertices")
    delta = lap @ mesh.vertices
    value = float(np.sum(delta**2) / n_counted)
    grad = (2.0 / n_counted) * (lap.T @ delta)
    return value, grad, mesh.num_vertices - n_counted


def normal_consistency_loss(mesh: TriMesh):
    """Mean (1 - n_a . n_b) over interior edges' incident face normals.

    Returns (value, per-vertex gradient).
    """
    edges, pairs = interior_edge_faces(mesh.faces)
    if len(pairs) == 0:
        raise MeshError("mesh has no interior edges")
    cross = face_cross(mesh)
    norms = np.linalg.norm(cross, axis=1)
    normals = cross / norms[:, None]
    na = normals[pairs[:, 0]]
    nb = normals[pairs[:, 1]]
    ne = len(pairs)
    value = float(np.sum(1.0 - np.einsum("ij,ij->i", na, nb)) / ne)

    # d(value)/d(normal) accumulated per face, then through normalization
    # and the cross product.
    dn = np.zeros_like(normals)
    np.add.at(dn, pairs[:, 0], -nb / ne)
    np.add.at(dn, pairs[:, 1], -na / ne)
    dcross = (dn - normals * np.einsum("ij,ij->i", normals, dn)[:, None]) / norms[:, None]
    return value, scatter_cross_gradient(mesh, dcross)


# ---------------------------------------------------------------------------
# Weighted total
# ---------------------------------------------------------------------------


def total_geometry_loss(
    mesh: TriMesh,
    samples: SamplePoints,
    sdf: BodySdf | None,
    cylinders,
    weights: LossWeights,
    enable_sym: bool = True,
):
    """Weighted sum of the alignment losses and regularizers.

    The guidance term is contributed by the guidance module and is not
    added here. Returns (value, per-vertex gradient, raw term values).
    """
    terms: dict[str, float] = {}
    grad_samples = np.zeros_like(samples.positions)
    grad_vertices = np.zeros_like(mesh.vertices)
    value = 0.0

    if weights.coll > 0.0 and sdf is not None:
        v, g = collision_loss(samples, sdf, weights.eps)
        _check_finite("collision", g)
        terms["coll"] = v
        value += weights.coll * v
        grad_samples += weights.coll * g
    else:
        terms["coll"] = 0.0
    if weights.blk > 0.0 and cylinders:
        v, g = blocking_loss(samples, cylinders)
        _check_finite("blocking", g)
        terms["blk"] = v
        value += weights.blk * v
        grad_samples += weights.blk * g
    else:
        terms["blk"] = 0.0
    if enable_sym and weights.sym > 0.0:
        v, g = symmetry_loss(samples)
        _check_finite("symmetry", g)
        terms["sym"] = v
        value += weights.sym * v
        grad_samples += weights.sym * g
    else:
        terms["sym"] = 0.0
    if weights.lap > 0.0:
        v, g, _ = laplacian_loss(mesh)
        _check_finite("laplacian", g)
        terms["lap"] = v
        value += weights.lap * v
        grad_vertices += weights.lap * g
    else:
        terms["lap"] = 0.0
    if weights.nc > 0.0:
        v, g = normal_consistency_loss(mesh)
        _check_finite("normal_consistency", g)
        terms["nc"] = v
        value += weights.nc * v
        grad_vertices += weights.nc * g
    else:
        terms["nc"] = 0.0

    grad_vertices += scatter_sample_gradient(mesh, samples, grad_samples)
    return value, grad_vertices, terms


def _check_finite(term: str, grad: np.ndarray) -> None:
    if not np.isfinite(grad).all():
        raise GradientError(term)
