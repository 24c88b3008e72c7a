"""Triangle meshes: representation, Wavefront I/O, differential quantities,
and area-uniform surface sampling.

Meshes are immutable after construction. Vertices are float64 (V, 3), faces
are int32 (F, 3) with counter-clockwise winding. UVs, when present, are
stored OBJ-style: a coordinate pool ``uvs`` (N, 2) plus per-corner indices
``uv_faces`` (F, 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateFaceError, MeshError, MeshParseError

AREA_TOL = 1e-12


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    uvs: np.ndarray | None = None
    uv_faces: np.ndarray | None = None

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def has_uvs(self) -> bool:
        return self.uvs is not None and self.uv_faces is not None

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """Same topology and UVs, new vertex positions."""
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise MeshError(
                f"vertex array shape {vertices.shape} != {self.vertices.shape}"
            )
        return TriMesh(vertices, self.faces, self.uvs, self.uv_faces)


@dataclass(frozen=True)
class SamplePoints:
    """Surface samples with their provenance on the mesh.

    positions[i] is the barycentric combination of face face_ids[i]'s
    vertices, which keeps every sample differentiable in the vertices.
    """

    face_ids: np.ndarray
    barycentrics: np.ndarray
    positions: np.ndarray

    @property
    def count(self) -> int:
        return int(self.face_ids.shape[0])


def make_mesh(vertices, faces, uvs=None, uv_faces=None, validate: bool = True) -> TriMesh:
    """Builds a TriMesh from array-likes, optionally validating invariants."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int32)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError(f"vertices must be (V, 3), got {vertices.shape}")
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise MeshError(f"faces must be (F, 3), got {faces.shape}")
    if uvs is not None:
        uvs = np.ascontiguousarray(uvs, dtype=np.float64)
        uv_faces = np.ascontiguousarray(uv_faces, dtype=np.int32)
        if uvs.ndim != 2 or uvs.shape[1] != 2:
            raise MeshError(f"uvs must be (N, 2), got {uvs.shape}")
        if uv_faces.shape != faces.shape:
            raise MeshError("uv_faces must match faces shape")
    mesh = TriMesh(vertices, faces, uvs, uv_faces)
    if validate:
        validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: TriMesh) -> None:
    """Checks index bounds, face degeneracy, areas, and winding consistency."""
    v, f = mesh.vertices, mesh.faces
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        bad = np.where((f < 0) | (f >= len(v)))[0]
        raise MeshError(
            f"face index out of range (vertex count {len(v)}) in faces "
            f"{sorted(set(bad.tolist()))[:8]}"
        )
    repeated = (
        (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
    )
    if repeated.any():
        raise DegenerateFaceError(np.where(repeated)[0], "faces with repeated vertices")
    if f.size:
        areas = face_areas(mesh)
        tiny = areas <= AREA_TOL
        if tiny.any():
            raise DegenerateFaceError(np.where(tiny)[0], "faces with near-zero area")
    _check_orientation(f)
    if mesh.has_uvs and mesh.uv_faces.size:
        uf = mesh.uv_faces
        if uf.min() < 0 or uf.max() >= len(mesh.uvs):
            raise MeshError("uv face index out of range")


def _check_orientation(faces: np.ndarray) -> None:
    # Each undirected edge with two incident faces must appear in opposite
    # directions; edges with !=2 incidences are allowed (open surfaces).
    und = {}
    for (a, b) in _directed_edges(faces):
        lo, hi = (a, b) if a < b else (b, a)
        und.setdefault((int(lo), int(hi)), []).append((int(a), int(b)))
    bad = [e for e, occ in und.items() if len(occ) == 2 and occ[0] == occ[1]]
    if bad:
        raise MeshError(
            f"inconsistent face orientation across shared edges {bad[:6]}"
            + ("" if len(bad) <= 6 else f" (+{len(bad) - 6} more)")
        )


def _directed_edges(faces: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
    )


def face_corners(mesh: TriMesh):
    """(a, b, c) vertex position arrays, one row per face."""
    v, f = mesh.vertices, mesh.faces
    return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]


def face_cross(mesh: TriMesh) -> np.ndarray:
    """Unnormalized face normals (b-a) x (c-a); length is twice the area."""
    a, b, c = face_corners(mesh)
    return np.cross(b - a, c - a)


def face_areas(mesh: TriMesh) -> np.ndarray:
    return 0.5 * np.linalg.norm(face_cross(mesh), axis=1)


def face_normals(mesh: TriMesh) -> np.ndarray:
    """Unit face normals following counter-clockwise winding."""
    cross = face_cross(mesh)
    norms = np.linalg.norm(cross, axis=1)
    tiny = norms <= 2.0 * AREA_TOL
    if tiny.any():
        raise DegenerateFaceError(np.where(tiny)[0], "cannot orient degenerate faces")
    return cross / norms[:, None]


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted vertex normals (normalized sums of incident face crosses)."""
    acc = vertex_normal_sums(mesh)
    norms = np.linalg.norm(acc, axis=1)
    norms[norms == 0.0] = 1.0
    return acc / norms[:, None]


def vertex_normal_sums(mesh: TriMesh) -> np.ndarray:
    """Unnormalized per-vertex sums of incident face cross products."""
    cross = face_cross(mesh)
    acc = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], cross)
    return acc


def unique_edges(faces: np.ndarray):
    """Sorted unique undirected edges (E, 2) and per-edge face incidence lists."""
    directed = _directed_edges(faces)
    fids = np.tile(np.arange(len(faces)), 3)
    und = np.sort(directed, axis=1)
    order = np.lexsort((und[:, 1], und[:, 0]))
    und, fids = und[order], fids[order]
    edges, start = np.unique(und, axis=0, return_index=True)
    counts = np.diff(np.append(start, len(und)))
    incident = [fids[s : s + c].tolist() for s, c in zip(start, counts)]
    return edges, incident


def boundary_edges(faces: np.ndarray) -> np.ndarray:
    edges, incident = unique_edges(faces)
    mask = np.array([len(fs) == 1 for fs in incident], dtype=bool)
    return edges[mask]


def interior_edge_faces(faces: np.ndarray):
    """Edges shared by exactly two faces: (E, 2) edges and (E, 2) face pairs."""
    edges, incident = unique_edges(faces)
    keep, pairs = [], []
    for i, fs in enumerate(incident):
        if len(fs) == 2:
            keep.append(i)
            pairs.append(fs)
    return edges[keep], np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def vertex_adjacency(mesh: TriMesh):
    """Undirected vertex adjacency as a CSR-style (offsets, neighbors) pair."""
    edges, _ = unique_edges(mesh.faces)
    nv = mesh.num_vertices
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    counts = np.bincount(both[:, 0], minlength=nv)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return offsets.astype(np.int64), both[:, 1].astype(np.int64)


def connected_components(mesh: TriMesh) -> int:
    """Number of vertex-connectivity components."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components as cc

    edges, _ = unique_edges(mesh.faces)
    nv = mesh.num_vertices
    if len(edges) == 0:
        return nv
    m = coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(nv, nv)
    )
    n, _ = cc(m, directed=False)
    return int(n)


def sample_surface(mesh: TriMesh, n: int, seed: int) -> SamplePoints:
    """Draws n surface points, faces by area, barycentrics uniform on the simplex.

    Deterministic for a given seed.
    """
    if n < 1:
        raise MeshError(f"sample count must be >= 1, got {n}")
    if mesh.num_faces == 0:
        raise MeshError("cannot sample an empty mesh")
    rng = np.random.default_rng(seed)
    areas = face_areas(mesh)
    probs = areas / areas.sum()
    face_ids = rng.choice(mesh.num_faces, size=n, p=probs).astype(np.int64)
    r1 = rng.random(n)
    r2 = rng.random(n)
    s = np.sqrt(r1)
    bary = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=1)
    positions = positions_from_barycentric(mesh, face_ids, bary)
    return SamplePoints(face_ids, bary, positions)


def positions_from_barycentric(mesh: TriMesh, face_ids, bary) -> np.ndarray:
    v, f = mesh.vertices, mesh.faces[face_ids]
    return (
        bary[:, 0:1] * v[f[:, 0]]
        + bary[:, 1:2] * v[f[:, 1]]
        + bary[:, 2:3] * v[f[:, 2]]
    )


def scatter_sample_gradient(mesh: TriMesh, samples: SamplePoints, grad_samples) -> np.ndarray:
    """Scatters per-sample gradients to vertices via barycentric weights."""
    out = np.zeros_like(mesh.vertices)
    f = mesh.faces[samples.face_ids]
    b = samples.barycentrics
    for k in range(3):
        np.add.at(out, f[:, k], b[:, k : k + 1] * grad_samples)
    return out


def scatter_cross_gradient(mesh: TriMesh, dcross: np.ndarray) -> np.ndarray:
    """Backprop of d(loss)/d(face cross product) to vertex positions.

    For c = e1 x e2 with e1 = v1 - v0, e2 = v2 - v0 and upstream gradient g:
    dL/de1 = e2 x g and dL/de2 = g x e1 (scalar triple product identities).
    """
    v, f = mesh.vertices, mesh.faces
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    de1 = np.cross(e2, dcross)
    de2 = np.cross(dcross, e1)
    grad = np.zeros_like(v)
    np.add.at(grad, f[:, 0], -de1 - de2)
    np.add.at(grad, f[:, 1], de1)
    np.add.at(grad, f[:, 2], de2)
    return grad


# ---------------------------------------------------------------------------
# Wavefront-style text I/O (v / vt / f records, 1-indexed, UTF-8)
# ---------------------------------------------------------------------------


def load_mesh(path) -> TriMesh:
    """Parses a Wavefront-style text mesh; polygons are fan-triangulated."""
    path = Path(path)
    verts: list[tuple[float, float, float]] = []
    uvs: list[tuple[float, float]] = []
    face_v: list[list[int]] = []
    face_t: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
                elif tag == "vt":
                    uvs.append((float(parts[1]), float(parts[2])))
                elif tag == "f":
                    vi, ti = _parse_face_record(parts[1:], len(verts), len(uvs))
                    face_v.append(vi)
                    face_t.append(ti)
            except MeshParseError:
                raise
            except (ValueError, IndexError) as exc:
                raise MeshParseError(path, line_no, f"bad '{tag}' record: {exc}") from exc
    if not verts:
        raise MeshParseError(path, 0, "no vertices found")

    tri_v, tri_t = [], []
    for vi, ti in zip(face_v, face_t):
        for k in range(1, len(vi) - 1):  # fan triangulation
            tri_v.append((vi[0], vi[k], vi[k + 1]))
            tri_t.append((ti[0], ti[k], ti[k + 1]) if ti is not None else None)

    vertices = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(tri_v, dtype=np.int32)
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        bad = int(faces.max())
        raise MeshError(
            f"face vertex index {bad + 1} out of range (file has {len(vertices)} vertices)"
        )
    has_uv = uvs and all(t is not None for t in tri_t) and len(tri_t) > 0
    if has_uv:
        uv_arr = np.asarray(uvs, dtype=np.float64)
        uvf = np.asarray(tri_t, dtype=np.int32)
        mesh = make_mesh(vertices, faces, uv_arr, uvf, validate=False)
    else:
        mesh = make_mesh(vertices, faces, validate=False)
    validate_mesh(mesh)
    return mesh


def _parse_face_record(tokens, nv, nt):
    vi, ti = [], []
    has_t = True
    for tok in tokens:
        fields = tok.split("/")
        v = int(fields[0])
        vi.append(v - 1 if v > 0 else nv + v)
        if len(fields) > 1 and fields[1]:
            t = int(fields[1])
            ti.append(t - 1 if t > 0 else nt + t)
        else:
            has_t = False
    if len(vi) < 3:
        raise ValueError(f"face with {len(vi)} corners")
    return vi, (ti if has_t and len(ti) == len(vi) else None)


def save_mesh(mesh: TriMesh, path) -> None:
    """Writes v/vt/f records; inverse of load_mesh up to float formatting."""
    path = Path(path)
    lines = []
    for p in mesh.vertices:
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    if mesh.has_uvs:
        for t in mesh.uvs:
            lines.append(f"vt {t[0]:.9g} {t[1]:.9g}")
        for f, t in zip(mesh.faces, mesh.uv_faces):
            lines.append(
                f"f {f[0] + 1}/{t[0] + 1} {f[1] + 1}/{t[1] + 1} {f[2] + 1}/{t[2] + 1}"
            )
    else:
        for f in mesh.faces:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Joint normalization of garment + body into the [-1, 1] box
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> scale * (x - center); shared by garment, body, and cylinders."""

    center: np.ndarray
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (points - self.center) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return points / self.scale + self.center

    def apply_mesh(self, mesh: TriMesh) -> TriMesh:
        return mesh.with_vertices(self.apply(mesh.vertices))

    def invert_mesh(self, mesh: TriMesh) -> TriMesh:
        return mesh.with_vertices(self.invert(mesh.vertices))


def normalization_to_unit_box(mesh: TriMesh, margin: float = 0.0) -> SimilarityTransform:
    """Transform placing the mesh's bounding box inside [-1, 1]^3."""
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    half = float(np.max(hi - lo)) * 0.5
    if half == 0.0:
        raise MeshError("mesh has zero extent; cannot normalize")
    return SimilarityTransform(center, (1.0 - margin) / half)
