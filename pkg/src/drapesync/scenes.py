"""Procedural test scenes: primitives for the bundled desk-scale setups.

The sleeve-on-arm scene pairs a closed capsule (the body) with an open,
initially penetrating tube (the garment); it is the reference scene for
the end-to-end deformation tests and the CLI example configs.
"""

from __future__ import annotations

import numpy as np

from .losses import BlockingCylinder
from .mesh import TriMesh, make_mesh


def unit_cube() -> TriMesh:
    """Axis-aligned cube spanning [0, 1]^3, outward CCW winding."""
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # z = 0
            [4, 5, 6], [4, 6, 7],  # z = 1
            [0, 1, 5], [0, 5, 4],  # y = 0
            [2, 3, 7], [2, 7, 6],  # y = 1
            [1, 2, 6], [1, 6, 5],  # x = 1
            [3, 0, 4], [3, 4, 7],  # x = 0
        ],
        dtype=np.int32,
    )
    return make_mesh(v, f)


def icosphere(subdivisions: int = 2, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron projected to a sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(p / np.linalg.norm(p)) for p in verts]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            p = np.asarray(verts[i]) + np.asarray(verts[j])
            verts.append(tuple(p / np.linalg.norm(p)))
            cache[key] = len(verts) - 1
        return cache[key]

    for _ in range(subdivisions):
        nxt = []
        for (i, j, k) in faces:
            a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            nxt += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = nxt
    v = np.asarray(verts, dtype=np.float64) * radius + np.asarray(center, dtype=np.float64)
    return make_mesh(v, np.asarray(faces, dtype=np.int32))


def capsule(
    radius: float = 0.3,
    half_length: float = 0.8,
    n_seg: int = 24,
    n_cap_rings: int = 6,
) -> TriMesh:
    """Closed capsule along the x-axis: cylinder with hemispherical caps."""
    n_barrel = max(2, n_cap_rings)
    ring_x, ring_r = [], []
    # -x hemispherical cap, pole excluded, up to and including (-h, radius)
    for k in range(1, n_cap_rings + 1):
        a = -np.pi / 2 + (np.pi / 2) * k / n_cap_rings
        ring_x.append(-half_length + radius * np.sin(a))
        ring_r.append(radius * np.cos(a))
    # straight barrel rings between the caps
    for x in np.linspace(-half_length, half_length, n_barrel + 1)[1:]:
        ring_x.append(float(x))
        ring_r.append(radius)
    # +x cap, pole excluded
    for k in range(1, n_cap_rings):
        a = (np.pi / 2) * k / n_cap_rings
        ring_x.append(half_length + radius * np.sin(a))
        ring_r.append(radius * np.cos(a))

    verts = [(-half_length - radius, 0.0, 0.0)]
    for x, r in zip(ring_x, ring_r):
        for s in range(n_seg):
            a = 2 * np.pi * s / n_seg
            verts.append((x, r * np.cos(a), r * np.sin(a)))
    verts.append((half_length + radius, 0.0, 0.0))
    nv_rings = len(ring_x)

    faces = []
    # -x pole fan
    for s in range(n_seg):
        faces.append((0, 1 + (s + 1) % n_seg, 1 + s))
    # ring strips
    for r0 in range(nv_rings - 1):
        base0 = 1 + r0 * n_seg
        base1 = base0 + n_seg
        for s in range(n_seg):
            s1 = (s + 1) % n_seg
            faces.append((base0 + s, base1 + s1, base1 + s))
            faces.append((base0 + s, base0 + s1, base1 + s1))
    # +x pole fan
    last = len(verts) - 1
    base = 1 + (nv_rings - 1) * n_seg
    for s in range(n_seg):
        faces.append((last, base + s, base + (s + 1) % n_seg))
    return make_mesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))


def tube(
    radius: float = 0.3,
    x0: float = -0.5,
    x1: float = 0.5,
    n_seg: int = 16,
    n_axial: int = 8,
    with_uvs: bool = False,
) -> TriMesh:
    """Open cylinder along the x-axis, outward normals, optional seam UVs."""
    verts, uvs = [], []
    for i in range(n_axial + 1):
        x = x0 + (x1 - x0) * i / n_axial
        for s in range(n_seg):
            a = 2 * np.pi * s / n_seg
            verts.append((x, radius * np.cos(a), radius * np.sin(a)))
    if with_uvs:
        for i in range(n_axial + 1):
            for s in range(n_seg + 1):  # seam column duplicated in UV space
                uvs.append((s / n_seg, (i + 0.5) / (n_axial + 1)))

    faces, uv_faces = [], []
    for i in range(n_axial):
        b0 = i * n_seg
        b1 = (i + 1) * n_seg
        t0 = i * (n_seg + 1)
        t1 = (i + 1) * (n_seg + 1)
        for s in range(n_seg):
            s1 = (s + 1) % n_seg
            faces.append((b0 + s, b1 + s1, b1 + s))
            faces.append((b0 + s, b0 + s1, b1 + s1))
            uv_faces.append((t0 + s, t1 + s + 1, t1 + s))
            uv_faces.append((t0 + s, t0 + s + 1, t1 + s + 1))
    if with_uvs:
        return make_mesh(
            np.asarray(verts), np.asarray(faces, dtype=np.int32),
            np.asarray(uvs), np.asarray(uv_faces, dtype=np.int32),
        )
    return make_mesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))


def plane_grid(nx: int = 8, ny: int = 8, size: float = 1.0, z: float = 0.0) -> TriMesh:
    """Flat triangulated grid in the z = const plane."""
    xs = np.linspace(-size, size, nx + 1)
    ys = np.linspace(-size, size, ny + 1)
    verts = [(x, y, z) for y in ys for x in xs]
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 1
            d = c + 1
            faces.append((a, b, d))
            faces.append((a, d, c))
    return make_mesh(np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int32))


def uv_quad(center=(0.0, 0.0, 0.0), size: float = 1.0, uv_rect=(0.0, 0.0, 1.0, 1.0)) -> TriMesh:
    """Two-triangle quad in the z = center.z plane facing +z, with UVs."""
    cx, cy, cz = center
    h = size / 2.0
    v = np.array(
        [[cx - h, cy - h, cz], [cx + h, cy - h, cz], [cx + h, cy + h, cz], [cx - h, cy + h, cz]]
    )
    f = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    u0, v0, u1, v1 = uv_rect
    uv = np.array([[u0, v0], [u1, v0], [u1, v1], [u0, v1]])
    uvf = f.copy()
    return make_mesh(v, f, uv, uvf)


def hex_patch(lift: float = 0.0) -> TriMesh:
    """Hexagonal fan: center vertex ringed by six, optionally lifted in z."""
    verts = [(0.0, 0.0, lift)]
    for s in range(6):
        a = np.pi * s / 3.0
        verts.append((np.cos(a), np.sin(a), 0.0))
    faces = [(0, 1 + s, 1 + (s + 1) % 6) for s in range(6)]
    return make_mesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))


def sleeve_scene(
    arm_radius: float = 0.25,
    arm_half_length: float = 0.9,
    sleeve_radius: float = 0.22,
    sleeve_x0: float = -0.35,
    sleeve_x1: float = 0.55,
    n_seg: int = 16,
    n_axial: int = 10,
    wrist_x: float = 0.45,
):
    """Capsule arm with a penetrating tube sleeve and a wrist blocking cylinder.

    The sleeve radius sits below the arm radius so the template starts
    inside the body, and the sleeve extends past the wrist plane into the
    blocking cylinder.
    """
    arm = capsule(arm_radius, arm_half_length, n_seg=24, n_cap_rings=8)
    sleeve = tube(sleeve_radius, sleeve_x0, sleeve_x1, n_seg=n_seg, n_axial=n_axial)
    wrist = BlockingCylinder(
        closed_end_center=np.array([wrist_x, 0.0, 0.0]),
        axis=np.array([1.0, 0.0, 0.0]),
        radius=arm_radius * 3.0,
    )
    return arm, sleeve, [wrist]
