import numpy as np
import pytest

from drapesync import scenes
from drapesync.errors import OpenSurfaceError
from drapesync.mesh import face_normals, make_mesh
from drapesync.spatial import (
    PointIndex,
    build_body_sdf,
    build_bvh,
    nearest_neighbor,
    signed_distance,
    signed_distances,
    winding_number,
)

from helpers import brute_closest_point_mesh


def test_sphere_inside_outside():
    sph = scenes.icosphere(3)
    sdf = build_body_sdf(sph)
    d0, _, _ = signed_distance(sdf, [0.0, 0.0, 0.0])
    assert abs(d0 - (-1.0)) < 2e-2
    d1, _, _ = signed_distance(sdf, [2.0, 0.0, 0.0])
    assert abs(d1 - 1.0) < 2e-2


def test_open_surface_rejected():
    tube = scenes.tube(0.5, -1.0, 1.0, n_seg=8, n_axial=3)
    with pytest.raises(OpenSurfaceError) as err:
        build_body_sdf(tube)
    assert len(err.value.boundary_edges) == 16  # both open rims


def test_sign_against_winding_oracle():
    body = scenes.capsule(0.4, 0.6, n_seg=20, n_cap_rings=6)
    sdf = build_body_sdf(body)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1.4, 1.4, size=(1000, 3))
    d, _, _ = signed_distances(sdf, pts)
    keep = np.abs(d) > 1e-4
    w = np.array([winding_number(body, p) for p in pts[keep]])
    inside = w > 0.5
    assert ((d[keep] < 0) == inside).all()


def test_point_on_vertex_is_zero():
    sph = scenes.icosphere(2)
    sdf = build_body_sdf(sph)
    d, _, _ = signed_distance(sdf, sph.vertices[17])
    assert abs(d) < 1e-9


def test_offset_along_face_normal():
    body = scenes.unit_cube()
    sdf = build_body_sdf(body)
    n = face_normals(body)[4]
    v, f = body.vertices, body.faces
    centroid = v[f[4]].mean(axis=0)
    d, closest, fid = signed_distance(sdf, centroid + 0.1 * n)
    assert abs(d - 0.1) < 1e-6
    assert np.abs(closest - centroid).max() < 1e-9


def test_random_points_match_bruteforce_oracle():
    body = scenes.capsule(0.35, 0.5, n_seg=16, n_cap_rings=5)
    sdf = build_body_sdf(body)
    rng = np.random.default_rng(13)
    pts = rng.uniform(-1.2, 1.2, size=(200, 3))
    d, _, _ = signed_distances(sdf, pts)
    for p, di in zip(pts, d):
        dist, _, _ = brute_closest_point_mesh(p, body)
        assert abs(abs(di) - dist) < 1e-9


def test_gradient_unit_norm_and_direction():
    sph = scenes.icosphere(3)
    sdf = build_body_sdf(sph)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.5, 1.5, size=(100, 3))
    d, grad, _ = signed_distances(sdf, pts)
    assert np.abs(np.linalg.norm(grad, axis=1) - 1.0).max() < 1e-9
    # gradient points along increasing distance: finite-difference check
    h = 1e-6
    for i in range(0, 100, 7):
        if abs(d[i]) < 1e-3:
            continue
        g = grad[i]
        dp, _, _ = signed_distance(sdf, pts[i] + h * g)
        assert dp > d[i]


def test_lipschitz_property():
    body = scenes.capsule(0.3, 0.4, n_seg=12, n_cap_rings=4)
    sdf = build_body_sdf(body)
    rng = np.random.default_rng(23)
    a = rng.uniform(-1.0, 1.0, size=(300, 3))
    b = rng.uniform(-1.0, 1.0, size=(300, 3))
    da, _, _ = signed_distances(sdf, a)
    db, _, _ = signed_distances(sdf, b)
    gap = np.linalg.norm(a - b, axis=1)
    assert (np.abs(da - db) <= gap + 1e-12).all()


def test_winding_number_cases():
    cube = scenes.unit_cube()
    assert abs(winding_number(cube, [0.5, 0.5, 0.5]) - 1.0) < 1e-6
    assert abs(winding_number(cube, [5.0, 5.0, 5.0])) < 1e-6
    # exactly on a face: half the solid angle, excluded from sign tests
    w = winding_number(cube, [0.5, 0.5, 1.0])
    assert 0.4 < w < 0.6


def test_bvh_matches_brute_force_scan():
    from drapesync.kernels_numpy import brute_closest_points
    from drapesync.mesh import face_corners

    body = scenes.icosphere(3)
    bvh = build_bvh(body)
    rng = np.random.default_rng(3)
    q = rng.uniform(-2, 2, size=(500, 3))
    d2_b, f_b, cp_b, _ = bvh.closest_points(q)
    a, b, c = face_corners(body)
    d2_s, f_s, cp_s, _ = brute_closest_points(q, a, b, c)
    assert np.abs(d2_b - d2_s).max() < 1e-12
    assert np.abs(cp_b - cp_s).max() < 1e-9


def test_nearest_neighbor_basics():
    idx = PointIndex(np.array([[0.0, 0.0, 0.0]]))
    pid, d2 = nearest_neighbor(idx, [1.0, 0.0, 0.0])
    assert pid == 0
    assert d2 == 1.0

    grid = np.stack(
        np.meshgrid(np.arange(10), np.arange(10), np.arange(10)), axis=-1
    ).reshape(-1, 3).astype(float)
    idx = PointIndex(grid)
    rng = np.random.default_rng(1)
    queries = rng.uniform(-1, 10, size=(100, 3))
    ids, d2 = idx.nearest(queries)
    # exact agreement with an O(n) scan
    for q, i, dd in zip(queries, ids, d2):
        scan = np.sum((grid - q) ** 2, axis=1)
        assert dd == scan.min()
        assert scan[i] == scan.min()

    pid, d2 = nearest_neighbor(idx, grid[137])
    assert d2 == 0.0
    assert pid == 137


def test_nearest_neighbor_empty_rejected():
    with pytest.raises(ValueError):
        PointIndex(np.zeros((0, 3)))


def test_nonmanifold_body_rejected():
    # three faces sharing one edge
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 0]]
    f = [[0, 1, 2], [1, 0, 3], [0, 1, 4]]
    mesh = make_mesh(v, f, validate=False)
    with pytest.raises(Exception):
        build_body_sdf(mesh)
