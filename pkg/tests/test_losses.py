import numpy as np
import pytest

from drapesync import scenes
from drapesync.losses import (
    BlockingCylinder,
    LossWeights,
    blocking_loss,
    brute_chamfer,
    collision_loss,
    laplacian_loss,
    laplacian_vertex_terms,
    load_cylinders,
    normal_consistency_loss,
    save_cylinders,
    symmetry_loss,
    total_geometry_loss,
)
from drapesync.mesh import (
    SamplePoints,
    make_mesh,
    positions_from_barycentric,
    sample_surface,
)
from drapesync.spatial import build_body_sdf

from helpers import rel_err

MIRROR = np.array([-1.0, 1.0, 1.0])


def points_as_samples(points) -> SamplePoints:
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    return SamplePoints(
        np.zeros(n, dtype=np.int64),
        np.tile([1.0, 0.0, 0.0], (n, 1)),
        points,
    )


@pytest.fixture(scope="module")
def cube_sdf():
    return build_body_sdf(scenes.unit_cube())


@pytest.fixture(scope="module")
def sphere_sdf():
    return build_body_sdf(scenes.icosphere(3))


# ---------------------------------------------------------------------------
# collision
# ---------------------------------------------------------------------------


def test_collision_single_penetrating_sample(cube_sdf):
    # 0.01 inside the z=1 face of the unit cube: d = -0.01 exactly
    samples = points_as_samples([[0.5, 0.5, 0.99]])
    value, grad = collision_loss(samples, cube_sdf, eps=0.005)
    assert abs(value - 0.015) < 1e-12
    # pushing outward (+z) is the descent direction
    assert np.allclose(grad[0], [0.0, 0.0, -1.0], atol=1e-9)


def test_collision_inactive_when_clear(cube_sdf):
    samples = points_as_samples([[0.5, 0.5, 1.2], [2.0, 2.0, 2.0]])
    value, grad = collision_loss(samples, cube_sdf, eps=0.005)
    assert value == 0.0
    assert np.all(grad == 0.0)


def test_collision_gradient_finite_differences(sphere_sdf):
    rng = np.random.default_rng(4)
    # points straddling the sphere surface, away from the eps kink
    pts = rng.normal(size=(40, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= rng.uniform(0.85, 0.97, size=(40, 1))
    eps = 0.005

    def value_of(flat):
        s = points_as_samples(flat.reshape(-1, 3))
        return collision_loss(s, sphere_sdf, eps)[0]

    _, grad = collision_loss(points_as_samples(pts), sphere_sdf, eps)
    h = 1e-6
    flat = pts.reshape(-1)
    idx = rng.choice(flat.size, size=30, replace=False)
    for i in idx:
        fp = flat.copy()
        fm = flat.copy()
        fp[i] += h
        fm[i] -= h
        fd = (value_of(fp) - value_of(fm)) / (2 * h)
        assert abs(fd - grad.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fd))


# ---------------------------------------------------------------------------
# blocking
# ---------------------------------------------------------------------------


def wrist_cylinder(radius=0.5):
    return BlockingCylinder(
        np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]), radius
    )


def test_blocking_axial_distance():
    cyl = wrist_cylinder()
    samples = points_as_samples([[1.2, 0.0, 0.0]])
    value, grad = blocking_loss(samples, [cyl])
    assert abs(value - 0.2) < 1e-12
    assert np.allclose(grad[0], cyl.axis, atol=1e-12)


def test_blocking_outside_radius_is_zero():
    cyl = wrist_cylinder(radius=0.5)
    samples = points_as_samples([[1.2, 0.51, 0.0]])
    value, grad = blocking_loss(samples, [cyl])
    assert value == 0.0
    assert np.all(grad == 0.0)


def test_blocking_behind_end_plane_is_zero():
    cyl = wrist_cylinder()
    value, _ = blocking_loss(points_as_samples([[0.99, 0.0, 0.0]]), [cyl])
    assert value == 0.0


def test_blocking_gradient_finite_differences():
    rng = np.random.default_rng(11)
    cyls = [
        BlockingCylinder(np.array([0.5, 0.1, -0.2]),
                         np.array([1.0, 0.0, 0.0]), 0.6),
        BlockingCylinder(np.array([0.0, -0.4, 0.0]),
                         np.array([0.0, -1.0, 0.0]), 0.5),
    ]
    pts = rng.uniform(-1.2, 1.2, size=(60, 3))
    # keep away from the indicator boundaries
    keep = []
    for p in pts:
        ok = True
        for c in cyls:
            rel = p - c.closed_end_center
            a = rel @ c.axis
            r = np.linalg.norm(rel - a * c.axis)
            if abs(a) < 0.05 or abs(r - c.radius) < 0.05:
                ok = False
        if ok:
            keep.append(p)
    pts = np.asarray(keep)

    def value_of(flat):
        return blocking_loss(points_as_samples(flat.reshape(-1, 3)), cyls)[0]

    _, grad = blocking_loss(points_as_samples(pts), cyls)
    h = 1e-6
    flat = pts.reshape(-1)
    for i in range(0, flat.size, 5):
        fp = flat.copy()
        fm = flat.copy()
        fp[i] += h
        fm[i] -= h
        fd = (value_of(fp) - value_of(fm)) / (2 * h)
        assert abs(fd - grad.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fd))


def test_blocking_translation_equivariance():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(50, 3))
    cyl = BlockingCylinder(np.array([0.2, 0.0, 0.1]),
                           np.array([0.0, 0.0, 1.0]), 0.7)
    shift = np.array([0.3, -1.2, 0.8])
    moved = BlockingCylinder(cyl.closed_end_center + shift, cyl.axis, cyl.radius)
    v1, _ = blocking_loss(points_as_samples(pts), [cyl])
    v2, _ = blocking_loss(points_as_samples(pts + shift), [moved])
    assert abs(v1 - v2) < 1e-12


def test_cylinder_json_roundtrip(tmp_path):
    cyls = [wrist_cylinder(0.3)]
    path = tmp_path / "cyl.json"
    save_cylinders(cyls, path)
    back = load_cylinders(path)
    assert len(back) == 1
    assert np.allclose(back[0].closed_end_center, cyls[0].closed_end_center)
    # axes are normalized on load
    path.write_text('[{"center": [0,0,0], "axis": [0,0,3], "radius": 1.0}]')
    back = load_cylinders(path)
    assert np.allclose(back[0].axis, [0, 0, 1])


# ---------------------------------------------------------------------------
# symmetry
# ---------------------------------------------------------------------------


def test_symmetry_zero_for_mirror_symmetric_set():
    pts = np.array([[0.5, 0.1, 0.2], [-0.5, 0.1, 0.2], [0.0, -1.0, 3.0]])
    value, _ = symmetry_loss(points_as_samples(pts))
    assert value == 0.0


def test_symmetry_single_point_value():
    value, grad = symmetry_loss(points_as_samples([[1.0, 0.0, 0.0]]))
    assert abs(value - 8.0) < 1e-12
    # d/dx of (x - (-x))^2 * 2 = 16x at x=1
    assert abs(grad[0, 0] - 16.0) < 1e-12


def test_symmetry_accelerated_equals_bruteforce():
    rng = np.random.default_rng(17)
    pts = rng.normal(size=(200, 3))
    value, _ = symmetry_loss(points_as_samples(pts))
    assert value == brute_chamfer(pts, pts * MIRROR)


def test_symmetry_gradient_finite_differences():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(30, 3)) * np.array([1.0, 0.5, 0.5]) + np.array([0.6, 0, 0])

    def value_of(flat):
        return symmetry_loss(points_as_samples(flat.reshape(-1, 3)))[0]

    _, grad = symmetry_loss(points_as_samples(pts))
    h = 1e-6
    flat = pts.reshape(-1)
    for i in range(0, flat.size, 4):
        fp = flat.copy()
        fm = flat.copy()
        fp[i] += h
        fm[i] -= h
        fd = (value_of(fp) - value_of(fm)) / (2 * h)
        assert abs(fd - grad.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fd))


def test_symmetry_invariance_under_commuting_motions():
    # rotations about the x-axis and yz-translations commute with the mirror
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(80, 3))
    base, _ = symmetry_loss(points_as_samples(pts))
    ang = 0.7
    rot = np.array([
        [1, 0, 0],
        [0, np.cos(ang), -np.sin(ang)],
        [0, np.sin(ang), np.cos(ang)],
    ])
    shift = np.array([0.0, 0.4, -1.1])
    moved = pts @ rot.T + shift
    value, _ = symmetry_loss(points_as_samples(moved))
    assert abs(value - base) < 1e-9


# ---------------------------------------------------------------------------
# laplacian
# ---------------------------------------------------------------------------


def test_laplacian_zero_on_flat_grid_interior():
    grid = scenes.plane_grid(6, 6)
    terms, counted = laplacian_vertex_terms(grid)
    # interior vertices of a regular grid sit at their neighbor mean
    nx = 7
    interior = np.zeros(grid.num_vertices, dtype=bool)
    for j in range(1, 6):
        for i in range(1, 6):
            interior[j * nx + i] = True
    assert counted.all()
    assert terms[interior].max() < 1e-24


def test_laplacian_lifted_hexagon_contribution():
    h = 0.37
    patch = scenes.hex_patch(lift=h)
    terms, _ = laplacian_vertex_terms(patch)
    assert abs(terms[0] - h * h) < 1e-12
    value, _, n_isolated = laplacian_loss(patch)
    assert n_isolated == 0
    # the center's contribution to the mean is h^2 / N_v
    assert value >= h * h / patch.num_vertices - 1e-12


def test_laplacian_gradient_finite_differences():
    rng = np.random.default_rng(31)
    mesh = scenes.icosphere(1)
    bumpy = mesh.with_vertices(
        mesh.vertices + 0.05 * rng.standard_normal(mesh.vertices.shape)
    )

    def value_of(v):
        return laplacian_loss(bumpy.with_vertices(v))[0]

    _, grad, _ = laplacian_loss(bumpy)
    h = 1e-6
    flat = bumpy.vertices.reshape(-1)
    idx = rng.choice(flat.size, size=30, replace=False)
    for i in idx:
        fp = flat.copy()
        fm = flat.copy()
        fp[i] += h
        fm[i] -= h
        fd = (value_of(fp.reshape(-1, 3)) - value_of(fm.reshape(-1, 3))) / (2 * h)
        assert abs(fd - grad.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fd))


def test_laplacian_isolated_vertex_excluded():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9.0]])
    f = np.array([[0, 1, 2]], dtype=np.int32)
    mesh = make_mesh(v, f)
    value, grad, n_isolated = laplacian_loss(mesh)
    assert n_isolated == 1
    assert np.all(grad[3] == 0.0)


# ---------------------------------------------------------------------------
# normal consistency
# ---------------------------------------------------------------------------


def test_normal_consistency_flat_is_zero():
    value, grad = normal_consistency_loss(scenes.plane_grid(5, 5))
    assert value < 1e-24
    assert np.abs(grad).max() < 1e-12


def test_normal_consistency_right_angle_fold():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    # faces share edge (0, 1); second face folded 90 degrees
    f = np.array([[0, 1, 2], [1, 0, 3]], dtype=np.int32)
    mesh = make_mesh(v, f)
    value, _ = normal_consistency_loss(mesh)
    assert abs(value - 1.0) < 1e-12


def test_normal_consistency_gradient_finite_differences():
    rng = np.random.default_rng(12)
    mesh = scenes.icosphere(1)
    bumpy = mesh.with_vertices(
        mesh.vertices + 0.04 * rng.standard_normal(mesh.vertices.shape)
    )

    def value_of(v):
        return normal_consistency_loss(bumpy.with_vertices(v))[0]

    _, grad = normal_consistency_loss(bumpy)
    h = 1e-6
    flat = bumpy.vertices.reshape(-1)
    idx = rng.choice(flat.size, size=30, replace=False)
    for i in idx:
        fp = flat.copy()
        fm = flat.copy()
        fp[i] += h
        fm[i] -= h
        fd = (value_of(fp.reshape(-1, 3)) - value_of(fm.reshape(-1, 3))) / (2 * h)
        assert abs(fd - grad.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fd))


# ---------------------------------------------------------------------------
# total
# ---------------------------------------------------------------------------


def sleeve_setup(n_samples=400, seed=0):
    arm, sleeve, cyls = scenes.sleeve_scene()
    sdf = build_body_sdf(arm)
    samples = sample_surface(sleeve, n_samples, seed=seed)
    return sleeve, samples, sdf, cyls


def test_total_zero_weights():
    sleeve, samples, sdf, cyls = sleeve_setup()
    weights = LossWeights(0.0, 0.0, 0.0, 0.0, 0.0, 0.005)
    value, grad, terms = total_geometry_loss(sleeve, samples, sdf, cyls, weights, True)
    assert value == 0.0
    assert np.all(grad == 0.0)


def test_total_componentwise_reproducible():
    sleeve, samples, sdf, cyls = sleeve_setup()
    weights = LossWeights()
    value, _, terms = total_geometry_loss(sleeve, samples, sdf, cyls, weights, True)
    v_coll, _ = collision_loss(samples, sdf, weights.eps)
    v_blk, _ = blocking_loss(samples, cyls)
    v_sym, _ = symmetry_loss(samples)
    v_lap, _, _ = laplacian_loss(sleeve)
    v_nc, _ = normal_consistency_loss(sleeve)
    expected = (
        weights.coll * v_coll + weights.blk * v_blk + weights.sym * v_sym
        + weights.lap * v_lap + weights.nc * v_nc
    )
    assert abs(value - expected) < 1e-9 * max(1.0, abs(expected))
    assert terms["coll"] == v_coll and terms["blk"] == v_blk


def test_total_scatter_preserves_gradient_sum():
    sleeve, samples, sdf, cyls = sleeve_setup()
    weights = LossWeights(lap=0.0, nc=0.0)  # keep only sample-based terms
    _, grad_v, _ = total_geometry_loss(sleeve, samples, sdf, cyls, weights, True)
    g_coll = collision_loss(samples, sdf, weights.eps)[1]
    g_blk = blocking_loss(samples, cyls)[1]
    g_sym = symmetry_loss(samples)[1]
    total_samples = (
        weights.coll * g_coll + weights.blk * g_blk + weights.sym * g_sym
    )
    assert np.abs(grad_v.sum(axis=0) - total_samples.sum(axis=0)).max() < 1e-6


def test_total_gradient_finite_differences_small_garment():
    # ~200-vertex garment: full chain through sample positions and regularizers
    arm, _, cyls = scenes.sleeve_scene()
    sleeve = scenes.tube(0.22, -0.35, 0.55, n_seg=14, n_axial=13)
    assert sleeve.num_vertices == 196
    sdf = build_body_sdf(arm)
    samples = sample_surface(sleeve, 300, seed=5)
    weights = LossWeights()

    def value_of(verts):
        m = sleeve.with_vertices(verts)
        s = SamplePoints(
            samples.face_ids,
            samples.barycentrics,
            positions_from_barycentric(m, samples.face_ids, samples.barycentrics),
        )
        return total_geometry_loss(m, s, sdf, cyls, weights, True)[0]

    _, grad, _ = total_geometry_loss(sleeve, samples, sdf, cyls, weights, True)
    rng = np.random.default_rng(9)
    flat = sleeve.vertices.reshape(-1)
    h = 1e-7
    fds, ans = [], []
    idx = rng.choice(flat.size, size=40, replace=False)
    for i in idx:
        fp = flat.copy()
        fm = flat.copy()
        fp[i] += h
        fm[i] -= h
        fds.append((value_of(fp.reshape(-1, 3)) - value_of(fm.reshape(-1, 3))) / (2 * h))
        ans.append(grad.reshape(-1)[i])
    assert rel_err(np.asarray(ans), np.asarray(fds)) < 1e-3


def test_all_losses_nonnegative_property():
    rng = np.random.default_rng(77)
    sleeve, samples, sdf, cyls = sleeve_setup(n_samples=200, seed=3)
    for trial in range(5):
        noisy = sleeve.with_vertices(
            sleeve.vertices + 0.03 * rng.standard_normal(sleeve.vertices.shape)
        )
        s = sample_surface(noisy, 300, seed=trial)
        assert collision_loss(s, sdf, 0.005)[0] >= 0.0
        assert blocking_loss(s, cyls)[0] >= 0.0
        assert symmetry_loss(s)[0] >= 0.0
        assert laplacian_loss(noisy)[0] >= 0.0
        assert normal_consistency_loss(noisy)[0] >= 0.0
