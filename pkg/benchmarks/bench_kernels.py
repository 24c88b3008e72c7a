#!/usr/bin/env python3
"""Benchmarks the compiled kernels against the pure-numpy fallbacks.

Covers the two hot paths (BVH closest-point queries and raster fill) plus
one full deformation iteration at production sample counts. Run after an
editable install; the compiled rows disappear if the extension is absent.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from drapesync import kernels_numpy, scenes
from drapesync.mesh import face_corners, sample_surface
from drapesync.render import CameraView, project_points
from drapesync.spatial import build_bvh

try:
    from drapesync import _kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, python_s, compiled_s):
    speed = f"{python_s / compiled_s:6.1f}x" if compiled_s else "     -"
    comp = f"{compiled_s * 1e3:10.2f}" if compiled_s else "         -"
    print(f"{name:<38} {python_s * 1e3:10.2f} {comp} {speed}")


def bench_closest_points(n_queries, n_faces_hint):
    body = scenes.capsule(0.3, 0.8, n_seg=48, n_cap_rings=16)
    bvh = build_bvh(body)
    rng = np.random.default_rng(0)
    q = np.ascontiguousarray(rng.uniform(-1.3, 1.3, size=(n_queries, 3)))
    a, b, c = face_corners(body)

    t_brute = timeit(lambda: kernels_numpy.brute_closest_points(q, a, b, c), repeats=1)
    t_comp = None
    if compiled is not None:
        bb = bvh.nodes
        t_comp = timeit(
            lambda: compiled.bvh_closest_points(
                q, *bb, bvh.tri_order, bvh.tri_a, bvh.tri_b, bvh.tri_c
            )
        )
    row(
        f"closest points ({n_queries} q, {body.num_faces} tris)",
        t_brute,
        t_comp,
    )


def bench_raster(resolution):
    mesh = scenes.icosphere(4)
    cam = CameraView(
        position=np.array([0.0, 0.4, 3.0]),
        look_at=np.zeros(3),
        up=np.array([0.0, 1.0, 0.0]),
        width=resolution,
        height=resolution,
    )
    px, py, depth, invw = project_points(cam, mesh.vertices)
    f = mesh.faces
    xy = np.ascontiguousarray(np.stack([px[f], py[f]], axis=-1))
    zv = np.ascontiguousarray(depth[f])
    iw = np.ascontiguousarray(invw[f])

    t_py = timeit(lambda: kernels_numpy.raster_fill(xy, zv, iw, resolution, resolution))
    t_comp = None
    if compiled is not None:
        t_comp = timeit(lambda: compiled.raster_fill(xy, zv, iw, resolution, resolution))
    row(f"raster fill ({resolution}^2, {mesh.num_faces} tris)", t_py, t_comp)


def bench_iteration(n_samples):
    import os

    from drapesync.losses import LossWeights, total_geometry_loss
    from drapesync.njf import backprop_deformation, build_poisson_system, solve_deformation, template_jacobians
    from drapesync.spatial import build_body_sdf

    arm, sleeve, cyls = scenes.sleeve_scene()
    sdf = build_body_sdf(arm)
    system = build_poisson_system(sleeve)
    jac = template_jacobians(system)
    weights = LossWeights()

    def one_iteration():
        verts = solve_deformation(system, jac)
        cur = sleeve.with_vertices(verts)
        samples = sample_surface(cur, n_samples, seed=0)
        _, grad, _ = total_geometry_loss(cur, samples, sdf, cyls, weights, False)
        backprop_deformation(system, grad)

    backend = "compiled" if compiled is not None else "numpy"
    t = timeit(one_iteration, repeats=3)
    print(f"{'full geometry iteration':<38} {t * 1e3:10.2f} ms "
          f"({n_samples} samples, {backend} kernels active)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--queries", type=int, default=10_000)
    parser.add_argument("--resolution", type=int, default=512)
    parser.add_argument("--samples", type=int, default=50_000)
    args = parser.parse_args()

    print(f"{'kernel':<38} {'numpy ms':>10} {'compiled ms':>10} {'speedup':>7}")
    bench_closest_points(args.queries, None)
    bench_raster(args.resolution)
    print()
    bench_iteration(args.samples)


if __name__ == "__main__":
    main()
