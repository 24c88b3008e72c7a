"""Flow-guided shape supervision on rendered normal maps.

A GuidanceField is a conditional vector field v(x, t, cond) over latent
images, with integer-like timesteps 0..1000 mapped to tau = t/1000 (tau=0
clean, tau=1 noise). The interval gradient evaluates the field at two
nearby timesteps along a deterministically inverted trajectory and feeds
the difference back through the encoder adjoint, the frozen-visibility
normal-render backprop, and (in the optimizer) the Poisson adjoint.

Analytic fields (zero, constant-offset, linear, point-attractor) stand in
for a real flow backbone at desk scale; the interface is where one would
plug in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import PointIndex
from .mesh import (
    TriMesh,
    sample_surface,
    scatter_cross_gradient,
    scatter_sample_gradient,
    vertex_normal_sums,
)
from .render import CameraView, RasterResult, interpolate_vertex_attribute, rasterize

MAX_TIMESTEP = 1000.0


# ---------------------------------------------------------------------------
# Guidance fields
# ---------------------------------------------------------------------------


class GuidanceField:
    """Conditional vector field over latent images.

    Implementations must be deterministic for fixed inputs and return an
    array of the input's shape. cond is an opaque token; None is the
    unconditional branch.
    """

    def __call__(self, x: np.ndarray, t: float, cond=None) -> np.ndarray:
        raise NotImplementedError


class ZeroField(GuidanceField):
    def __call__(self, x, t, cond=None):
        return np.zeros_like(x)


class ConstantField(GuidanceField):
    """v = base + offset(cond); offsets default to zero for unknown tokens."""

    def __init__(self, base=0.0, offsets=None):
        self.base = base
        self.offsets = dict(offsets or {})

    def __call__(self, x, t, cond=None):
        out = np.zeros_like(x) + self.base
        if cond in self.offsets:
            out = out + self.offsets[cond]
        return out


class LinearField(GuidanceField):
    """v = A x on the flattened latent; pairs with a matrix-exponential oracle."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=np.float64)

    def __call__(self, x, t, cond=None):
        return (self.matrix @ x.reshape(-1)).reshape(x.shape)


class PointAttractorField(GuidanceField):
    """v = anchor(cond) - x; anchors keyed by token, None for unconditional."""

    def __init__(self, anchors: dict):
        self.anchors = dict(anchors)

    def __call__(self, x, t, cond=None):
        return self.anchors[cond] - x


# ---------------------------------------------------------------------------
# Trajectory inversion and the interval gradient
# ---------------------------------------------------------------------------


def invert_trajectory(
    field: GuidanceField, x0: np.ndarray, t: float, steps: int
) -> np.ndarray:
    """Euler integration of the unconditional field from tau=0 to tau=t/1000."""
    if not 0.0 < t <= MAX_TIMESTEP:
        raise ValueError(f"timestep must be in (0, {MAX_TIMESTEP:g}], got {t}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(x0, dtype=np.float64, copy=True)
    dtau = (t / MAX_TIMESTEP) / steps
    for k in range(steps):
        x = x + dtau * field(x, k * t / steps, None)
        if not np.isfinite(x).all():
            raise FloatingPointError(f"non-finite latent at inversion substep {k}")
    return x


def ism_gradient(
    field: GuidanceField,
    x0: np.ndarray,
    t: float,
    s: float,
    cond,
    w_t: float = 1.0,
    invert_steps: int = 10,
    bridge_steps: int = 1,
) -> np.ndarray:
    """Interval gradient w_t * [v(x_t, t, cond) - v(x_s, s, None)] on x0.

    x_s comes from deterministic inversion up to s; x_t continues from x_s
    with unconditional Euler substeps over the interval.
    """
    if not (0.0 <= s < t <= MAX_TIMESTEP):
        raise ValueError(f"need 0 <= s < t <= {MAX_TIMESTEP:g}, got s={s}, t={t}")
    x_s = invert_trajectory(field, x0, s, invert_steps) if s > 0.0 else np.array(
        x0, dtype=np.float64, copy=True
    )
    x_t = x_s
    dtau = ((t - s) / MAX_TIMESTEP) / bridge_steps
    for k in range(bridge_steps):
        x_t = x_t + dtau * field(x_t, s + k * (t - s) / bridge_steps, None)
    g = w_t * (field(x_t, t, cond) - field(x_s, s, None))
    if not np.isfinite(g).all():
        raise FloatingPointError("non-finite interval gradient")
    return g


# ---------------------------------------------------------------------------
# Normal-map rendering with frozen-visibility differentiation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalRender:
    """Rendered world-space normals plus the provenance needed to backprop."""

    image: np.ndarray       # (H, W, 3), zeros at background
    raster: RasterResult
    camera: CameraView
    mesh: TriMesh

    @property
    def foreground(self) -> np.ndarray:
        return self.raster.foreground


def render_normal_map(mesh: TriMesh, camera: CameraView, res=None) -> NormalRender:
    """Z-buffered render of interpolated, renormalized vertex normals."""
    if res is not None:
        camera = camera.with_resolution(res[1], res[0])
    raster = rasterize(mesh, camera)
    image = _shade_normals(mesh, raster)
    return NormalRender(image, raster, camera, mesh)


def _shade_normals(mesh: TriMesh, raster: RasterResult) -> np.ndarray:
    sums = vertex_normal_sums(mesh)
    norms = np.linalg.norm(sums, axis=1, keepdims=True)
    vnormals = sums / np.where(norms == 0.0, 1.0, norms)
    m = interpolate_vertex_attribute(mesh, raster, vnormals)
    fg = raster.foreground
    lens = np.linalg.norm(m[fg], axis=1, keepdims=True)
    image = np.zeros_like(m)
    image[fg] = m[fg] / np.where(lens == 0.0, 1.0, lens)
    return image


def render_with_frozen_visibility(render: NormalRender, vertices: np.ndarray) -> np.ndarray:
    """Re-shades the stored provenance with new vertex positions.

    The pixel-to-face assignment and barycentrics are reused, so only the
    normals change; this is the forward map that backprop_normal_render
    differentiates, and what finite-difference checks must call.
    """
    return _shade_normals(render.mesh.with_vertices(vertices), render.raster)


def backprop_normal_render(render: NormalRender, grad_image: np.ndarray) -> np.ndarray:
    """Vertex gradient of a loss on the normal image, visibility frozen.

    Chains through per-pixel renormalization, barycentric interpolation,
    vertex-normal normalization, and the face cross products.
    """
    mesh = render.mesh
    raster = render.raster
    fg = raster.foreground
    if not fg.any():
        return np.zeros_like(mesh.vertices)

    sums = vertex_normal_sums(mesh)
    snorm = np.linalg.norm(sums, axis=1, keepdims=True)
    safe_snorm = np.where(snorm == 0.0, 1.0, snorm)
    vnormals = sums / safe_snorm

    faces = mesh.faces[raster.face_id[fg]]
    b = raster.bary[fg]
    m = (
        b[:, 0:1] * vnormals[faces[:, 0]]
        + b[:, 1:2] * vnormals[faces[:, 1]]
        + b[:, 2:3] * vnormals[faces[:, 2]]
    )
    mlen = np.linalg.norm(m, axis=1, keepdims=True)
    safe_mlen = np.where(mlen == 0.0, 1.0, mlen)
    p = m / safe_mlen

    g_pix = grad_image[fg]
    # through pixel renormalization: dL/dm = (g - p (p.g)) / |m|
    g_m = (g_pix - p * np.einsum("ij,ij->i", p, g_pix)[:, None]) / safe_mlen
    # through interpolation: accumulate onto vertex normals
    g_vn = np.zeros_like(vnormals)
    for k in range(3):
        np.add.at(g_vn, faces[:, k], b[:, k : k + 1] * g_m)
    # through vertex-normal normalization: dL/dsums
    g_sums = (g_vn - vnormals * np.einsum("ij,ij->i", vnormals, g_vn)[:, None]) / safe_snorm
    # sums are plain per-vertex accumulations of face crosses
    g_cross = (
        g_sums[mesh.faces[:, 0]] + g_sums[mesh.faces[:, 1]] + g_sums[mesh.faces[:, 2]]
    )
    return scatter_cross_gradient(mesh, g_cross)


# ---------------------------------------------------------------------------
# Latent encode / decode (block-average surrogate with exact adjoint)
# ---------------------------------------------------------------------------


def encode_latent(image: np.ndarray, factor: int) -> np.ndarray:
    """Block-average pooling by an integer factor."""
    h, w, c = image.shape
    if factor < 1 or h % factor or w % factor:
        raise ValueError(f"factor {factor} must divide image size {h}x{w}")
    return image.reshape(h // factor, factor, w // factor, factor, c).mean(axis=(1, 3))


def decode_gradient(grad_latent: np.ndarray, factor: int) -> np.ndarray:
    """Exact adjoint of encode_latent: uniform up-scatter over each block."""
    lh, lw, c = grad_latent.shape
    up = np.repeat(np.repeat(grad_latent, factor, axis=0), factor, axis=1)
    return up / float(factor * factor)


# ---------------------------------------------------------------------------
# Desk-scale guidance oracle: pull surface samples toward a target shape
# ---------------------------------------------------------------------------


def target_shape_guidance(
    mesh: TriMesh, target: TriMesh, n_samples: int, seed: int = 0
):
    """Symmetric Chamfer pull between surface samples of mesh and target.

    Returns (value, per-vertex gradient); only the mesh side carries
    gradients, scattered through the sample barycentrics.
    """
    ours = sample_surface(mesh, n_samples, seed)
    theirs = sample_surface(target, n_samples, seed)
    p = ours.positions
    q = theirs.positions
    n = ours.count
    idx_q = PointIndex(q)
    idx_p = PointIndex(p)
    j_of_i, d2_pq = idx_q.nearest(p)
    i_of_j, d2_qp = idx_p.nearest(q)
    value = float(d2_pq.sum() / n + d2_qp.sum() / n)

    grad_samples = 2.0 * (p - q[j_of_i]) / n
    np.add.at(grad_samples, i_of_j, -2.0 * (q - p[i_of_j]) / n)
    return value, scatter_sample_gradient(mesh, ours, grad_samples)


def sample_guidance_cameras(
    rng: np.random.Generator,
    center,
    radius: float,
    count: int,
    resolution: int,
    fov_deg: float = 45.0,
    elevation_range_deg=(-15.0, 30.0),
) -> list[CameraView]:
    """Random orbit cameras: azimuth uniform, elevation uniform in range."""
    from .render import orbit_camera

    cams = []
    for _ in range(count):
        az = rng.uniform(0.0, 2.0 * np.pi)
        el = np.radians(rng.uniform(*elevation_range_deg))
        cams.append(orbit_camera(az, el, radius, center, resolution, fov_deg))
    return cams
