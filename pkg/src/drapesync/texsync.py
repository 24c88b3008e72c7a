"""Multi-view texture synchronization on a shared UV texel grid.

The pipeline rasterizes texel-to-view correspondence once per mesh, then
cycles: denoise per view, back-project the per-view estimates into the
texel grid as a weight-normalized aggregate, reproject the merged texture
into the views, and re-noise along a fixed schedule. View weights follow
the cosine between the surface normal and the direction to the camera,
with side views adaptively downweighted so the front/back views keep the
high-frequency content.

Denoisers are pluggable; the shipped mock family (constant-target,
per-view-biased, noise-contaminated) exercises the merging math without a
neural backbone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshError
from .mesh import TriMesh, vertex_normals
from .render import (
    CameraView,
    back_view_index,
    project_points,
    rasterize,
)

DEPTH_TOLERANCE = 1e-3  # one part in 2000 of the [-1, 1] scene box
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LatentTexture:
    values: np.ndarray  # (T, T, C)
    valid: np.ndarray   # (T, T) bool

    @property
    def resolution(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class LatentViews:
    values: np.ndarray      # (N_v, H, W, C)
    foreground: np.ndarray  # (N_v, H, W) bool

    @property
    def n_views(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ViewCorrespondence:
    """Texel geometry plus per-view visibility, built once per mesh."""

    mesh: TriMesh
    cameras: list
    resolution: int
    texel_mask: np.ndarray    # (T, T) covered by a UV chart
    texel_face: np.ndarray    # (T, T) int, -1 outside charts
    texel_pos: np.ndarray     # (T, T, 3)
    texel_normal: np.ndarray  # (T, T, 3)
    texel_chart: np.ndarray   # (T, T) int, -1 outside
    n_charts: int
    obs_mask: np.ndarray      # (V, T, T) texel visible in view
    obs_px: np.ndarray        # (V, T, T, 2) projected pixel coordinates
    pix_fg: np.ndarray        # (V, H, W)
    pix_uv: np.ndarray        # (V, H, W, 2)
    pix_depth: np.ndarray     # (V, H, W)

    @property
    def n_views(self) -> int:
        return len(self.cameras)


# ---------------------------------------------------------------------------
# Correspondence construction
# ---------------------------------------------------------------------------


def uv_texel_table(mesh: TriMesh, resolution: int):
    """Rasterizes the UV charts onto the texel grid.

    Returns (texel_face, texel_bary, texel_mask); face indices double as
    the depth key so overlaps resolve deterministically to the lowest id.
    """
    if not mesh.has_uvs:
        raise MeshError("mesh has no UVs; texture operations need a UV layout")
    from . import _backend

    uv = mesh.uvs[mesh.uv_faces]  # (F, 3, 2)
    xy = np.ascontiguousarray(uv * resolution, dtype=np.float64)
    nf = mesh.num_faces
    zv = np.ascontiguousarray(
        np.repeat(np.arange(1.0, nf + 1.0)[:, None], 3, axis=1)
    )
    iw = np.ones((nf, 3))
    depth, face, bary = _backend.raster_fill(xy, zv, iw, resolution, resolution)
    mask = face >= 0
    return face, bary, mask


def uv_charts(mesh: TriMesh) -> tuple[np.ndarray, int]:
    """Connected components of faces in UV space (shared uv corner indices)."""
    nf = mesh.num_faces
    parent = np.arange(nf)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    by_uv: dict[int, int] = {}
    for f in range(nf):
        for k in range(3):
            t = int(mesh.uv_faces[f, k])
            if t in by_uv:
                union(by_uv[t], f)
            else:
                by_uv[t] = f
    roots = np.array([find(f) for f in range(nf)])
    _, chart_of_face = np.unique(roots, return_inverse=True)
    return chart_of_face, int(chart_of_face.max()) + 1 if nf else 0


def rasterize_correspondence(
    mesh: TriMesh,
    cameras: list[CameraView],
    texture_resolution: int = 64,
    depth_tolerance: float = DEPTH_TOLERANCE,
) -> ViewCorrespondence:
    """Builds texel geometry and per-view z-buffered visibility.

    A texel is observed by a view iff its surface point projects inside the
    image and the rasterized depth at that pixel matches the point's view
    depth within the tolerance.
    """
    if not mesh.has_uvs:
        raise MeshError("mesh has no UVs; texture operations need a UV layout")
    t = texture_resolution
    face, bary, mask = uv_texel_table(mesh, t)

    # texel 3D geometry from the chart rasterization
    texel_pos = np.zeros((t, t, 3))
    texel_normal = np.zeros((t, t, 3))
    vn = vertex_normals(mesh)
    fids = face[mask]
    b = bary[mask]
    corners = mesh.faces[fids]
    texel_pos[mask] = (
        b[:, 0:1] * mesh.vertices[corners[:, 0]]
        + b[:, 1:2] * mesh.vertices[corners[:, 1]]
        + b[:, 2:3] * mesh.vertices[corners[:, 2]]
    )
    nrm = (
        b[:, 0:1] * vn[corners[:, 0]]
        + b[:, 1:2] * vn[corners[:, 1]]
        + b[:, 2:3] * vn[corners[:, 2]]
    )
    lens = np.linalg.norm(nrm, axis=1, keepdims=True)
    texel_normal[mask] = nrm / np.where(lens == 0.0, 1.0, lens)

    chart_of_face, n_charts = uv_charts(mesh)
    texel_chart = np.full((t, t), -1, dtype=np.int64)
    texel_chart[mask] = chart_of_face[fids]

    n_views = len(cameras)
    h, w = cameras[0].height, cameras[0].width
    obs_mask = np.zeros((n_views, t, t), dtype=bool)
    obs_px = np.zeros((n_views, t, t, 2))
    pix_fg = np.zeros((n_views, h, w), dtype=bool)
    pix_uv = np.zeros((n_views, h, w, 2))
    pix_depth = np.full((n_views, h, w), np.inf)

    pts = texel_pos[mask]
    for vi, cam in enumerate(cameras):
        raster = rasterize(mesh, cam)
        fg = raster.foreground
        pix_fg[vi] = fg
        pix_depth[vi] = raster.depth
        fuv = mesh.uvs[mesh.uv_faces[raster.face_id[fg]]]
        bb = raster.bary[fg]
        pix_uv[vi][fg] = (
            bb[:, 0:1] * fuv[:, 0] + bb[:, 1:2] * fuv[:, 1] + bb[:, 2:3] * fuv[:, 2]
        )

        px, py, depth, _ = project_points(cam, pts)
        inb = (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height) & (depth > 0)
        to_cam = cam.position[None, :] - pts
        facing = np.einsum("ij,ij->i", texel_normal[mask], to_cam) > 0.0
        inb &= facing
        zread = np.full(len(pts), np.inf)
        if inb.any():
            # interpolate the depth buffer at the subpixel position so the
            # metric tolerance is not swamped by surface slope across pixels
            zs, ok = _bilinear_masked(
                raster.depth[..., None], fg, px[inb], py[inb]
            )
            got = np.where(inb)[0][ok]
            zread[got] = zs[ok, 0]
        visible = inb & (np.abs(depth - zread) < depth_tolerance)
        vis_grid = np.zeros((t, t), dtype=bool)
        vis_grid[mask] = visible
        obs_mask[vi] = vis_grid
        pxg = np.zeros((t, t, 2))
        pxg[mask] = np.stack([px, py], axis=1)
        obs_px[vi] = pxg

    return ViewCorrespondence(
        mesh, list(cameras), t, mask, face, texel_pos, texel_normal,
        texel_chart, n_charts, obs_mask, obs_px, pix_fg, pix_uv, pix_depth,
    )


# ---------------------------------------------------------------------------
# View weights and reweighting
# ---------------------------------------------------------------------------


def view_weights(corr: ViewCorrespondence, exponent: float = 1.0) -> np.ndarray:
    """Per-(view, texel) cosine weights, zero for unobserved texels."""
    alpha = np.zeros((corr.n_views, corr.resolution, corr.resolution))
    for vi, cam in enumerate(corr.cameras):
        to_cam = cam.position[None, :] - corr.texel_pos[corr.texel_mask]
        to_cam /= np.linalg.norm(to_cam, axis=1, keepdims=True)
        cosv = np.einsum("ij,ij->i", corr.texel_normal[corr.texel_mask], to_cam)
        a = np.zeros((corr.resolution, corr.resolution))
        a[corr.texel_mask] = np.maximum(cosv, 0.0) ** exponent
        alpha[vi] = a * corr.obs_mask[vi]
    return alpha


def reweight_side_views(
    alpha: np.ndarray, front: int, back: int | None
) -> np.ndarray:
    """Scales every non-front/back view by 1 - (front + back) share.

    Applied per texel; texels with zero total weight pass through
    unchanged, and the front/back weights are never modified.
    """
    total = alpha.sum(axis=0)
    fb = alpha[front].copy()
    if back is not None:
        fb = fb + alpha[back]
    factor = np.ones_like(total)
    nz = total > 0.0
    factor[nz] = 1.0 - fb[nz] / total[nz]
    out = alpha * factor[None, ...]
    out[front] = alpha[front]
    if back is not None:
        out[back] = alpha[back]
    return out


# ---------------------------------------------------------------------------
# Sampling helpers (validity-masked bilinear lookups)
# ---------------------------------------------------------------------------


def _bilinear_masked(values: np.ndarray, valid: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Masked bilinear lookup at continuous (x, y), centers at integer + 0.5.

    Invalid neighbors are dropped and weights renormalized; falls back to
    the nearest cell when no neighbor is valid. Returns (samples, ok).
    """
    h, w = valid.shape
    gx = x - 0.5
    gy = y - 0.5
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    fx = gx - x0
    fy = gy - y0
    acc = np.zeros((len(x), values.shape[-1]))
    wsum = np.zeros(len(x))
    for dy in (0, 1):
        for dx in (0, 1):
            xi = np.clip(x0 + dx, 0, w - 1)
            yi = np.clip(y0 + dy, 0, h - 1)
            ok_n = valid[yi, xi]
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            wgt = wgt * ok_n
            # zero masked values before multiplying: invalid cells may hold
            # inf (depth buffers) and 0 * inf would poison the sum
            vals = np.where(ok_n[:, None], values[yi, xi], 0.0)
            acc += wgt[:, None] * vals
            wsum += wgt
    ok = wsum > 1e-12
    out = np.zeros_like(acc)
    out[ok] = acc[ok] / wsum[ok, None]
    # nearest-cell fallback for samples whose bilinear support is empty
    miss = ~ok
    if miss.any():
        xi = np.clip(np.round(gx[miss]).astype(np.int64), 0, w - 1)
        yi = np.clip(np.round(gy[miss]).astype(np.int64), 0, h - 1)
        near_ok = valid[yi, xi]
        out[np.where(miss)[0][near_ok]] = values[yi[near_ok], xi[near_ok]]
        ok[np.where(miss)[0]] = near_ok
    return out, ok


# ---------------------------------------------------------------------------
# Aggregate / project (the merge cycle's two halves)
# ---------------------------------------------------------------------------


def aggregate(
    corr: ViewCorrespondence, alpha: np.ndarray, views: LatentViews
) -> LatentTexture:
    """Weight-normalized back-projection of per-view images into the texel grid."""
    t = corr.resolution
    channels = views.values.shape[-1]
    acc = np.zeros((t, t, channels))
    wsum = np.zeros((t, t))
    for vi in range(corr.n_views):
        obs = corr.obs_mask[vi] & (alpha[vi] > 0.0)
        if not obs.any():
            continue
        px = corr.obs_px[vi][obs]
        vals, ok = _bilinear_masked(
            views.values[vi], views.foreground[vi], px[:, 0], px[:, 1]
        )
        wgt = alpha[vi][obs] * ok
        acc[obs] += wgt[:, None] * vals
        wsum[obs] += wgt
    valid = wsum > 0.0
    out = np.zeros_like(acc)
    out[valid] = acc[valid] / wsum[valid, None]
    return LatentTexture(out, valid)


def project_texture(
    corr: ViewCorrespondence,
    texture: LatentTexture,
    views_in: LatentViews | None = None,
):
    """Per-pixel texture lookup into each view.

    Foreground pixels whose texel region is invalid keep their incoming
    value (blend-through) when views_in is given, otherwise zero. Returns
    (views, textured_mask).
    """
    t = corr.resolution
    n_views = corr.n_views
    h, w = corr.pix_fg.shape[1:]
    channels = texture.values.shape[-1]
    out = (
        views_in.values.copy()
        if views_in is not None
        else np.zeros((n_views, h, w, channels))
    )
    textured = np.zeros((n_views, h, w), dtype=bool)
    for vi in range(n_views):
        fg = corr.pix_fg[vi]
        if not fg.any():
            continue
        uv = corr.pix_uv[vi][fg]
        vals, ok = _bilinear_masked(
            texture.values, texture.valid, uv[:, 0] * t, uv[:, 1] * t
        )
        rows, cols = np.where(fg)
        out[vi, rows[ok], cols[ok]] = vals[ok]
        textured[vi, rows[ok], cols[ok]] = True
    return LatentViews(out, corr.pix_fg.copy()), textured


def cross_view_spread(corr: ViewCorrespondence, views: LatentViews) -> float:
    """Max over texels of the value spread across observing views.

    Reads the nearest pixel per observation so the metric reflects what
    each view actually holds at the correspondence, without interpolation
    smear from neighboring regions.
    """
    t = corr.resolution
    channels = views.values.shape[-1]
    vmin = np.full((t, t, channels), np.inf)
    vmax = np.full((t, t, channels), -np.inf)
    nobs = np.zeros((t, t), dtype=np.int64)
    h, w = views.values.shape[1:3]
    for vi in range(corr.n_views):
        obs = corr.obs_mask[vi]
        if not obs.any():
            continue
        px = corr.obs_px[vi][obs]
        xi = np.clip(np.floor(px[:, 0]).astype(np.int64), 0, w - 1)
        yi = np.clip(np.floor(px[:, 1]).astype(np.int64), 0, h - 1)
        ok = views.foreground[vi][yi, xi]
        vals = views.values[vi][yi[ok], xi[ok]]
        rows, cols = np.where(obs)
        rows, cols = rows[ok], cols[ok]
        vmin[rows, cols] = np.minimum(vmin[rows, cols], vals)
        vmax[rows, cols] = np.maximum(vmax[rows, cols], vals)
        nobs[rows, cols] += 1
    multi = nobs >= 2
    if not multi.any():
        return 0.0
    return float((vmax[multi] - vmin[multi]).max())


# ---------------------------------------------------------------------------
# Mock denoisers
# ---------------------------------------------------------------------------


class Denoiser:
    """Maps (z, t, view index) to a clean estimate; deterministic given seed."""

    def __call__(self, z: np.ndarray, t: float, view: int) -> np.ndarray:
        raise NotImplementedError


class ConstantTargetDenoiser(Denoiser):
    """Always returns the fixed per-view target, ignoring its input."""

    def __init__(self, target_views: np.ndarray):
        self.target_views = np.asarray(target_views, dtype=np.float64)

    def __call__(self, z, t, view):
        return self.target_views[view].copy()


class BiasedDenoiser(Denoiser):
    """Per-view target plus a constant per-view bias.

    With tau_scaled=True the bias shrinks with the noise level (bias * t/1000),
    mimicking a model whose per-view prior washes out as denoising proceeds.
    """

    def __init__(self, target_views: np.ndarray, biases, tau_scaled: bool = False):
        self.target_views = np.asarray(target_views, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.tau_scaled = tau_scaled

    def __call__(self, z, t, view):
        scale = (t / 1000.0) if self.tau_scaled else 1.0
        return self.target_views[view] + scale * self.biases[view]


class NoiseContaminatedDenoiser(Denoiser):
    """Per-view target plus reproducible noise drawn from (seed, t, view)."""

    def __init__(self, target_views: np.ndarray, sigma: float, seed: int = 0):
        self.target_views = np.asarray(target_views, dtype=np.float64)
        self.sigma = sigma
        self.seed = seed

    def __call__(self, z, t, view):
        rng = np.random.default_rng((self.seed, int(round(t * 1000)), view))
        return self.target_views[view] + self.sigma * rng.standard_normal(
            self.target_views[view].shape
        )


# ---------------------------------------------------------------------------
# Cyclic merging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeResult:
    texture: LatentTexture
    views: LatentViews
    spread_pre_merge: np.ndarray   # per step, before aggregation
    spread_post_merge: np.ndarray  # per step, after reprojection


def cyclic_merge_run(
    denoiser: Denoiser,
    mesh: TriMesh,
    cameras: list[CameraView],
    steps: int = 20,
    seed: int = 0,
    texture_resolution: int = 64,
    channels: int = 3,
    weight_exponent: float = 1.0,
    reweight: bool = True,
    corr: ViewCorrespondence | None = None,
) -> MergeResult:
    """Runs the denoise / aggregate / reproject / re-noise cycle.

    The latent texture starts as unit normal noise projected into the
    views, so the initial noisy views are 3D-consistent; re-noising mixes
    the merged estimates back toward that shared noise along a linear
    noise-level schedule.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if corr is None:
        corr = rasterize_correspondence(mesh, cameras, texture_resolution)
    alpha = view_weights(corr, weight_exponent)
    if reweight:
        alpha = reweight_side_views(alpha, 0, back_view_index(corr.n_views))

    rng = np.random.default_rng(seed)
    t = corr.resolution
    noise_tex = LatentTexture(
        rng.standard_normal((t, t, channels)), corr.texel_mask.copy()
    )
    noise_views, _ = project_texture(corr, noise_tex)
    z = LatentViews(noise_views.values.copy(), corr.pix_fg.copy())

    taus = np.linspace(1.0, 0.0, steps + 1)
    pre_spread = np.zeros(steps)
    post_spread = np.zeros(steps)
    texture = LatentTexture(np.zeros((t, t, channels)), np.zeros((t, t), dtype=bool))
    for k in range(steps):
        tau = taus[k]
        est = np.stack(
            [denoiser(z.values[vi], tau * 1000.0, vi) for vi in range(corr.n_views)]
        )
        est_views = LatentViews(est, corr.pix_fg.copy())
        pre_spread[k] = cross_view_spread(corr, est_views)
        texture = aggregate(corr, alpha, est_views)
        merged, textured = project_texture(corr, texture, views_in=est_views)
        # post-merge consistency is scoped to textured pixels; blend-through
        # pixels keep per-view content by design
        post_spread[k] = cross_view_spread(corr, LatentViews(merged.values, textured))
        tau_next = taus[k + 1]
        z = LatentViews(
            (1.0 - tau_next) * merged.values + tau_next * noise_views.values,
            corr.pix_fg.copy(),
        )
    return MergeResult(texture, z, pre_spread, post_spread)


# ---------------------------------------------------------------------------
# Symmetric local attention bias (reference implementation)
# ---------------------------------------------------------------------------


def symmetric_attention_bias(
    points_a: np.ndarray,
    points_b: np.ndarray,
    w_direct: float,
    w_mirror: float,
    length_scale: float,
) -> np.ndarray:
    """log of a two-kernel mixture over direct and x-mirrored distances.

    B[i, j] = log(w_d exp(-|a_i - b_j|^2 / 2 l^2)
                 + w_m exp(-|a_i - mirror_x(b_j)|^2 / 2 l^2) + floor).
    """
    if w_direct < 0.0 or w_mirror < 0.0 or (w_direct == 0.0 and w_mirror == 0.0):
        raise ValueError("weights must be non-negative and not both zero")
    if not length_scale > 0.0:
        raise ValueError("length_scale must be positive")
    a = np.asarray(points_a, dtype=np.float64)
    b = np.asarray(points_b, dtype=np.float64)
    mb = b * np.array([-1.0, 1.0, 1.0])
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    dm2 = np.sum((a[:, None, :] - mb[None, :, :]) ** 2, axis=2)
    s = 2.0 * length_scale * length_scale
    return np.log(w_direct * np.exp(-d2 / s) + w_mirror * np.exp(-dm2 / s) + _LOG_FLOOR)


def apply_biased_attention(q, k, v, bias: np.ndarray) -> np.ndarray:
    """softmax(Q K^T / sqrt(d) + bias) V on flattened grids.

    Reference implementation for property checks, not a fast path.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    shape = q.shape
    q2 = q.reshape(-1, shape[-1])
    k2 = k.reshape(-1, shape[-1])
    v2 = v.reshape(len(k2), -1)
    if bias.shape != (len(q2), len(k2)):
        raise ValueError(f"bias shape {bias.shape} != {(len(q2), len(k2))}")
    logits = q2 @ k2.T / np.sqrt(q2.shape[1]) + bias
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    out = weights @ v2
    return out.reshape(*shape[:-1], v2.shape[-1])


# ---------------------------------------------------------------------------
# UV void filling
# ---------------------------------------------------------------------------


def save_correspondence(corr: ViewCorrespondence, out_dir) -> None:
    """Debug dump: binary arrays plus a JSON header describing them."""
    import json
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    arrays = {
        "texel_mask": corr.texel_mask,
        "texel_face": corr.texel_face,
        "texel_pos": corr.texel_pos,
        "texel_normal": corr.texel_normal,
        "texel_chart": corr.texel_chart,
        "obs_mask": corr.obs_mask,
        "obs_px": corr.obs_px,
        "pix_fg": corr.pix_fg,
        "pix_uv": corr.pix_uv,
        "pix_depth": corr.pix_depth,
    }
    with open(out_dir / "correspondence.npz", "wb") as fh:
        np.savez_compressed(fh, **arrays)
    header = {
        "resolution": corr.resolution,
        "n_views": corr.n_views,
        "n_charts": corr.n_charts,
        "arrays": {
            k: {"shape": list(v.shape), "dtype": str(v.dtype)} for k, v in arrays.items()
        },
    }
    (out_dir / "correspondence.json").write_text(
        json.dumps(header, indent=2) + "\n", encoding="utf-8"
    )


def fill_uv_voids(texture: LatentTexture, charts: np.ndarray):
    """Breadth-first dilation of valid texels within each chart's mask.

    Every in-chart texel becomes valid; previously valid texels are
    untouched; texels outside all charts are left as-is. A chart with no
    valid texel is filled with the global mean of valid texels and flagged
    in the report. Returns (filled texture, report dict).
    """
    values = texture.values.copy()
    valid = texture.valid.copy()
    in_chart = charts >= 0
    report = {"empty_charts": [], "filled_texels": 0}

    global_valid = texture.valid & in_chart
    if global_valid.any():
        global_mean = texture.values[global_valid].mean(axis=0)
    else:
        global_mean = np.zeros(texture.values.shape[-1])

    for chart in range(int(charts.max()) + 1 if in_chart.any() else 0):
        mask = charts == chart
        if not mask.any():
            continue
        if not (valid & mask).any():
            values[mask] = global_mean
            valid |= mask
            report["empty_charts"].append(chart)
            report["filled_texels"] += int(mask.sum())
            continue
        # wave-by-wave dilation; neighbor priority N, W, E, S is fixed so
        # the fill is deterministic under ties
        while (mask & ~valid).any():
            cur = valid & mask
            grew = False
            shifted = [
                (np.roll(cur, 1, axis=0), np.roll(values, 1, axis=0)),   # from north
                (np.roll(cur, 1, axis=1), np.roll(values, 1, axis=1)),   # from west
                (np.roll(cur, -1, axis=1), np.roll(values, -1, axis=1)),  # from east
                (np.roll(cur, -1, axis=0), np.roll(values, -1, axis=0)),  # from south
            ]
            # forbid wraparound by zeroing the rolled-in border rows/cols
            shifted[0][0][0, :] = False
            shifted[1][0][:, 0] = False
            shifted[2][0][:, -1] = False
            shifted[3][0][-1, :] = False
            newly = np.zeros_like(valid)
            for src_valid, src_vals in shifted:
                take = mask & ~valid & ~newly & src_valid
                if take.any():
                    values[take] = src_vals[take]
                    newly |= take
                    grew = True
            if not grew:
                # disconnected remainder inside the chart mask (should not
                # happen for rasterized charts); fall back to the chart mean
                rest = mask & ~valid
                values[rest] = values[valid & mask].mean(axis=0)
                newly |= rest
            valid |= newly
            report["filled_texels"] += int(newly.sum())
    return LatentTexture(values, valid), report
