"""Cameras and z-buffer rasterization shared by guidance and texsync.

Projection yields pixel coordinates plus positive view depths; the raster
kernel interpolates with perspective-corrected barycentrics, so depths
read from the buffers are linear view-space distances and can be compared
against projected points with a metric tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .mesh import TriMesh


@dataclass(frozen=True)
class CameraView:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    width: int
    height: int
    fov_deg: float | None = 45.0     # None selects orthographic
    ortho_scale: float = 1.0         # half-height of the ortho frustum

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "look_at", np.asarray(self.look_at, dtype=np.float64))
        object.__setattr__(self, "up", np.asarray(self.up, dtype=np.float64))
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera resolution must be positive")
        fwd = self.look_at - self.position
        if np.linalg.norm(fwd) == 0.0:
            raise ValueError("camera position equals look-at point")
        if np.linalg.norm(np.cross(fwd, self.up)) < 1e-12:
            raise ValueError("camera up vector is parallel to the view direction")

    @property
    def is_perspective(self) -> bool:
        return self.fov_deg is not None

    def basis(self):
        """(right, up, forward) orthonormal camera axes."""
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return right, true_up, fwd

    def with_resolution(self, width: int, height: int) -> "CameraView":
        return replace(self, width=width, height=height)


def project_points(camera: CameraView, points: np.ndarray):
    """Projects world points to (px, py, view_depth, inv_w).

    px/py are continuous pixel coordinates (centers at integer + 0.5, row 0
    at the image top); view_depth is the distance along the view axis
    (positive in front); inv_w is 1/depth for perspective cameras and 1 for
    orthographic ones.
    """
    points = np.asarray(points, dtype=np.float64)
    right, up, fwd = camera.basis()
    rel = points - camera.position
    x = rel @ right
    y = rel @ up
    depth = rel @ fwd
    aspect = camera.width / camera.height
    if camera.is_perspective:
        tan_y = np.tan(np.radians(camera.fov_deg) / 2.0)
        safe = np.where(depth == 0.0, 1.0, depth)
        ndc_x = x / (safe * tan_y * aspect)
        ndc_y = y / (safe * tan_y)
        invw = 1.0 / safe
    else:
        ndc_x = x / (camera.ortho_scale * aspect)
        ndc_y = y / camera.ortho_scale
        invw = np.ones_like(depth)
    px = (ndc_x + 1.0) * 0.5 * camera.width
    py = (1.0 - ndc_y) * 0.5 * camera.height
    return px, py, depth, invw


@dataclass(frozen=True)
class RasterResult:
    depth: np.ndarray    # (H, W) view depth, inf at background
    face_id: np.ndarray  # (H, W) int, -1 at background
    bary: np.ndarray     # (H, W, 3) perspective-corrected weights

    @property
    def foreground(self) -> np.ndarray:
        return self.face_id >= 0


def rasterize(mesh: TriMesh, camera: CameraView) -> RasterResult:
    """Z-buffered rasterization of the mesh into the camera's image plane."""
    px, py, depth, invw = project_points(camera, mesh.vertices)
    f = mesh.faces
    xy = np.ascontiguousarray(
        np.stack([px[f], py[f]], axis=-1), dtype=np.float64
    )
    zv = np.ascontiguousarray(depth[f], dtype=np.float64)
    iw = np.ascontiguousarray(invw[f], dtype=np.float64)
    d, fid, bary = _backend.raster_fill(xy, zv, iw, camera.height, camera.width)
    return RasterResult(d, fid, bary)


def interpolate_vertex_attribute(
    mesh: TriMesh, raster: RasterResult, attribute: np.ndarray
) -> np.ndarray:
    """Per-pixel barycentric interpolation of a per-vertex attribute."""
    h, w = raster.face_id.shape
    out = np.zeros((h, w, attribute.shape[1]))
    fg = raster.foreground
    faces = mesh.faces[raster.face_id[fg]]
    b = raster.bary[fg]
    out[fg] = (
        b[:, 0:1] * attribute[faces[:, 0]]
        + b[:, 1:2] * attribute[faces[:, 1]]
        + b[:, 2:3] * attribute[faces[:, 2]]
    )
    return out


def make_equatorial_rig(
    n_views: int,
    radius: float = 2.7,
    resolution: int = 256,
    fov_deg: float | None = 45.0,
    ortho_scale: float = 1.2,
    center=(0.0, 0.0, 0.0),
) -> list[CameraView]:
    """Cameras at azimuths k*360/n on the equator, looking at the center.

    View 0 (azimuth 0, on the +z axis) is the designated front view; the
    view at azimuth 180, when present, is the back view.
    """
    if n_views < 2:
        raise ValueError("an equatorial rig needs at least 2 views")
    center = np.asarray(center, dtype=np.float64)
    views = []
    for k in range(n_views):
        a = 2.0 * np.pi * k / n_views
        pos = center + radius * np.array([np.sin(a), 0.0, np.cos(a)])
        views.append(
            CameraView(
                position=pos,
                look_at=center,
                up=np.array([0.0, 1.0, 0.0]),
                width=resolution,
                height=resolution,
                fov_deg=fov_deg,
                ortho_scale=ortho_scale,
            )
        )
    return views


def back_view_index(n_views: int) -> int | None:
    """Index of the azimuth-180 view, if the rig has one."""
    if n_views % 2 == 0:
        return n_views // 2
    return None


def orbit_camera(
    azimuth_rad: float,
    elevation_rad: float,
    radius: float,
    center,
    resolution: int,
    fov_deg: float = 45.0,
) -> CameraView:
    """Perspective camera on a sphere around the center, +z azimuth origin."""
    center = np.asarray(center, dtype=np.float64)
    ce = np.cos(elevation_rad)
    pos = center + radius * np.array(
        [ce * np.sin(azimuth_rad), np.sin(elevation_rad), ce * np.cos(azimuth_rad)]
    )
    return CameraView(
        position=pos,
        look_at=center,
        up=np.array([0.0, 1.0, 0.0]),
        width=resolution,
        height=resolution,
        fov_deg=fov_deg,
    )
