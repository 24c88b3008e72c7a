"""PNG export helpers (OpenCV-backed, 8- and 16-bit)."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .texsync import LatentTexture


def _to_bgr(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return image[..., None].repeat(3, axis=-1)
    c = image.shape[-1]
    if c == 1:
        return image.repeat(3, axis=-1)
    if c == 2:
        image = np.concatenate([image, np.zeros_like(image[..., :1])], axis=-1)
    rgb = image[..., :3]
    out = rgb[..., ::-1].copy()  # cv2 expects BGR
    if image.shape[-1] == 4:
        out = np.concatenate([out, image[..., 3:4]], axis=-1)
    return out


def write_png(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Writes an image with values in [0, 1]; rows are top-to-bottom."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    bgr = _to_bgr(image)
    if bit_depth == 8:
        data = np.round(bgr * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        data = np.round(bgr * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), data):
        raise OSError(f"failed to write {path}")


def export_texture(
    texture: LatentTexture,
    path_8bit,
    path_16bit=None,
    export_resolution: int = 1024,
) -> None:
    """Writes the texture as RGBA PNGs with the validity mask as alpha.

    Values are clipped to [0, 1]; the vertical axis is flipped so v=1 is
    the top row, matching image conventions. Values resample bilinearly,
    the mask by nearest neighbor.
    """
    values = np.clip(texture.values, 0.0, 1.0)
    if values.shape[-1] == 1:
        values = values.repeat(3, axis=-1)
    elif values.shape[-1] == 2:
        values = np.concatenate([values, np.zeros_like(values[..., :1])], axis=-1)
    values = values[..., :3]
    alpha = texture.valid.astype(np.float64)

    t = texture.resolution
    if export_resolution != t:
        values = cv2.resize(
            values, (export_resolution, export_resolution), interpolation=cv2.INTER_LINEAR
        )
        alpha = cv2.resize(
            alpha, (export_resolution, export_resolution), interpolation=cv2.INTER_NEAREST
        )
    rgba = np.concatenate([values, alpha[..., None]], axis=-1)[::-1]  # v=1 on top
    write_png(path_8bit, rgba, 8)
    if path_16bit is not None:
        write_png(path_16bit, rgba, 16)


def normal_map_to_image(normal_image: np.ndarray, foreground: np.ndarray) -> np.ndarray:
    """Maps unit normals to RGB in [0, 1] with a mid-gray background."""
    img = 0.5 * (normal_image + 1.0)
    img[~foreground] = 0.5
    return img
