"""Selects the compiled kernels when available, numpy fallbacks otherwise.

Override with DRAPESYNC_KERNELS=compiled|numpy|auto (default auto). Forcing
"compiled" raises if the extension did not build.
"""

from __future__ import annotations

import os

from . import kernels_numpy

_MODE = os.environ.get("DRAPESYNC_KERNELS", "auto").lower()

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

if _MODE not in ("auto", "compiled", "numpy"):
    raise RuntimeError(f"DRAPESYNC_KERNELS must be auto|compiled|numpy, got {_MODE!r}")
if _MODE == "compiled" and _compiled is None:
    raise RuntimeError("DRAPESYNC_KERNELS=compiled but the extension is not built")

_USE_COMPILED = _compiled is not None and _MODE != "numpy"


def active_backend() -> str:
    return "compiled" if _USE_COMPILED else "numpy"


def bvh_closest_points(queries, nodes, tri_order, tri_a, tri_b, tri_c):
    if _USE_COMPILED:
        bb_min, bb_max, left, right, start, count = nodes
        return _compiled.bvh_closest_points(
            queries, bb_min, bb_max, left, right, start, count,
            tri_order, tri_a, tri_b, tri_c,
        )
    return kernels_numpy.bvh_closest_points(
        queries, nodes, tri_order, tri_a, tri_b, tri_c
    )


def raster_fill(xy, zview, invw, height, width, z_near=1e-9):
    if _USE_COMPILED:
        return _compiled.raster_fill(xy, zview, invw, int(height), int(width), z_near)
    return kernels_numpy.raster_fill(xy, zview, invw, int(height), int(width), z_near)
