#!/usr/bin/env python3
"""Regenerates the checked-in golden scene under scenes/sleeve_on_capsule/."""

from __future__ import annotations

import json
from pathlib import Path

from drapesync import scenes
from drapesync.losses import save_cylinders
from drapesync.mesh import save_mesh

ROOT = Path(__file__).resolve().parent.parent / "scenes" / "sleeve_on_capsule"


def main() -> None:
    ROOT.mkdir(parents=True, exist_ok=True)
    arm, sleeve, cylinders = scenes.sleeve_scene()
    save_mesh(arm, ROOT / "arm.obj")
    save_mesh(sleeve, ROOT / "sleeve.obj")
    save_cylinders(cylinders, ROOT / "cylinders.json")

    uv_sleeve = scenes.tube(0.5, -0.7, 0.7, n_seg=24, n_axial=12, with_uvs=True)
    save_mesh(uv_sleeve, ROOT / "uv_tube.obj")

    deform_cfg = {
        "template": "sleeve.obj",
        "body": "arm.obj",
        "cylinders": "cylinders.json",
        "iterations": 600,
        "n_samples": 5000,
        "guidance": "none",
        "enable_sym": False,
        "seed": 0,
    }
    (ROOT / "deform.json").write_text(json.dumps(deform_cfg, indent=2) + "\n")

    texsync_cfg = {
        "mesh": "uv_tube.obj",
        "n_views": 6,
        "view_resolution": 256,
        "texture_resolution": 48,
        "export_resolution": 512,
        "steps": 8,
        "seed": 0,
        "denoiser": {"kind": "smooth_target"},
    }
    (ROOT / "texsync.json").write_text(json.dumps(texsync_cfg, indent=2) + "\n")
    print(f"golden scene written to {ROOT}")


if __name__ == "__main__":
    main()
