"""Command-line entry point.

Subcommands:
  deform    run the garment deformation loop from a config file
  texsync   run multi-view texture synchronization with a mock denoiser
  render    write turntable normal-map renders of a mesh
  validate  check mesh / cylinder / config files and print diagnostics

Configs are single JSON or TOML documents; every run writes a manifest
capturing the resolved config, seeds, timings, and outputs. Exit codes:
0 ok, 1 usage/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, active_backend
from .errors import ConfigError, DrapesyncError, MeshError
from .guidance import ConstantField, PointAttractorField, ZeroField
from .losses import LossWeights, load_cylinders
from .mesh import load_mesh, save_mesh, validate_mesh
from .optimize import (
    DeformConfig,
    config_to_dict,
    latest_checkpoint,
    run_deformation,
)
from .render import make_equatorial_rig
from .texsync import (
    BiasedDenoiser,
    ConstantTargetDenoiser,
    LatentTexture,
    NoiseContaminatedDenoiser,
    cyclic_merge_run,
    fill_uv_voids,
    project_texture,
    rasterize_correspondence,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_DEFORM_EXTRAS = {
    "template": None,
    "body": None,
    "cylinders": None,
    "target": None,
    "field": {"kind": "zero"},
    "out": "runs/deform",
}

_TEXSYNC_DEFAULTS = {
    "mesh": None,
    "out": "runs/texsync",
    "n_views": 6,
    "view_resolution": 256,
    "texture_resolution": 64,
    "export_resolution": 1024,
    "steps": 20,
    "seed": 0,
    "channels": 3,
    "camera_radius": 2.7,
    "fov_deg": 45.0,
    "weight_exponent": 1.0,
    "reweight": True,
    "dump_correspondence": False,
    "denoiser": {"kind": "smooth_target"},
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DrapesyncError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="drapesync",
        description="Garment deformation and multi-view texture synchronization.",
    )
    p.add_argument("--version", action="version", version=f"drapesync {__version__}")
    sub = p.add_subparsers(dest="command")
    p.set_defaults(command=None)

    d = sub.add_parser("deform", help="run the deformation loop")
    d.add_argument("--config", type=Path, help="JSON/TOML run configuration")
    d.add_argument("--out", type=Path, help="output directory (overrides config)")
    d.add_argument("--seed", type=int, help="base seed (overrides config)")
    d.add_argument("--threads", type=int, help="BLAS/OpenMP thread cap")
    d.add_argument("--resume", action="store_true", help="resume from the newest checkpoint")
    d.add_argument("--print-config", action="store_true", help="print defaults and exit")
    d.set_defaults(func=cmd_deform)

    t = sub.add_parser("texsync", help="run texture synchronization")
    t.add_argument("--config", type=Path)
    t.add_argument("--out", type=Path)
    t.add_argument("--seed", type=int)
    t.add_argument("--threads", type=int)
    t.add_argument("--print-config", action="store_true")
    t.set_defaults(func=cmd_texsync)

    r = sub.add_parser("render", help="write turntable normal maps")
    r.add_argument("mesh", type=Path)
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--views", type=int, default=4)
    r.add_argument("--resolution", type=int, default=512)
    r.add_argument("--radius", type=float, default=2.7)
    r.add_argument("--threads", type=int)
    r.set_defaults(func=cmd_render)

    v = sub.add_parser("validate", help="check inputs and print diagnostics")
    v.add_argument("--config", type=Path, help="deform/texsync config to check")
    v.add_argument("--mesh", type=Path, help="mesh file to check")
    v.add_argument("--cylinders", type=Path, help="cylinder JSON to check")
    v.set_defaults(func=cmd_validate)
    return p


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def _load_document(path: Path) -> dict:
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]  # accept a manifest as a config
    return doc


def deform_defaults() -> dict:
    out = dict(_DEFORM_EXTRAS)
    out.update(config_to_dict(DeformConfig()))
    return out


def texsync_defaults() -> dict:
    return json.loads(json.dumps(_TEXSYNC_DEFAULTS))


def _require_number(doc: dict, field: str, minimum=None, positive=False):
    cur: object = doc
    for part in field.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return
        cur = cur[part]
    if not isinstance(cur, (int, float)) or isinstance(cur, bool):
        raise ConfigError(field, f"must be a number, got {cur!r}")
    if positive and not cur > 0:
        raise ConfigError(field, f"must be positive, got {cur}")
    if minimum is not None and cur < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {cur}")


def parse_deform_config(doc: dict):
    """Resolves a deform config document into (DeformConfig, extras)."""
    merged = deform_defaults()
    weights = dict(merged["weights"])
    doc = dict(doc)
    if "weights" in doc:
        weights.update(doc.pop("weights"))
    merged.update(doc)
    merged["weights"] = weights

    for key in ("coll", "blk", "sym", "lap", "nc"):
        _require_number({"weights": weights}, f"weights.{key}", minimum=0.0)
    _require_number({"weights": weights}, "weights.eps", positive=True)
    _require_number(merged, "iterations", minimum=1)
    _require_number(merged, "learning_rate", positive=True)
    _require_number(merged, "n_samples", minimum=1)
    _require_number(merged, "batch_size", minimum=1)

    known = {f.name for f in dataclasses.fields(DeformConfig)}
    cfg_kwargs = {k: v for k, v in merged.items() if k in known and k != "weights"}
    for tup in ("t_range_early", "t_range_late", "elevation_range_deg"):
        if tup in cfg_kwargs:
            cfg_kwargs[tup] = tuple(cfg_kwargs[tup])
    config = DeformConfig(weights=LossWeights(**weights), **cfg_kwargs)
    try:
        config.validate()
    except ConfigError:
        raise
    extras = {k: merged.get(k) for k in _DEFORM_EXTRAS}
    return config, extras


def _require_file(path_str, field: str, base: Path | None = None) -> Path:
    if not path_str:
        raise ConfigError(field, "missing required path")
    path = Path(path_str)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(field, f"file not found: {path}")
    return path


def _config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _write_manifest(out_dir: Path, payload: dict) -> None:
    tmp = out_dir / ".manifest.json.tmp"
    tmp.write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")
    tmp.replace(out_dir / "manifest.json")


def make_guidance_field(field_cfg: dict, latent_shape, seed: int):
    """Builds an analytic guidance field and its condition token."""
    kind = field_cfg.get("kind", "zero")
    if kind == "zero":
        return ZeroField(), None
    if kind == "constant":
        delta = float(field_cfg.get("cond_delta", 1.0))
        base = float(field_cfg.get("uncond", 0.0))
        return ConstantField(base=base, offsets={"prompt": delta}), "prompt"
    if kind == "point_attractor":
        rng = np.random.default_rng((seed, 7))
        scale = float(field_cfg.get("scale", 1.0))
        anchors = {
            None: np.zeros(latent_shape),
            "prompt": scale * rng.standard_normal(latent_shape),
        }
        return PointAttractorField(anchors), "prompt"
    raise ConfigError("field.kind", f"unknown guidance field {kind!r}")


# ---------------------------------------------------------------------------
# deform
# ---------------------------------------------------------------------------


def cmd_deform(args) -> int:
    if args.print_config:
        print(json.dumps(deform_defaults(), indent=2))
        return EXIT_OK
    if args.config is None:
        raise ConfigError("config", "deform requires --config (or --print-config)")
    doc = _load_document(args.config)
    base = args.config.parent
    config, extras = parse_deform_config(doc)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out_dir = Path(args.out) if args.out else Path(extras.get("out") or "runs/deform")
    out_dir.mkdir(parents=True, exist_ok=True)

    template = load_mesh(_require_file(extras.get("template"), "template", base))
    body = None
    if extras.get("body"):
        body = load_mesh(_require_file(extras.get("body"), "body", base))
    cylinders = []
    if extras.get("cylinders"):
        cylinders = load_cylinders(_require_file(extras.get("cylinders"), "cylinders", base))
    target = None
    if config.guidance == "target_shape":
        target = load_mesh(_require_file(extras.get("target"), "target", base))
    field = cond = None
    if config.guidance == "ism":
        latent = config.render_resolution // config.latent_factor
        field, cond = make_guidance_field(
            extras.get("field") or {"kind": "zero"}, (latent, latent, 3), config.seed
        )

    resume_from = None
    if args.resume:
        resume_from = latest_checkpoint(out_dir)
        if resume_from is None:
            raise ConfigError("resume", f"no checkpoint found in {out_dir}")

    t0 = time.perf_counter()
    result = run_deformation(
        template, body, cylinders, config,
        guidance_field=field, guidance_cond=cond, target=target,
        run_dir=out_dir, resume_from=resume_from,
    )
    elapsed = time.perf_counter() - t0

    mesh_path = out_dir / "final_mesh.obj"
    save_mesh(result.mesh, mesh_path)
    csv_path = out_dir / "loss.csv"
    _write_loss_csv(csv_path, result.trace)
    resolved = {**extras, **config_to_dict(config)}
    _write_manifest(out_dir, {
        "kind": "deform",
        "version": __version__,
        "backend": active_backend(),
        "config": resolved,
        "config_hash": _config_hash(resolved),
        "seeds": {"base": config.seed},
        "timings": {"run_seconds": elapsed},
        "outputs": {"mesh": str(mesh_path), "loss_csv": str(csv_path)},
    })
    print(f"deform: {config.iterations} iterations in {elapsed:.1f}s -> {mesh_path}")
    return EXIT_OK


_CSV_HEADER = ["iteration", "L_ISM-proxy", "L_coll", "L_blk", "L_sym", "L_lap", "L_nc", "total"]
_TRACE_KEYS = ["iteration", "ism", "coll", "blk", "sym", "lap", "nc", "total"]


def _write_loss_csv(path: Path, trace: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        n = len(trace["iteration"])
        for i in range(n):
            writer.writerow(
                [int(trace["iteration"][i])]
                + [repr(float(trace[k][i])) for k in _TRACE_KEYS[1:]]
            )


# ---------------------------------------------------------------------------
# texsync
# ---------------------------------------------------------------------------


def _smooth_texture(resolution: int, channels: int) -> np.ndarray:
    u = (np.arange(resolution) + 0.5) / resolution
    uu, vv = np.meshgrid(u, u)
    base = [
        0.5 + 0.3 * np.sin(2.0 * np.pi * uu),
        0.5 + 0.3 * vv,
        0.4 + 0.2 * np.cos(2.0 * np.pi * uu),
    ]
    while len(base) < channels:
        base.append(0.5 * np.ones_like(uu))
    return np.stack(base[:channels], axis=-1)


def make_denoiser(doc: dict, corr, seed: int, channels: int = 3):
    """Builds a mock denoiser from its config section."""
    kind = doc.get("kind", "smooth_target")
    t = corr.resolution
    if doc.get("texture_npy"):
        gt = np.load(_require_file(doc["texture_npy"], "denoiser.texture_npy"))
        if gt.shape[:2] != (t, t):
            raise ConfigError("denoiser.texture_npy", f"expected {(t, t)} texture")
    else:
        gt = _smooth_texture(t, channels)
    gt_tex = LatentTexture(gt, corr.texel_mask.copy())
    gt_views, _ = project_texture(corr, gt_tex)
    if kind in ("smooth_target", "constant_target"):
        return ConstantTargetDenoiser(gt_views.values), gt_tex
    if kind == "biased":
        scale = float(doc.get("bias_scale", 0.2))
        biases = np.linspace(-scale, scale, corr.n_views)[:, None, None, None]
        biases = biases * np.ones((1,) + gt_views.values.shape[1:])
        return BiasedDenoiser(
            gt_views.values, biases, tau_scaled=bool(doc.get("tau_scaled", False))
        ), gt_tex
    if kind == "noise":
        sigma = float(doc.get("sigma", 0.05))
        return NoiseContaminatedDenoiser(gt_views.values, sigma, seed), gt_tex
    raise ConfigError("denoiser.kind", f"unknown denoiser {kind!r}")


def cmd_texsync(args) -> int:
    if args.print_config:
        print(json.dumps(texsync_defaults(), indent=2))
        return EXIT_OK
    if args.config is None:
        raise ConfigError("config", "texsync requires --config (or --print-config)")
    doc = _load_document(args.config)
    merged = texsync_defaults()
    denoiser_cfg = dict(merged["denoiser"])
    denoiser_cfg.update(doc.pop("denoiser", {}) if isinstance(doc.get("denoiser"), dict) else {})
    merged.update(doc)
    merged["denoiser"] = denoiser_cfg
    if args.seed is not None:
        merged["seed"] = args.seed
    for key in ("n_views", "view_resolution", "texture_resolution", "steps"):
        _require_number(merged, key, minimum=1)
    if merged["n_views"] < 2:
        raise ConfigError("n_views", "need at least 2 views")

    mesh = load_mesh(_require_file(merged.get("mesh"), "mesh", args.config.parent))
    if not mesh.has_uvs:
        raise ConfigError("mesh", "missing UVs (texture synchronization needs a UV layout)")
    out_dir = Path(args.out) if args.out else Path(merged.get("out") or "runs/texsync")
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    cameras = make_equatorial_rig(
        int(merged["n_views"]),
        radius=float(merged["camera_radius"]),
        resolution=int(merged["view_resolution"]),
        fov_deg=float(merged["fov_deg"]),
    )
    corr = rasterize_correspondence(mesh, cameras, int(merged["texture_resolution"]))
    denoiser, _ = make_denoiser(
        merged["denoiser"], corr, int(merged["seed"]), int(merged["channels"])
    )
    result = cyclic_merge_run(
        denoiser, mesh, cameras,
        steps=int(merged["steps"]),
        seed=int(merged["seed"]),
        texture_resolution=int(merged["texture_resolution"]),
        channels=int(merged["channels"]),
        weight_exponent=float(merged["weight_exponent"]),
        reweight=bool(merged["reweight"]),
        corr=corr,
    )
    filled, fill_report = fill_uv_voids(result.texture, corr.texel_chart)
    if merged.get("dump_correspondence"):
        from .texsync import save_correspondence

        save_correspondence(corr, out_dir / "correspondence")
    elapsed = time.perf_counter() - t0

    from .imgio import export_texture, write_png

    tex8 = out_dir / "texture.png"
    tex16 = out_dir / "texture_16bit.png"
    export_texture(filled, tex8, tex16, int(merged["export_resolution"]))
    view_paths = []
    for vi in range(result.views.n_views):
        vp = out_dir / f"view_{vi:02d}.png"
        write_png(vp, result.views.values[vi][..., :3])
        view_paths.append(str(vp))
    metrics_path = out_dir / "consistency.json"
    metrics_path.write_text(json.dumps({
        "spread_pre_merge": result.spread_pre_merge.tolist(),
        "spread_post_merge": result.spread_post_merge.tolist(),
        "observed_texels": int(corr.obs_mask.any(axis=0).sum()),
        "covered_texels": int(corr.texel_mask.sum()),
        "fill_report": fill_report,
    }, indent=2) + "\n", encoding="utf-8")

    _write_manifest(out_dir, {
        "kind": "texsync",
        "version": __version__,
        "backend": active_backend(),
        "config": merged,
        "config_hash": _config_hash(merged),
        "seeds": {"base": int(merged["seed"])},
        "timings": {"run_seconds": elapsed},
        "outputs": {
            "texture_8bit": str(tex8),
            "texture_16bit": str(tex16),
            "views": view_paths,
            "consistency": str(metrics_path),
        },
    })
    print(f"texsync: {merged['steps']} steps in {elapsed:.1f}s -> {tex8}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------


def cmd_render(args) -> int:
    if args.views < 1:
        raise ConfigError("views", "need at least 1 view")
    mesh = load_mesh(_require_file(args.mesh, "mesh"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    from .guidance import render_normal_map
    from .imgio import normal_map_to_image, write_png
    from .render import orbit_camera

    center = 0.5 * (mesh.vertices.min(axis=0) + mesh.vertices.max(axis=0))
    radius = args.radius * max(
        1e-6, float(np.abs(mesh.vertices - center).max())
    )
    paths = []
    for k in range(args.views):
        az = 2.0 * np.pi * k / args.views
        cam = orbit_camera(az, 0.0, radius, center, args.resolution)
        render = render_normal_map(mesh, cam)
        img = normal_map_to_image(render.image, render.foreground)
        path = out_dir / f"normal_{k:02d}.png"
        write_png(path, img)
        paths.append(path)
    print(f"render: wrote {len(paths)} views to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    checked = 0
    failures = 0
    if args.mesh is not None:
        checked += 1
        failures += _validate_mesh_file(args.mesh)
    if args.cylinders is not None:
        checked += 1
        failures += _validate_cylinder_file(args.cylinders)
    if args.config is not None:
        checked += 1
        failures += _validate_config_file(args.config)
    if checked == 0:
        raise ConfigError("validate", "nothing to check; pass --mesh/--cylinders/--config")
    return EXIT_OK if failures == 0 else EXIT_USAGE


def _validate_mesh_file(path: Path) -> int:
    try:
        mesh = load_mesh(_require_file(path, "mesh"))
        validate_mesh(mesh)
    except (DrapesyncError, FileNotFoundError) as exc:
        print(f"mesh {path}: FAIL ({exc})")
        return 1
    from .mesh import boundary_edges

    nb = len(boundary_edges(mesh.faces))
    print(
        f"mesh {path}: ok ({mesh.num_vertices} vertices, {mesh.num_faces} faces, "
        f"{nb} boundary edges, uvs={'yes' if mesh.has_uvs else 'no'})"
    )
    return 0


def _validate_cylinder_file(path: Path) -> int:
    try:
        cyls = load_cylinders(_require_file(path, "cylinders"))
    except (DrapesyncError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"cylinders {path}: FAIL ({exc})")
        return 1
    print(f"cylinders {path}: ok ({len(cyls)} cylinders)")
    return 0


def _validate_config_file(path: Path) -> int:
    try:
        doc = _load_document(Path(path))
        if "mesh" in doc:
            merged = texsync_defaults()
            merged.update(doc)
            print(f"config {path}: ok (texsync)")
        else:
            parse_deform_config(doc)
            print(f"config {path}: ok (deform)")
    except (DrapesyncError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config {path}: FAIL ({exc})")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
