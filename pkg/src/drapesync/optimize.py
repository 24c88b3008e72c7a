"""The deformation loop: Adam over the per-face Jacobian field, driven by
guidance gradients plus the weighted geometric losses.

Everything runs in the normalized frame (garment bounding box scaled into
[-1, 1]^3, body and cylinders transformed along); the similarity transform
is inverted on export. Per-iteration randomness is drawn from seeds
derived as (base_seed, iteration, purpose), so traces are bitwise
reproducible and runs can resume from checkpoints without replaying.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GradientError
from .guidance import (
    GuidanceField,
    backprop_normal_render,
    decode_gradient,
    encode_latent,
    ism_gradient,
    render_normal_map,
    sample_guidance_cameras,
    target_shape_guidance,
)
from .losses import BlockingCylinder, LossWeights, total_geometry_loss
from .mesh import TriMesh, normalization_to_unit_box, sample_surface
from .njf import (
    backprop_deformation,
    build_poisson_system,
    solve_deformation,
    template_jacobians,
)
from .spatial import build_body_sdf

_SEED_SAMPLES = 0
_SEED_GUIDANCE = 1

TRACE_COLUMNS = ("iteration", "ism", "coll", "blk", "sym", "lap", "nc", "total")


@dataclass
class AdamState:
    """First/second moments per Jacobian entry plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, shape, learning_rate: float) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0, learning_rate)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameters."""
    if not np.isfinite(grads).all():
        raise GradientError("adam", "non-finite gradient fed to the optimizer")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def timestep_range(
    iteration: int,
    early=(500, 980),
    late=(50, 980),
    switch: int = 300,
) -> tuple[int, int]:
    """Noise-level sampling bounds: a high floor early, widened later."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return tuple(early) if iteration < switch else tuple(late)


@dataclass
class DeformConfig:
    iterations: int = 600
    learning_rate: float = 0.002
    batch_size: int = 4
    n_samples: int = 50000
    weights: LossWeights = field(default_factory=LossWeights)
    enable_sym: bool = False
    seed: int = 0
    # timestep schedule
    t_range_early: tuple = (500, 980)
    t_range_late: tuple = (50, 980)
    phase_switch: int = 300
    ism_interval: int = 50
    invert_steps: int = 10
    # guidance selection: none | target_shape | ism
    guidance: str = "none"
    guidance_weight: float = 1.0
    guidance_samples: int = 4000
    render_resolution: int = 512
    latent_factor: int = 8
    camera_radius: float = 2.7
    camera_fov_deg: float = 45.0
    elevation_range_deg: tuple = (-15.0, 30.0)
    checkpoint_every: int = 100

    def validate(self) -> None:
        from .errors import ConfigError

        if self.iterations < 1:
            raise ConfigError("iterations", "must be >= 1")
        if not self.learning_rate > 0.0:
            raise ConfigError("learning_rate", "must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")
        if self.n_samples < 1:
            raise ConfigError("n_samples", "must be >= 1")
        if self.guidance not in ("none", "target_shape", "ism"):
            raise ConfigError("guidance", f"unknown selection {self.guidance!r}")
        if self.render_resolution % self.latent_factor != 0:
            raise ConfigError("latent_factor", "must divide render_resolution")


@dataclass
class DeformResult:
    mesh: TriMesh                 # final garment, original coordinate frame
    mesh_normalized: TriMesh      # final garment in the optimization frame
    jacobians: np.ndarray
    trace: dict                   # column name -> array over iterations
    seed: int
    transform: object             # the garment-to-unit-box similarity


def _purpose_rng(base_seed: int, iteration: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng((base_seed, iteration, purpose))


def run_deformation(
    template: TriMesh,
    body: TriMesh | None,
    cylinders,
    config: DeformConfig,
    guidance_field: GuidanceField | None = None,
    guidance_cond=None,
    target: TriMesh | None = None,
    run_dir=None,
    resume_from=None,
    progress=None,
) -> DeformResult:
    """Runs the full deformation schedule and returns the result bundle.

    body may be None only when the collision weight is zero. target is the
    goal mesh for guidance="target_shape"; guidance_field/guidance_cond
    feed guidance="ism".
    """
    config.validate()
    transform = normalization_to_unit_box(template)
    tpl = transform.apply_mesh(template)
    sdf = None
    if body is not None:
        sdf = build_body_sdf(transform.apply_mesh(body))
    cyls = [
        BlockingCylinder(
            transform.apply(c.closed_end_center), c.axis, c.radius * transform.scale
        )
        for c in (cylinders or [])
    ]
    tgt = transform.apply_mesh(target) if target is not None else None
    if config.guidance == "target_shape" and tgt is None:
        raise GradientError("guidance", "target_shape guidance needs a target mesh")
    if config.guidance == "ism" and guidance_field is None:
        raise GradientError("guidance", "ism guidance needs a guidance field")

    system = build_poisson_system(tpl)
    jac = template_jacobians(system)
    adam = AdamState.init(jac.shape, config.learning_rate)
    start_iter = 0
    trace: dict[str, list] = {c: [] for c in TRACE_COLUMNS}

    if resume_from is not None:
        ckpt = np.load(resume_from, allow_pickle=False)
        jac = ckpt["jacobians"]
        adam.m = ckpt["adam_m"]
        adam.v = ckpt["adam_v"]
        adam.step = int(ckpt["adam_step"])
        start_iter = int(ckpt["next_iteration"])
        for c in TRACE_COLUMNS:
            trace[c] = list(ckpt[f"trace_{c}"])

    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)

    for it in range(start_iter, config.iterations):
        vertices = solve_deformation(system, jac)
        current = tpl.with_vertices(vertices)
        grad_vertices = np.zeros_like(vertices)
        ism_proxy = 0.0

        if config.guidance == "target_shape":
            value, g = target_shape_guidance(
                current, tgt, config.guidance_samples,
                seed=(config.seed, it, _SEED_GUIDANCE),
            )
            grad_vertices += config.guidance_weight * g
            ism_proxy = value
        elif config.guidance == "ism":
            rng = _purpose_rng(config.seed, it, _SEED_GUIDANCE)
            lo, hi = timestep_range(
                it, config.t_range_early, config.t_range_late, config.phase_switch
            )
            t = int(rng.integers(lo, hi + 1))
            s = max(t - config.ism_interval, 0)
            cams = sample_guidance_cameras(
                rng,
                center=vertices.mean(axis=0),
                radius=config.camera_radius,
                count=config.batch_size,
                resolution=config.render_resolution,
                fov_deg=config.camera_fov_deg,
                elevation_range_deg=config.elevation_range_deg,
            )
            for cam in cams:
                ren = render_normal_map(current, cam)
                latent = encode_latent(ren.image, config.latent_factor)
                g_lat = ism_gradient(
                    guidance_field, latent, t, s, guidance_cond,
                    w_t=1.0, invert_steps=config.invert_steps,
                )
                g_img = decode_gradient(g_lat, config.latent_factor)
                grad_vertices += (
                    config.guidance_weight / config.batch_size
                ) * backprop_normal_render(ren, g_img)
                ism_proxy += float(np.abs(g_lat).mean()) / config.batch_size

        samples = sample_surface(
            current, config.n_samples, seed=(config.seed, it, _SEED_SAMPLES)
        )
        geo_value, g_geo, terms = total_geometry_loss(
            current, samples, sdf, cyls, config.weights, config.enable_sym
        )
        grad_vertices += g_geo

        grad_jac = backprop_deformation(system, grad_vertices)
        jac = adam_step(adam, jac, grad_jac)

        trace["iteration"].append(it)
        trace["ism"].append(ism_proxy)
        for name in ("coll", "blk", "sym", "lap", "nc"):
            trace[name].append(terms[name])
        trace["total"].append(geo_value + ism_proxy)

        done = it + 1 == config.iterations
        if run_dir is not None and (
            (it + 1) % config.checkpoint_every == 0 or done
        ):
            _write_checkpoint(run_dir, it + 1, jac, adam, trace)
        if progress is not None:
            progress(it, trace)

    final_vertices = solve_deformation(system, jac)
    final_norm = tpl.with_vertices(final_vertices)
    final = tpl.with_vertices(transform.invert(final_vertices))
    return DeformResult(
        mesh=final,
        mesh_normalized=final_norm,
        jacobians=jac,
        trace={c: np.asarray(vals) for c, vals in trace.items()},
        seed=config.seed,
        transform=transform,
    )


def _write_checkpoint(run_dir: Path, next_iteration: int, jac, adam: AdamState, trace):
    payload = {
        "jacobians": jac,
        "adam_m": adam.m,
        "adam_v": adam.v,
        "adam_step": adam.step,
        "next_iteration": next_iteration,
    }
    for c in TRACE_COLUMNS:
        payload[f"trace_{c}"] = np.asarray(trace[c])
    tmp = run_dir / f".checkpoint_{next_iteration:06d}.npz.tmp"
    final = run_dir / f"checkpoint_{next_iteration:06d}.npz"
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    tmp.replace(final)


def latest_checkpoint(run_dir) -> Path | None:
    run_dir = Path(run_dir)
    found = sorted(run_dir.glob("checkpoint_*.npz"))
    return found[-1] if found else None


def config_to_dict(config: DeformConfig) -> dict:
    out = dataclasses.asdict(config)
    out["weights"] = dataclasses.asdict(config.weights)
    return out
