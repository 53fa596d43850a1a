"""Glue between the neural branches and the ray compositor.

``render_batch`` takes flat ray arrays, runs hierarchical (or uniform)
sampling, evaluates both branches at the merged sample set and composites.
``render_backward`` pushes loss gradients on the rendered maps (and on
per-sample densities) all the way to named parameter gradients.

During the initialization phase the dynamic branch is left out entirely:
rays are composited from the static field alone and no dynamic gradients
exist, which keeps that branch bit-identical to its initial state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from duofield.field import DualModel
from duofield.render import (
    RaySamples,
    composite,
    composite_backward,
    composite_weights,
    hierarchical_t,
    samples_from_t,
    stratified_t,
)


@dataclass(frozen=True)
class RenderSettings:
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    near: float
    far: float
    k_coarse: int = 32
    k_fine: int = 16
    strategy: str = "hierarchical"  # or "uniform"

    def __post_init__(self):
        object.__setattr__(self, "bounds_lo", np.asarray(self.bounds_lo, dtype=np.float64))
        object.__setattr__(self, "bounds_hi", np.asarray(self.bounds_hi, dtype=np.float64))

    @property
    def samples_per_ray(self) -> int:
        return self.k_coarse + (self.k_fine if self.strategy == "hierarchical" else 0)

    def normalize(self, positions: np.ndarray) -> np.ndarray:
        return (positions - self.bounds_lo) / (self.bounds_hi - self.bounds_lo)


def _sample_batch(model: DualModel, settings: RenderSettings, origins, dirs, times,
                  rng, include_dynamic: bool) -> RaySamples:
    n = origins.shape[0]
    t_coarse = stratified_t(n, settings.near, settings.far, settings.k_coarse, rng)
    if settings.strategy == "uniform":
        return samples_from_t(origins, dirs, t_coarse, settings.far)
    if settings.strategy != "hierarchical":
        raise ValueError(f"unknown sampling strategy {settings.strategy!r}")

    coarse = samples_from_t(origins, dirs, t_coarse, settings.far)
    k1 = settings.k_coarse
    pos = settings.normalize(coarse.positions.reshape(-1, 3))
    sigma_s = model.static_density(pos).reshape(n, k1)
    if include_dynamic:
        t_rep = np.repeat(times, k1)
        sigma_d = model.dynamic_density(pos, t_rep).reshape(n, k1)
    else:
        sigma_d = np.zeros_like(sigma_s)
    weights = composite_weights(sigma_s, sigma_d, coarse.deltas)
    t_all = hierarchical_t(t_coarse, weights, settings.k_fine,
                           settings.near, settings.far, rng)
    return samples_from_t(origins, dirs, t_all, settings.far)


def render_batch(model: DualModel, settings: RenderSettings, origins: np.ndarray,
                 dirs: np.ndarray, times: np.ndarray, frames: np.ndarray,
                 rng: np.random.Generator | None = None,
                 include_dynamic: bool = True):
    """Render flat ray arrays; returns (bundle, cache) with (N, K) internals."""
    origins = np.asarray(origins, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    frames = np.asarray(frames, dtype=np.int64)
    n = origins.shape[0]

    samples = _sample_batch(model, settings, origins, dirs, times, rng, include_dynamic)
    k = samples.count
    flat_pos = settings.normalize(samples.positions.reshape(-1, 3))
    flat_dirs = np.repeat(dirs, k, axis=0)
    flat_frames = np.repeat(frames, k)
    flat_times = np.repeat(times, k)

    static_out, static_cache = model.static_forward(flat_pos, flat_dirs, flat_frames)
    num_classes = model.cfg.num_classes
    if include_dynamic:
        dynamic_out, dynamic_cache = model.dynamic_forward(flat_pos, flat_times, flat_dirs)
    else:
        # Inert stand-in: zero density contributes nothing anywhere, but the
        # per-point distributions stay normalized so mass identities hold.
        dynamic_out = {
            "sigma": np.zeros(n * k),
            "color": np.zeros((n * k, 3)),
            "probs": np.full((n * k, num_classes), 1.0 / num_classes),
            "rho": np.zeros(n * k),
        }
        dynamic_cache = None

    def shaped(out):
        return {
            "sigma": out["sigma"].reshape(n, k),
            "color": out["color"].reshape(n, k, 3),
            "probs": out["probs"].reshape(n, k, num_classes),
            "rho": out["rho"].reshape(n, k) if "rho" in out else None,
        }

    s_shaped = shaped(static_out)
    d_shaped = shaped(dynamic_out)
    bundle = composite(samples, s_shaped, d_shaped)
    cache = {
        "samples": samples,
        "static_out": static_out,
        "static_cache": static_cache,
        "dynamic_out": dynamic_out,
        "dynamic_cache": dynamic_cache,
        "include_dynamic": include_dynamic,
        "n": n,
        "k": k,
    }
    return bundle, cache


def render_backward(model: DualModel, bundle, cache, upstream: dict) -> dict[str, np.ndarray]:
    """Parameter gradients for upstream gradients on bundle/per-sample fields."""
    n, k = cache["n"], cache["k"]
    grads_per_sample = composite_backward(bundle, upstream)

    static_grads = model.static_backward(
        cache["static_out"], cache["static_cache"],
        d_sigma=grads_per_sample["sigma_s"].reshape(-1),
        d_color=grads_per_sample["color_s"].reshape(-1, 3),
        d_probs=grads_per_sample["probs_s"].reshape(n * k, -1),
    )
    named = model.flatten_branch_grads("static", static_grads)
    named["appearance"] = static_grads["appearance"]

    if cache["include_dynamic"]:
        dynamic_grads = model.dynamic_backward(
            cache["dynamic_out"], cache["dynamic_cache"],
            d_sigma=grads_per_sample["sigma_d"].reshape(-1),
            d_color=grads_per_sample["color_d"].reshape(-1, 3),
            d_probs=grads_per_sample["probs_d"].reshape(n * k, -1),
            d_rho=grads_per_sample["rho"].reshape(-1),
        )
        named.update(model.flatten_branch_grads("dynamic", dynamic_grads))
    return named


def render_frame(model: DualModel, settings: RenderSettings, camera, timestamp: float,
                 frame_index: int, include_dynamic: bool = True,
                 chunk: int = 2048) -> dict[str, np.ndarray]:
    """Render a full image deterministically (midpoint sampling, no jitter)."""
    w, h = camera.resolution
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dirs = camera.pixel_directions(rows.ravel(), cols.ravel())
    origins = np.broadcast_to(camera.position, dirs.shape)
    maps = {name: [] for name in ("composed_color", "static_color", "dynamic_color",
                                  "depth", "static_depth", "semantics",
                                  "static_semantics", "dynamic_opacity",
                                  "total_opacity", "shadow_map")}
    for start in range(0, dirs.shape[0], chunk):
        sl = slice(start, start + chunk)
        count = dirs[sl].shape[0]
        bundle, _ = render_batch(
            model, settings, origins[sl], dirs[sl],
            np.full(count, timestamp), np.full(count, frame_index),
            rng=None, include_dynamic=include_dynamic)
        for name in maps:
            maps[name].append(getattr(bundle, name))
    out = {}
    for name, parts in maps.items():
        stacked = np.concatenate(parts, axis=0)
        shape = (h, w) + stacked.shape[1:]
        out[name] = stacked.reshape(shape)
    return out
