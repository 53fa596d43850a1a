"""Ray sampling and dual-branch volumetric compositing.

Per sample i along a ray, with per-branch densities sigma^S, sigma^D and
step lengths delta_i:

    alpha^X_i = 1 - exp(-sigma^X_i * delta_i)          X in {S, D}
    alpha^tot_i = 1 - exp(-(sigma^S_i + sigma^D_i) * delta_i)
    T_i = exp(-sum_{j<i} (sigma^S_j + sigma^D_j) * delta_j)

and the composed color blends both branches under the joint transmittance,
with the dynamic shadow ratio rho scaling down static radiance:

    C = sum_i T_i * (alpha^S_i * (1 - rho_i) * c^S_i + alpha^D_i * c^D_i)

Branch-only maps use the same joint T_i but keep only their own alpha * c
term.  Depth is expected termination depth sum_i T_i (alpha^S + alpha^D) t_i,
the dynamic opacity is sum_i T_i alpha^D_i, and the shadow map renders rho
with the joint alpha.  ``total_opacity`` is the branch-sum accumulated mass
sum_i T_i (alpha^S_i + alpha^D_i); it equals the summed semantic mass by
construction and can exceed 1 - T_{K+1} wherever both branches are dense at
the same point (the telescoped joint mass is exposed separately as
``1 - background_transmittance``).

``composite_backward`` is the exact adjoint, including the transmittance
coupling of every sigma_j to all later samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

_MIN_DELTA = 1e-9


@dataclass
class RaySamples:
    """Sorted sample points along one or many rays.

    Arrays are (K,) / (K, 3) for a single ray or (N, K) / (N, K, 3) for a
    batch.  ``deltas`` are the forward gaps; the last delta runs to the far
    plane.
    """

    positions: np.ndarray
    deltas: np.ndarray
    t_values: np.ndarray

    @property
    def count(self) -> int:
        return self.t_values.shape[-1]

    def validate(self):
        if np.any(self.deltas <= 0.0):
            raise ValueError("sample deltas must be positive")
        if np.any(np.diff(self.t_values, axis=-1) <= 0.0):
            raise ValueError("sample t values must be strictly increasing")


def stratified_t(num_rays: int, near: float, far: float, count: int,
                 rng: np.random.Generator | None) -> np.ndarray:
    """One jittered sample per equal bin of [near, far]; midpoints if rng is None."""
    if count < 2:
        raise ValueError("need at least 2 samples per ray")
    if not 0.0 < near < far:
        raise ValueError("need 0 < near < far")
    offsets = (rng.random((num_rays, count)) if rng is not None
               else np.full((num_rays, count), 0.5))
    bins = np.arange(count)[None, :]
    return near + (bins + offsets) / count * (far - near)


def _enforce_increasing(t: np.ndarray, near: float, far: float) -> np.ndarray:
    """Nudge duplicate t values apart; ties arise only in degenerate setups."""
    eps = (far - near) * 1e-9
    out = t.copy()
    for k in range(1, out.shape[-1]):
        out[..., k] = np.maximum(out[..., k], out[..., k - 1] + eps)
    return out


def _pdf_samples(t_coarse: np.ndarray, weights: np.ndarray, count: int,
                 near: float, far: float,
                 rng: np.random.Generator | None) -> np.ndarray:
    """Inverse-CDF draws from the per-bin piecewise-constant weight PDF.

    Bins are the strata that produced the coarse samples.  Rays whose
    weights sum to ~0 fall back to a uniform PDF.
    """
    n, k1 = t_coarse.shape
    edges = np.linspace(near, far, k1 + 1)
    mass = np.maximum(weights, 0.0)
    total = mass.sum(axis=1, keepdims=True)
    degenerate = total[:, 0] < 1e-12
    mass = np.where(degenerate[:, None], 1.0, mass)
    total = mass.sum(axis=1, keepdims=True)
    pdf = mass / total
    cdf = np.concatenate([np.zeros((n, 1)), np.cumsum(pdf, axis=1)], axis=1)
    cdf[:, -1] = 1.0

    u = (rng.random((n, count)) if rng is not None
         else np.tile((np.arange(count) + 0.5) / count, (n, 1)))
    # bin index of each u: number of cdf entries <= u, minus one
    idx = np.sum(u[:, :, None] >= cdf[:, None, :-1], axis=-1) - 1
    idx = np.clip(idx, 0, k1 - 1)
    rows = np.arange(n)[:, None]
    lo = cdf[rows, idx]
    seg = np.maximum(cdf[rows, idx + 1] - lo, 1e-12)
    frac = np.clip((u - lo) / seg, 0.0, 1.0)
    return edges[idx] + frac * (edges[idx + 1] - edges[idx])


def hierarchical_t(t_coarse: np.ndarray, weights: np.ndarray, count_fine: int,
                   near: float, far: float,
                   rng: np.random.Generator | None) -> np.ndarray:
    """Merge coarse samples with weight-guided fine samples, sorted."""
    t_fine = _pdf_samples(t_coarse, weights, count_fine, near, far, rng)
    merged = np.sort(np.concatenate([t_coarse, t_fine], axis=1), axis=1)
    return _enforce_increasing(merged, near, far)


def deltas_from_t(t: np.ndarray, far: float) -> np.ndarray:
    gaps = np.diff(t, axis=-1)
    last = np.maximum(far - t[..., -1:], _MIN_DELTA)
    return np.concatenate([gaps, last], axis=-1)


def samples_from_t(origins: np.ndarray, dirs: np.ndarray, t: np.ndarray,
                   far: float) -> RaySamples:
    positions = origins[..., None, :] + t[..., :, None] * dirs[..., None, :]
    return RaySamples(positions=positions, deltas=deltas_from_t(t, far), t_values=t)


def sample_ray(ray, near: float, far: float, count: int, strategy: str = "uniform",
               rng: np.random.Generator | None = None, density_fn=None,
               count_coarse: int | None = None) -> RaySamples:
    """Sample one ray. ``strategy`` is "uniform" or "hierarchical".

    For the hierarchical strategy ``count`` is the final merged total; by
    default two thirds of it are the uniform first pass.  ``density_fn``
    maps (positions, timestamps) to the two branch densities and is only
    needed hierarchically.
    """
    origin = np.asarray(ray.origin, dtype=np.float64)[None, :]
    direction = np.asarray(ray.direction, dtype=np.float64)[None, :]
    if strategy == "uniform":
        t = stratified_t(1, near, far, count, rng)
    elif strategy == "hierarchical":
        if density_fn is None:
            raise ValueError("hierarchical sampling needs a density_fn")
        k1 = count_coarse if count_coarse is not None else max(2, (2 * count) // 3)
        k2 = count - k1
        if k2 < 1:
            raise ValueError("hierarchical sampling needs count > count_coarse")
        t_coarse = stratified_t(1, near, far, k1, rng)
        coarse = samples_from_t(origin, direction, t_coarse, far)
        pos = coarse.positions.reshape(-1, 3)
        times = np.full(pos.shape[0], ray.timestamp)
        sigma_s, sigma_d = density_fn(pos, times)
        weights = composite_weights(sigma_s.reshape(1, k1), sigma_d.reshape(1, k1),
                                    coarse.deltas)
        t = hierarchical_t(t_coarse, weights, k2, near, far, rng)
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    flat = samples_from_t(origin, direction, t, far)
    return RaySamples(flat.positions[0], flat.deltas[0], flat.t_values[0])


def composite_weights(sigma_s: np.ndarray, sigma_d: np.ndarray,
                      deltas: np.ndarray) -> np.ndarray:
    """Branch-sum sample weights T_i (alpha^S_i + alpha^D_i)."""
    s = (sigma_s + sigma_d) * deltas
    trans = np.exp(-(np.cumsum(s, axis=-1) - s))
    alpha_s = -np.expm1(-sigma_s * deltas)
    alpha_d = -np.expm1(-sigma_d * deltas)
    return trans * (alpha_s + alpha_d)


# ---------------------------------------------------------------------------
# Compositing


@dataclass
class RenderBundle:
    """Per-ray composited maps plus retained per-sample intermediates."""

    composed_color: np.ndarray  # (N, 3)
    static_color: np.ndarray
    dynamic_color: np.ndarray
    depth: np.ndarray  # (N,)
    static_depth: np.ndarray
    semantics: np.ndarray  # (N, L)
    static_semantics: np.ndarray
    dynamic_opacity: np.ndarray  # (N,)
    total_opacity: np.ndarray
    shadow_map: np.ndarray
    background_transmittance: np.ndarray  # T_{K+1}
    per_sample: dict = dc_field(default_factory=dict)

    @property
    def num_rays(self) -> int:
        return self.composed_color.shape[0]


def composite(samples: RaySamples, static_out: dict, dynamic_out: dict) -> RenderBundle:
    """Blend both branches along each ray (see module docstring for math)."""
    sigma_s = static_out["sigma"]
    sigma_d = dynamic_out["sigma"]
    color_s = static_out["color"]
    color_d = dynamic_out["color"]
    probs_s = static_out["probs"]
    probs_d = dynamic_out["probs"]
    rho = dynamic_out["rho"]
    deltas = samples.deltas
    t_vals = samples.t_values

    s = (sigma_s + sigma_d) * deltas
    optical = np.cumsum(s, axis=-1)
    trans = np.exp(-(optical - s))
    trans_end = np.exp(-optical[..., -1])
    alpha_s = -np.expm1(-sigma_s * deltas)
    alpha_d = -np.expm1(-sigma_d * deltas)
    alpha_t = -np.expm1(-s)

    w_s = trans * alpha_s
    w_d = trans * alpha_d
    w_t = trans * alpha_t

    composed = np.einsum("nk,nkc->nc", w_s * (1.0 - rho), color_s) \
        + np.einsum("nk,nkc->nc", w_d, color_d)
    static_color = np.einsum("nk,nkc->nc", w_s, color_s)
    dynamic_color = np.einsum("nk,nkc->nc", w_d, color_d)
    sem, sem_static = composite_semantics(trans, alpha_s, alpha_d, probs_s, probs_d)

    return RenderBundle(
        composed_color=composed,
        static_color=static_color,
        dynamic_color=dynamic_color,
        depth=np.sum((w_s + w_d) * t_vals, axis=-1),
        static_depth=np.sum(w_s * t_vals, axis=-1),
        semantics=sem,
        static_semantics=sem_static,
        dynamic_opacity=np.sum(w_d, axis=-1),
        total_opacity=np.sum(w_s + w_d, axis=-1),
        shadow_map=np.sum(w_t * rho, axis=-1),
        background_transmittance=trans_end,
        per_sample={
            "trans": trans,
            "alpha_s": alpha_s,
            "alpha_d": alpha_d,
            "alpha_t": alpha_t,
            "sigma_s": sigma_s,
            "sigma_d": sigma_d,
            "rho": rho,
            "color_s": color_s,
            "color_d": color_d,
            "probs_s": probs_s,
            "probs_d": probs_d,
            "deltas": deltas,
            "t_values": t_vals,
        },
    )


def composite_semantics(trans: np.ndarray, alpha_s: np.ndarray, alpha_d: np.ndarray,
                        static_probs: np.ndarray, dynamic_probs: np.ndarray):
    """Render per-point class distributions to per-ray semantic mass.

    Because every per-point distribution sums to one, the rendered mass
    sums to sum_i T_i (alpha^S_i + alpha^D_i) exactly.
    """
    w_s = trans * alpha_s
    w_d = trans * alpha_d
    sem_static = np.einsum("nk,nkl->nl", w_s, static_probs)
    sem = sem_static + np.einsum("nk,nkl->nl", w_d, dynamic_probs)
    return sem, sem_static


def render_motion_mask(dynamic_opacity: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold accumulated dynamic opacity into a boolean motion mask."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return np.asarray(dynamic_opacity) >= threshold


def composite_backward(bundle: RenderBundle, upstream: dict) -> dict:
    """Exact adjoint of :func:`composite`.

    ``upstream`` maps bundle field names (and optionally the per-sample
    names ``trans``/``alpha_s``/``alpha_d``/``alpha_t``/``rho``/``sigma_s``/
    ``sigma_d``) to gradient arrays.  Returns gradients for every
    per-sample branch output plus ``deltas`` and ``t_values``.
    """
    ps = bundle.per_sample
    trans, alpha_s, alpha_d, alpha_t = ps["trans"], ps["alpha_s"], ps["alpha_d"], ps["alpha_t"]
    sigma_s, sigma_d, rho = ps["sigma_s"], ps["sigma_d"], ps["rho"]
    color_s, color_d = ps["color_s"], ps["color_d"]
    probs_s, probs_d = ps["probs_s"], ps["probs_d"]
    deltas, t_vals = ps["deltas"], ps["t_values"]
    n, k = trans.shape

    u_t = np.zeros((n, k))
    u_as = np.zeros((n, k))
    u_ad = np.zeros((n, k))
    u_at = np.zeros((n, k))
    g_rho = np.zeros((n, k))
    g_cs = np.zeros_like(color_s)
    g_cd = np.zeros_like(color_d)
    g_ps = np.zeros_like(probs_s)
    g_pd = np.zeros_like(probs_d)
    g_t = np.zeros((n, k))

    def ray_dot(vec_up, values):
        return np.einsum("nc,nkc->nk", vec_up, values)

    if (u := upstream.get("composed_color")) is not None:
        dot_s = ray_dot(u, color_s)
        dot_d = ray_dot(u, color_d)
        u_t += alpha_s * (1.0 - rho) * dot_s + alpha_d * dot_d
        u_as += trans * (1.0 - rho) * dot_s
        u_ad += trans * dot_d
        g_rho += -trans * alpha_s * dot_s
        g_cs += (trans * alpha_s * (1.0 - rho))[..., None] * u[:, None, :]
        g_cd += (trans * alpha_d)[..., None] * u[:, None, :]
    if (u := upstream.get("static_color")) is not None:
        dot_s = ray_dot(u, color_s)
        u_t += alpha_s * dot_s
        u_as += trans * dot_s
        g_cs += (trans * alpha_s)[..., None] * u[:, None, :]
    if (u := upstream.get("dynamic_color")) is not None:
        dot_d = ray_dot(u, color_d)
        u_t += alpha_d * dot_d
        u_ad += trans * dot_d
        g_cd += (trans * alpha_d)[..., None] * u[:, None, :]
    if (u := upstream.get("depth")) is not None:
        u = u[:, None]
        u_t += (alpha_s + alpha_d) * t_vals * u
        u_as += trans * t_vals * u
        u_ad += trans * t_vals * u
        g_t += trans * (alpha_s + alpha_d) * u
    if (u := upstream.get("static_depth")) is not None:
        u = u[:, None]
        u_t += alpha_s * t_vals * u
        u_as += trans * t_vals * u
        g_t += trans * alpha_s * u
    if (u := upstream.get("semantics")) is not None:
        dot_s = np.einsum("nl,nkl->nk", u, probs_s)
        dot_d = np.einsum("nl,nkl->nk", u, probs_d)
        u_t += alpha_s * dot_s + alpha_d * dot_d
        u_as += trans * dot_s
        u_ad += trans * dot_d
        g_ps += (trans * alpha_s)[..., None] * u[:, None, :]
        g_pd += (trans * alpha_d)[..., None] * u[:, None, :]
    if (u := upstream.get("static_semantics")) is not None:
        dot_s = np.einsum("nl,nkl->nk", u, probs_s)
        u_t += alpha_s * dot_s
        u_as += trans * dot_s
        g_ps += (trans * alpha_s)[..., None] * u[:, None, :]
    if (u := upstream.get("dynamic_opacity")) is not None:
        u = u[:, None]
        u_t += alpha_d * u
        u_ad += trans * u
    if (u := upstream.get("total_opacity")) is not None:
        u = u[:, None]
        u_t += (alpha_s + alpha_d) * u
        u_as += trans * u
        u_ad += trans * u
    if (u := upstream.get("shadow_map")) is not None:
        u = u[:, None]
        u_t += alpha_t * rho * u
        u_at += trans * rho * u
        g_rho += trans * alpha_t * u

    # direct per-sample upstream contributions
    for key, target in (("trans", u_t), ("alpha_s", u_as), ("alpha_d", u_ad),
                        ("alpha_t", u_at), ("rho", g_rho)):
        if (u := upstream.get(key)) is not None:
            target += u

    g_sigma_s = u_as * deltas * (1.0 - alpha_s) + u_at * deltas * (1.0 - alpha_t)
    g_sigma_d = u_ad * deltas * (1.0 - alpha_d) + u_at * deltas * (1.0 - alpha_t)

    # Transmittance coupling: T_i depends on every earlier sigma via
    # dT_i / dsigma^X_j = -delta_j T_i for j < i (either branch).
    weighted = u_t * trans
    suffix = np.cumsum(weighted[..., ::-1], axis=-1)[..., ::-1] - weighted
    if (u := upstream.get("background_transmittance")) is not None:
        suffix = suffix + (u * bundle.background_transmittance)[:, None]
    g_sigma_s -= deltas * suffix
    g_sigma_d -= deltas * suffix

    g_delta = (u_as * sigma_s * (1.0 - alpha_s)
               + u_ad * sigma_d * (1.0 - alpha_d)
               + u_at * (sigma_s + sigma_d) * (1.0 - alpha_t)
               - (sigma_s + sigma_d) * suffix)

    if (u := upstream.get("sigma_s")) is not None:
        g_sigma_s += u
    if (u := upstream.get("sigma_d")) is not None:
        g_sigma_d += u

    return {
        "sigma_s": g_sigma_s,
        "sigma_d": g_sigma_d,
        "rho": g_rho,
        "color_s": g_cs,
        "color_d": g_cd,
        "probs_s": g_ps,
        "probs_d": g_pd,
        "deltas": g_delta,
        "t_values": g_t,
    }
