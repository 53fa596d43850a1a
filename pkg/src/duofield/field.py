"""The two neural branches and their pointwise heads.

Each branch is a small fully-connected trunk over grid features plus four
heads: density (softplus), color (sigmoid, conditioned on view direction
and, for the static branch, a per-frame appearance vector), semantic
logits, and - dynamic branch only - a shadow ratio read directly off the
grid features.  Density and semantics are computed from the trunk before
any direction/appearance conditioning, so they are view-invariant by
construction.

The dynamic semantic head is gated by a foreground-only mask: logits of
classes that cannot move are pinned to a large negative constant, and the
pinned slots receive no gradient, so the dynamic branch can neither emit
nor learn background semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from duofield.encoding import (
    AppearanceTable,
    DirectionEncoding,
    HashGrid,
    HashGridConfig,
)

MASK_VALUE = -30.0  # below any attainable logit; exp(-30) ~ 1e-13 after softmax


class ConfigurationError(Exception):
    pass


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def pointwise_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max subtraction; rows sum to 1."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    dot = np.sum(upstream * probs, axis=-1, keepdims=True)
    return probs * (upstream - dot)


def apply_foreground_mask(logits: np.ndarray, movable: np.ndarray) -> np.ndarray:
    """Pin logits of non-movable classes to MASK_VALUE.

    Only meaningful for dynamic-branch logits.  The pinned entries are
    constants: :func:`mask_gradient` zeroes their gradient.
    """
    movable = np.asarray(movable, dtype=bool)
    if not movable.any():
        raise ConfigurationError("foreground mask would remove every class")
    out = np.array(logits, dtype=np.float64, copy=True)
    out[..., ~movable] = MASK_VALUE
    return out


def mask_gradient(grad_logits: np.ndarray, movable: np.ndarray) -> np.ndarray:
    out = np.array(grad_logits, copy=True)
    out[..., ~np.asarray(movable, dtype=bool)] = 0.0
    return out


class MLP:
    """Dense layers with rectifier activations and an identity output.

    ``final_activation=True`` turns the last layer into another hidden
    layer (used for the branch trunks, whose output feeds the heads).
    """

    def __init__(self, sizes, rng: np.random.Generator, final_activation=False,
                 out_bias: float = 0.0):
        self.sizes = list(sizes)
        self.final_activation = final_activation
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        if not final_activation:
            self.biases[-1][:] = out_bias

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray):
        acts = [x]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            if i < self.num_layers - 1 or self.final_activation:
                z = np.maximum(z, 0.0)
            acts.append(z)
        return acts[-1], acts

    def backward(self, acts, upstream: np.ndarray):
        """Returns (grad_input, [(gw, gb) per layer])."""
        grads = [None] * self.num_layers
        delta = upstream
        for i in reversed(range(self.num_layers)):
            if i < self.num_layers - 1 or self.final_activation:
                delta = delta * (acts[i + 1] > 0.0)
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            delta = delta @ self.weights[i].T
        return delta, grads


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int
    movable: tuple[bool, ...]
    num_frames: int
    static_grid: HashGridConfig = HashGridConfig(dimensionality=3)
    dynamic_grid: HashGridConfig = HashGridConfig(dimensionality=4)
    trunk_width: int = 64
    trunk_depth: int = 2
    head_width: int = 32
    num_frequencies: int = 4
    density_bias: float = -1.0  # softplus(-1) ~ 0.31: near-empty start
    shadow_bias: float = -3.0  # shadows begin switched off

    def __post_init__(self):
        if self.static_grid.dimensionality != 3 or self.dynamic_grid.dimensionality != 4:
            raise ConfigurationError("static grid must be 3-D and dynamic grid 4-D")
        movable = np.asarray(self.movable, dtype=bool)
        if len(movable) != self.num_classes:
            raise ConfigurationError("movable flags must match num_classes")
        if not movable.any() or movable.all():
            raise ConfigurationError("need at least one movable and one static class")

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "movable": list(map(bool, self.movable)),
            "num_frames": self.num_frames,
            "static_grid": vars(self.static_grid) | {},
            "dynamic_grid": vars(self.dynamic_grid) | {},
            "trunk_width": self.trunk_width,
            "trunk_depth": self.trunk_depth,
            "head_width": self.head_width,
            "num_frequencies": self.num_frequencies,
            "density_bias": self.density_bias,
            "shadow_bias": self.shadow_bias,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            num_classes=d["num_classes"],
            movable=tuple(d["movable"]),
            num_frames=d["num_frames"],
            static_grid=HashGridConfig(**d["static_grid"]),
            dynamic_grid=HashGridConfig(**d["dynamic_grid"]),
            trunk_width=d["trunk_width"],
            trunk_depth=d["trunk_depth"],
            head_width=d["head_width"],
            num_frequencies=d["num_frequencies"],
            density_bias=d["density_bias"],
            shadow_bias=d["shadow_bias"],
        )


class Branch:
    """Shared structure of the two branches (grid + trunk + heads)."""

    def __init__(self, cfg: ModelConfig, grid_cfg: HashGridConfig,
                 rng: np.random.Generator, color_extra_dim: int,
                 with_shadow: bool):
        self.cfg = cfg
        self.grid = HashGrid(grid_cfg, rng)
        trunk_sizes = [grid_cfg.output_dim] + [cfg.trunk_width] * cfg.trunk_depth
        self.trunk = MLP(trunk_sizes, rng, final_activation=True)
        self.sigma_head = MLP([cfg.trunk_width, cfg.head_width, 1], rng,
                              out_bias=cfg.density_bias)
        self.sem_head = MLP([cfg.trunk_width, cfg.head_width, cfg.num_classes], rng)
        self.color_head = MLP(
            [cfg.trunk_width + 6 * cfg.num_frequencies + color_extra_dim,
             cfg.head_width, 3], rng)
        self.shadow_head = None
        if with_shadow:
            self.shadow_head = MLP([grid_cfg.output_dim, cfg.head_width, 1], rng,
                                   out_bias=cfg.shadow_bias)

    def density(self, grid_points: np.ndarray) -> np.ndarray:
        """Density only (used by the coarse sampling pass, no cache kept)."""
        feats, _ = self.grid.lookup(grid_points)
        trunk_out, _ = self.trunk.forward(feats)
        z, _ = self.sigma_head.forward(trunk_out)
        return softplus(z[:, 0])

    def forward(self, grid_points: np.ndarray, dir_feats: np.ndarray,
                extra_color_feats: np.ndarray | None):
        feats, grid_cache = self.grid.lookup(grid_points)
        trunk_out, trunk_acts = self.trunk.forward(feats)
        z_sigma, sigma_acts = self.sigma_head.forward(trunk_out)
        logits, sem_acts = self.sem_head.forward(trunk_out)
        color_in = [trunk_out, dir_feats]
        if extra_color_feats is not None:
            color_in.append(extra_color_feats)
        color_in = np.concatenate(color_in, axis=-1)
        z_color, color_acts = self.color_head.forward(color_in)

        out = {
            "sigma": softplus(z_sigma[:, 0]),
            "color": sigmoid(z_color),
            "logits": logits,
        }
        cache = {
            "grid": grid_cache,
            "trunk_acts": trunk_acts,
            "sigma_acts": sigma_acts,
            "sem_acts": sem_acts,
            "color_acts": color_acts,
            "z_sigma": z_sigma,
            "z_color": z_color,
            "feats": feats,
        }
        if self.shadow_head is not None:
            z_shadow, shadow_acts = self.shadow_head.forward(feats)
            out["rho"] = sigmoid(z_shadow[:, 0])
            cache["shadow_acts"] = shadow_acts
            cache["z_shadow"] = z_shadow
        return out, cache

    def backward(self, cache, d_sigma, d_color, d_logits, d_rho=None):
        """Map output gradients to parameter gradients.

        Returns (param_grads, extra_color_grad) where extra_color_grad is
        the gradient w.r.t. the trailing extra color-head inputs (the
        appearance vector for the static branch), or None.
        """
        cfg = self.cfg
        grads = {}

        d_z_sigma = (d_sigma * sigmoid(cache["z_sigma"][:, 0]))[:, None]
        d_trunk, sigma_grads = self.sigma_head.backward(cache["sigma_acts"], d_z_sigma)

        d_trunk_sem, sem_grads = self.sem_head.backward(cache["sem_acts"], d_logits)
        d_trunk = d_trunk + d_trunk_sem

        color = sigmoid(cache["z_color"])
        d_z_color = d_color * color * (1.0 - color)
        d_color_in, color_grads = self.color_head.backward(cache["color_acts"], d_z_color)
        d_trunk = d_trunk + d_color_in[:, :cfg.trunk_width]
        dir_dim = 6 * cfg.num_frequencies
        extra_grad = d_color_in[:, cfg.trunk_width + dir_dim:]
        if extra_grad.shape[1] == 0:
            extra_grad = None

        d_feats, trunk_grads = self.trunk.backward(cache["trunk_acts"], d_trunk)

        if self.shadow_head is not None and d_rho is not None:
            rho = sigmoid(cache["z_shadow"][:, 0])
            d_z_shadow = (d_rho * rho * (1.0 - rho))[:, None]
            d_feats_shadow, shadow_grads = self.shadow_head.backward(
                cache["shadow_acts"], d_z_shadow)
            d_feats = d_feats + d_feats_shadow
            grads["shadow"] = shadow_grads

        grads["grid"], _ = self.grid.lookup_backward(cache["grid"], d_feats)
        grads["trunk"] = trunk_grads
        grads["sigma"] = sigma_grads
        grads["sem"] = sem_grads
        grads["color"] = color_grads
        return grads, extra_grad


class DualModel:
    """Static + dynamic branch pair with shared conventions.

    Positions handed to the branches must already be normalized to the
    scene's [0, 1]^3 box; timestamps are in [0, 1].
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.dir_enc = DirectionEncoding(cfg.num_frequencies)
        # Construction order fixes the parameter ordering contract.
        self.static = Branch(cfg, cfg.static_grid, rng,
                             color_extra_dim=AppearanceTable.DIM, with_shadow=False)
        self.dynamic = Branch(cfg, cfg.dynamic_grid, rng,
                              color_extra_dim=0, with_shadow=True)
        self.appearance = AppearanceTable(cfg.num_frames, rng)
        self.movable = np.asarray(cfg.movable, dtype=bool)

    # -- forward ----------------------------------------------------------

    def static_forward(self, x: np.ndarray, d: np.ndarray, frame_index: np.ndarray):
        x = np.atleast_2d(x)
        d = np.atleast_2d(d)
        frame_index = np.atleast_1d(frame_index)
        dir_feats = self.dir_enc.encode(d)
        app = self.appearance.lookup(frame_index)
        out, cache = self.static.forward(x, dir_feats, app)
        out["probs"] = pointwise_softmax(out["logits"])
        cache["frame_index"] = frame_index
        return out, cache

    def dynamic_forward(self, x: np.ndarray, t: np.ndarray, d: np.ndarray):
        x = np.atleast_2d(x)
        t = np.atleast_1d(t)
        d = np.atleast_2d(d)
        if np.any((t < 0.0) | (t > 1.0)):
            raise ValueError("timestamps must lie in [0, 1]")
        pts = np.concatenate([x, t[:, None]], axis=-1)
        dir_feats = self.dir_enc.encode(d)
        out, cache = self.dynamic.forward(pts, dir_feats, None)
        out["masked_logits"] = apply_foreground_mask(out["logits"], self.movable)
        out["probs"] = pointwise_softmax(out["masked_logits"])
        return out, cache

    def static_density(self, x: np.ndarray) -> np.ndarray:
        return self.static.density(np.atleast_2d(x))

    def dynamic_density(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        pts = np.concatenate([np.atleast_2d(x), np.atleast_1d(t)[:, None]], axis=-1)
        return self.dynamic.density(pts)

    # -- backward ---------------------------------------------------------

    def static_backward(self, out, cache, d_sigma, d_color, d_probs):
        d_logits = softmax_backward(out["probs"], d_probs)
        grads, app_grad = self.static.backward(cache, d_sigma, d_color, d_logits)
        grads["appearance"] = self.appearance.lookup_backward(
            cache["frame_index"], app_grad)
        return grads

    def dynamic_backward(self, out, cache, d_sigma, d_color, d_probs, d_rho):
        d_masked = softmax_backward(out["probs"], d_probs)
        d_logits = mask_gradient(d_masked, self.movable)
        grads, _ = self.dynamic.backward(cache, d_sigma, d_color, d_logits, d_rho)
        return grads

    # -- parameter registry -------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Ordered name -> array views of every trainable block."""
        params: dict[str, np.ndarray] = {}
        for branch_name, branch in (("static", self.static), ("dynamic", self.dynamic)):
            params[f"{branch_name}.grid"] = branch.grid.table
            for head_name, mlp in self._heads(branch):
                for i in range(mlp.num_layers):
                    params[f"{branch_name}.{head_name}.w{i}"] = mlp.weights[i]
                    params[f"{branch_name}.{head_name}.b{i}"] = mlp.biases[i]
        params["appearance"] = self.appearance.table
        return params

    @staticmethod
    def _heads(branch: Branch):
        heads = [("trunk", branch.trunk), ("sigma", branch.sigma_head),
                 ("sem", branch.sem_head), ("color", branch.color_head)]
        if branch.shadow_head is not None:
            heads.append(("shadow", branch.shadow_head))
        return heads

    def flatten_branch_grads(self, branch_name: str, grads: dict) -> dict[str, np.ndarray]:
        """Convert a Branch.backward result into registry-keyed arrays."""
        flat = {f"{branch_name}.grid": grads["grid"]}
        for head_name in ("trunk", "sigma", "sem", "color", "shadow"):
            if head_name not in grads:
                continue
            for i, (gw, gb) in enumerate(grads[head_name]):
                flat[f"{branch_name}.{head_name}.w{i}"] = gw
                flat[f"{branch_name}.{head_name}.b{i}"] = gb
        return flat

    def dynamic_param_names(self) -> list[str]:
        return [name for name in self.parameters() if name.startswith("dynamic.")]
