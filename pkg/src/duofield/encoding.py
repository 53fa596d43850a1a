"""Trainable input encodings.

Three pieces feed the neural branches:

* multi-resolution hashed feature grids over [0, 1]^dim (3-D for the static
  branch, 4-D with a time axis for the dynamic branch),
* a sinusoidal encoding for unit viewing directions,
* a per-frame appearance embedding table.

Grid evaluation is piecewise-multilinear: per level the enclosing cell at
resolution N_l is found, its 2^dim corner features are fetched from a fixed
size table and blended, and the per-level vectors are concatenated.  Levels
coarse enough that every vertex fits in the table are stored densely
(collision free); finer levels hash vertex coordinates into the table.
All backward passes are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# One prime per coordinate axis; kept fixed so indices are reproducible
# across platforms.  Axis 0 multiplies by 1 (identity) as usual.
HASH_PRIMES = (1, 2654435761, 805459861, 3674653429)

_FLOOR_GUARD = 1e-6  # absorbs float roundoff in the geometric schedule


@dataclass(frozen=True)
class HashGridConfig:
    levels: int = 16
    table_size: int = 2**19
    features_per_entry: int = 2
    base_resolution: int = 16
    finest_resolution: int = 2048
    dimensionality: int = 3

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not 1 <= self.base_resolution <= self.finest_resolution:
            raise ValueError("need finest_resolution >= base_resolution >= 1")
        if self.dimensionality not in (3, 4):
            raise ValueError("dimensionality must be 3 or 4")
        if self.table_size < 1:
            raise ValueError("table_size must be >= 1")

    @property
    def resolutions(self) -> tuple[int, ...]:
        """Geometric schedule N_l = floor(base * b^l) from base to finest."""
        if self.levels == 1:
            return (self.base_resolution,)
        growth = math.exp(
            math.log(self.finest_resolution / self.base_resolution) / (self.levels - 1))
        return tuple(
            int(math.floor(self.base_resolution * growth**level + _FLOOR_GUARD))
            for level in range(self.levels))

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_entry


def hash_coords(coords: np.ndarray, table_size: int) -> np.ndarray:
    """Spatial hash of non-negative integer vertex coordinates.

    XOR of per-axis coordinate*prime products, reduced modulo the table
    size.  Products are taken in uint64, which is exact for any vertex
    coordinate this module can produce.
    """
    coords = np.asarray(coords, dtype=np.uint64)
    acc = coords[..., 0] * np.uint64(HASH_PRIMES[0])
    for axis in range(1, coords.shape[-1]):
        acc = acc ^ (coords[..., axis] * np.uint64(HASH_PRIMES[axis]))
    return (acc % np.uint64(table_size)).astype(np.int64)


def _dense_index(coords: np.ndarray, resolution: int) -> np.ndarray:
    """Row-major vertex index on the (N+1)^dim lattice (no hashing)."""
    coords = np.asarray(coords, dtype=np.int64)
    side = resolution + 1
    idx = coords[..., 0].copy()
    stride = 1
    for axis in range(1, coords.shape[-1]):
        stride *= side
        idx += coords[..., axis] * stride
    return idx


class HashGrid:
    """Trainable multi-resolution feature grid over [0, 1]^dim."""

    def __init__(self, config: HashGridConfig, rng: np.random.Generator | None = None):
        self.config = config
        shape = (config.levels, config.table_size, config.features_per_entry)
        if rng is None:
            self.table = np.zeros(shape)
        else:
            self.table = rng.uniform(-1e-4, 1e-4, size=shape)
        self.resolutions = config.resolutions
        side_counts = [(r + 1) ** config.dimensionality for r in self.resolutions]
        self.dense_level = [count <= config.table_size for count in side_counts]
        dim = config.dimensionality
        # Corner offsets of the unit cell, shape (2^dim, dim).
        self._corners = np.array(
            [[(c >> a) & 1 for a in range(dim)] for c in range(2**dim)], dtype=np.int64)
        self.clamp_count = 0  # diagnostics: out-of-range lookups seen so far

    @property
    def num_parameters(self) -> int:
        return self.table.size

    def vertex_index(self, coords: np.ndarray, level: int) -> np.ndarray:
        if self.dense_level[level]:
            return _dense_index(coords, self.resolutions[level])
        return hash_coords(coords, self.config.table_size)

    def lookup(self, points: np.ndarray, need_point_grad: bool = False):
        """Evaluate the grid at ``points`` in [0, 1]^dim.

        Out-of-range coordinates are clamped (and counted) rather than
        rejected.  Returns (features, cache); the cache feeds
        :meth:`lookup_backward`.
        """
        cfg = self.config
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[-1] != cfg.dimensionality:
            raise ValueError(
                f"expected {cfg.dimensionality}-D points, got {pts.shape[-1]}-D")
        clamped = np.clip(pts, 0.0, 1.0)
        self.clamp_count += int(np.sum(np.any(clamped != pts, axis=-1)))

        n = clamped.shape[0]
        num_corners = self._corners.shape[0]
        out = np.empty((n, cfg.levels, cfg.features_per_entry))
        idx_cache = np.empty((cfg.levels, num_corners, n), dtype=np.int64)
        w_cache = np.empty((cfg.levels, num_corners, n))
        frac_cache = np.empty((cfg.levels, n, cfg.dimensionality))

        for level, res in enumerate(self.resolutions):
            scaled = clamped * res
            cell = np.minimum(scaled.astype(np.int64), res - 1)
            frac = scaled - cell
            frac_cache[level] = frac
            level_out = np.zeros((n, cfg.features_per_entry))
            for c, offs in enumerate(self._corners):
                corner = cell + offs
                idx = self.vertex_index(corner, level)
                w = np.ones(n)
                for axis in range(cfg.dimensionality):
                    w = w * (frac[:, axis] if offs[axis] else 1.0 - frac[:, axis])
                level_out += w[:, None] * self.table[level, idx]
                idx_cache[level, c] = idx
                w_cache[level, c] = w
            out[:, level] = level_out

        cache = {"idx": idx_cache, "w": w_cache, "frac": frac_cache, "n": n,
                 "need_point_grad": need_point_grad}
        return out.reshape(n, cfg.output_dim), cache

    def lookup_backward(self, cache: dict, upstream: np.ndarray):
        """Gradients of :meth:`lookup` for a given upstream.

        Returns (table_grad, point_grad).  Table gradients are scattered
        with a fixed (level, index) ordering so accumulation is
        bit-reproducible.  point_grad is None unless the forward pass was
        run with ``need_point_grad=True``; it is the in-cell derivative and
        is zero for clamped coordinates by construction of the clamp.
        """
        cfg = self.config
        n = cache["n"]
        up = upstream.reshape(n, cfg.levels, cfg.features_per_entry)
        table_grad = np.zeros_like(self.table)
        point_grad = np.zeros((n, cfg.dimensionality)) if cache["need_point_grad"] else None

        for level, res in enumerate(self.resolutions):
            frac = cache["frac"][level]
            for c, offs in enumerate(self._corners):
                idx = cache["idx"][level, c]
                w = cache["w"][level, c]
                contrib = up[:, level] * w[:, None]
                for f in range(cfg.features_per_entry):
                    table_grad[level, :, f] += np.bincount(
                        idx, weights=contrib[:, f], minlength=cfg.table_size)
                if point_grad is not None:
                    # d w / d frac_a = +/- product of the other axes' factors
                    feat_dot = np.sum(up[:, level] * self.table[level, idx], axis=-1)
                    for axis in range(cfg.dimensionality):
                        dw = np.ones(n)
                        for other in range(cfg.dimensionality):
                            if other == axis:
                                continue
                            dw = dw * (frac[:, other] if offs[other] else 1.0 - frac[:, other])
                        sign = 1.0 if offs[axis] else -1.0
                        point_grad[:, axis] += sign * res * dw * feat_dot
        return table_grad, point_grad


def grid_lookup(grid: HashGrid, point: np.ndarray) -> np.ndarray:
    """Feature vector(s) for one point or a batch of points."""
    single = np.asarray(point).ndim == 1
    features, _ = grid.lookup(point)
    return features[0] if single else features


def grid_lookup_backward(grid: HashGrid, point: np.ndarray, upstream: np.ndarray):
    """(table gradients, point gradient) of a lookup at ``point``."""
    single = np.asarray(point).ndim == 1
    _, cache = grid.lookup(point, need_point_grad=True)
    up = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    table_grad, point_grad = grid.lookup_backward(cache, up)
    return (table_grad, point_grad[0] if single else point_grad)


@dataclass(frozen=True)
class DirectionEncoding:
    """Sinusoidal features for unit directions.

    Layout per frequency k: [sin(2^k pi d), cos(2^k pi d)] over the three
    components, frequencies concatenated, so the output has
    3 * 2 * num_frequencies entries.
    """

    num_frequencies: int = 4

    @property
    def output_dim(self) -> int:
        return 6 * self.num_frequencies

    def encode(self, directions: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        parts = []
        for k in range(self.num_frequencies):
            arg = (2.0**k) * np.pi * d
            parts.append(np.sin(arg))
            parts.append(np.cos(arg))
        out = np.concatenate(parts, axis=-1)
        return out[0] if np.asarray(directions).ndim == 1 else out


def encode_direction(enc: DirectionEncoding, d: np.ndarray) -> np.ndarray:
    return enc.encode(d)


class AppearanceTable:
    """One trainable 16-vector per training frame (lighting conditions)."""

    DIM = 16

    def __init__(self, num_frames: int, rng: np.random.Generator | None = None):
        if num_frames < 1:
            raise ValueError("need at least one frame")
        if rng is None:
            self.table = np.zeros((num_frames, self.DIM))
        else:
            self.table = rng.uniform(-1e-2, 1e-2, size=(num_frames, self.DIM))

    @property
    def num_frames(self) -> int:
        return self.table.shape[0]

    def lookup(self, frame_indices: np.ndarray) -> np.ndarray:
        return self.table[np.asarray(frame_indices, dtype=np.int64)]

    def lookup_backward(self, frame_indices: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        idx = np.asarray(frame_indices, dtype=np.int64)
        grad = np.zeros_like(self.table)
        for f in range(self.DIM):
            grad[:, f] = np.bincount(idx, weights=upstream[:, f],
                                     minlength=self.num_frames)
        return grad
