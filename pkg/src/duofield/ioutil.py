"""File formats shared by the CLI commands.

Scalar maps (depth, opacity, shadow) go to a small binary container:
16-byte header of magic ``DUOF``, u32 width, u32 height, u32 reserved
(all little-endian), followed by row-major float32 pixels.  Color images
and masks go to 8-bit PNG.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

DUOF_MAGIC = b"DUOF"


class FormatError(Exception):
    """Raised when a binary container fails validation."""


def write_float_map(path: str | Path, values: np.ndarray) -> None:
    """Write a (H, W) float array as a DUOF file."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {arr.shape}")
    height, width = arr.shape
    header = DUOF_MAGIC + struct.pack("<III", width, height, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype("<f4").tobytes())


def read_float_map(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != DUOF_MAGIC:
            raise FormatError(f"{path}: not a DUOF file")
        width, height, _ = struct.unpack("<III", header[4:])
        payload = fh.read()
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: truncated payload ({len(payload)} != {expected} bytes)")
    return np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float64)


def write_png_color(path: str | Path, image: np.ndarray) -> None:
    """Write a (H, W, 3) float image in [0, 1] as 8-bit RGB PNG."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def write_png_mask(path: str | Path, mask: np.ndarray) -> None:
    """Write a boolean (H, W) mask as an 8-bit PNG (0 / 255)."""
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def write_png_labels(path: str | Path, labels: np.ndarray) -> None:
    """Write an integer class-index map as an 8-bit grayscale PNG."""
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("label indices must fit in a byte")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def read_png(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(path))


def write_json(path: str | Path, payload: dict) -> None:
    """Canonical JSON: sorted keys, no trailing whitespace drift."""
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
