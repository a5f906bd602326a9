"""Image loading and preprocessing.

Accepted on disk: 8-bit grayscale or RGB, PNG or PGM (P5).  Higher bit
depths are rejected rather than silently rescaled.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError
from .model import Preprocessing
from .tensor import DTYPE, bilinear_resize

_HIGH_DEPTH_MODES = ("I", "I;16", "I;16B", "I;16L", "I;16N", "F")


def load_image_raw(path: str | Path) -> np.ndarray:
    """Read an image file as uint8, shape [H,W] (gray) or [H,W,3] (RGB)."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            mode = img.mode
            if mode in _HIGH_DEPTH_MODES:
                raise DataError(
                    f"{path}: unsupported bit depth (mode '{mode}'), "
                    "8-bit grayscale or RGB required")
            if mode == "P":
                img = img.convert("RGB")
                mode = "RGB"
            if mode not in ("L", "RGB"):
                raise DataError(
                    f"{path}: unsupported image mode '{mode}', "
                    "8-bit grayscale or RGB required")
            arr = np.asarray(img, dtype=np.uint8)
    except FileNotFoundError:
        raise DataError(f"cannot read image {path}: file not found") from None
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if arr.size == 0:
        raise DataError(f"{path}: empty image")
    return arr


def preprocess_image(img: np.ndarray, pre: Preprocessing, channels: int) -> np.ndarray:
    """uint8 [H,W] or [H,W,3] -> standardized float32 [channels, H', W'].

    Pipeline: scale to [0,1], bilinear-resize to ``pre.resize``, replicate a
    single channel up to ``channels``, then standardize per channel with
    (v - mean) / std.  Replication precedes standardization so per-channel
    statistics apply to a grayscale source; with uniform statistics the two
    orders coincide.
    """
    if img.ndim == 2:
        chw = img[None, :, :].astype(np.float64) / 255.0
    elif img.ndim == 3 and img.shape[2] == 3:
        chw = img.transpose(2, 0, 1).astype(np.float64) / 255.0
    else:
        raise DataError(f"expected [H,W] or [H,W,3] image, got shape {img.shape}")

    out_h, out_w = pre.resize
    chw = np.stack([bilinear_resize(plane.astype(DTYPE), out_h, out_w)
                    for plane in chw]).astype(np.float64)

    if chw.shape[0] == 1 and channels > 1:
        chw = np.repeat(chw, channels, axis=0)
    if chw.shape[0] != channels:
        raise DataError(
            f"image has {chw.shape[0]} channels but the model expects {channels}")

    mean = np.asarray(pre.mean, dtype=np.float64)
    std = np.asarray(pre.std, dtype=np.float64)
    if mean.size == 1:
        mean = np.full(channels, mean[0])
    if std.size == 1:
        std = np.full(channels, std[0])
    if mean.size != channels or std.size != channels:
        raise DataError(
            f"preprocessing mean/std of length {mean.size}/{std.size} do not "
            f"match {channels} input channels")
    chw = (chw - mean[:, None, None]) / std[:, None, None]
    return chw.astype(DTYPE)


def load_image(path: str | Path, pre: Preprocessing, channels: int) -> np.ndarray:
    """Load and preprocess an image for a model expecting ``channels`` planes.

    Deterministic: the same file always yields a bit-identical tensor.
    """
    return preprocess_image(load_image_raw(path), pre, channels)
