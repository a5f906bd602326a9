"""Dense-tensor conventions and the small arithmetic core shared by all modules.

A tensor in this package is a C-contiguous ``numpy.ndarray`` of dtype
``float32``; its ``shape`` is the ordered dimension tuple ([C, H, W] for
images, [N] for vectors).  Storage stays 32-bit while every reduction and
denominator accumulates in 64-bit, so downstream conservation checks are
tighter than the storage precision.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DataError

Shape = tuple[int, ...]

DTYPE = np.float32


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Coerce ``data`` into the package's tensor convention.

    Returns a C-contiguous float32 array, reshaped to ``shape`` if given.
    """
    t = np.ascontiguousarray(data, dtype=DTYPE)
    if shape is not None:
        t = t.reshape(tuple(shape))
    return t


def check_finite(t: np.ndarray, context: str = "tensor") -> None:
    """Raise if ``t`` contains NaN or Inf (module-boundary invariant)."""
    if not np.isfinite(t).all():
        raise DataError(f"non-finite values in {context}")


def sum_all(t: np.ndarray) -> float:
    """Total of all elements, accumulated left-to-right in 64-bit.

    The accumulation order is fixed as flat row-major so that repeated runs
    (and the compiled kernels) produce bit-identical results.
    """
    if t.size == 0:
        raise ValueError("empty tensor")
    flat = np.ascontiguousarray(t).reshape(-1)
    # cumsum is a strict sequential scan; its last entry is the ordered sum
    return float(np.cumsum(flat, dtype=np.float64)[-1])


def split_pos_neg(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``t`` into its positive and negative parts.

    Returns ``(pos, neg)`` with ``pos`` keeping values > 0 (else 0) and
    ``neg`` keeping values < 0 (else 0); ``pos + neg == t`` exactly.
    Exact zeros land in neither nonzero part.
    """
    zero = t.dtype.type(0)
    pos = np.where(t > 0, t, zero)
    neg = np.where(t < 0, t, zero)
    return pos, neg


def bilinear_resize(t: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2-D map with corner-aligned bilinear interpolation.

    Sample positions are ``i_out * (H - 1) / (out_h - 1)`` when the output
    has more than one row (the corners of input and output coincide); a
    single-row/column output samples the input center.  An identity resize
    returns the input values bit-exactly.
    """
    if t.ndim != 2:
        raise ValueError(f"bilinear_resize expects a 2-D tensor, got {t.ndim}-D")
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1")
    h, w = t.shape
    if (out_h, out_w) == (h, w):
        return np.array(t, dtype=DTYPE)

    src = t.astype(np.float64)

    def axis_coords(n_in: int, n_out: int) -> np.ndarray:
        if n_out == 1:
            return np.array([(n_in - 1) / 2.0])
        return np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)

    ys = axis_coords(h, out_h)
    xs = axis_coords(w, out_w)
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, max(h - 2, 0))
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bot * fy
    return out.astype(DTYPE)
