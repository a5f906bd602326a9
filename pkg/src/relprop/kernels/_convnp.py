"""NumPy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available.  All kernels accumulate in float64.  The redistribution kernels
materialize the per-connection contribution array z[out, ..., in-patch],
which is fast but costs O(out_units * patch_size) memory; the compiled
backend streams the same computation in O(1) extra memory.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "numpy"


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Strided view of all conv windows: [C, oh, ow, kh, kw], float64."""
    x64 = x.astype(np.float64)
    if pad:
        x64 = np.pad(x64, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x64, (kh, kw), axis=(1, 2))
    return win[:, ::stride, ::stride]


def conv2d_forward(x, w, b, stride: int, pad: int) -> np.ndarray:
    """Direct 2-D convolution (cross-correlation), float64 accumulation.

    x: [C, H, W] float32; w: [O, C, kh, kw] float32; b: [O] float32 or None.
    Returns [O, oh, ow] float32.
    """
    kh, kw = w.shape[2], w.shape[3]
    win = _windows(x, kh, kw, stride, pad)
    out = np.tensordot(w.astype(np.float64), win, axes=([1, 2, 3], [0, 3, 4]))
    if b is not None:
        out += b.astype(np.float64)[:, None, None]
    return out.astype(np.float32)


def _contributions(x, w, stride: int, pad: int) -> np.ndarray:
    """Per-connection contributions z[o, oh, ow, C, kh, kw], float64."""
    kh, kw = w.shape[2], w.shape[3]
    win = _windows(x, kh, kw, stride, pad)          # [C, oh, ow, kh, kw]
    win = win.transpose(1, 2, 0, 3, 4)              # [oh, ow, C, kh, kw]
    return w.astype(np.float64)[:, None, None, :, :, :] * win[None]


def conv2d_split_sums(x, w, stride: int, pad: int):
    """Per-output-unit sums of positive and negative contributions.

    Returns (splus, sminus), each [O, oh, ow] float64; splus >= 0,
    sminus <= 0. Bias is not included.
    """
    z = _contributions(x, w, stride, pad)
    splus = np.where(z > 0, z, 0.0).sum(axis=(3, 4, 5))
    sminus = np.where(z < 0, z, 0.0).sum(axis=(3, 4, 5))
    return splus, sminus


def conv2d_redistribute(x, w, stride: int, pad: int, pos_scale, neg_scale):
    """Scatter scaled signed contributions back onto the input grid.

    Each output unit j deposits pos_scale[j] * z+_ij and neg_scale[j] * z-_ij
    on every input i in its receptive field.  Returns (rpos, rneg), each
    [C, H, W] float64, keeping the two signed paths separate.
    """
    c, h, wd = x.shape
    kh, kw = w.shape[2], w.shape[3]
    z = _contributions(x, w, stride, pad)           # [O, oh, ow, C, kh, kw]
    zp = np.where(z > 0, z, 0.0)
    zn = np.where(z < 0, z, 0.0)
    contrib_p = np.einsum("oij,oijcuv->cuvij", pos_scale, zp)
    contrib_n = np.einsum("oij,oijcuv->cuvij", neg_scale, zn)

    oh, ow = pos_scale.shape[1], pos_scale.shape[2]
    hp, wp = h + 2 * pad, wd + 2 * pad

    def scatter(contrib):
        acc = np.zeros((c, hp, wp), dtype=np.float64)
        for u in range(kh):
            for v in range(kw):
                acc[:, u:u + stride * oh:stride,
                    v:v + stride * ow:stride] += contrib[:, u, v]
        return acc[:, pad:pad + h, pad:pad + wd] if pad else acc

    return scatter(contrib_p), scatter(contrib_n)


def maxpool2d_forward(x, kernel: int, stride: int):
    """Max pooling with recorded argmax routing.

    Returns (out [C, oh, ow] float32, argmax [C, oh, ow] int64) where each
    argmax entry is the flat row-major index into x of the winning input.
    Ties go to the first element in row-major window scan order.
    """
    c, h, w = x.shape
    win = sliding_window_view(x, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    oh, ow = win.shape[1], win.shape[2]
    flatwin = win.reshape(c, oh, ow, kernel * kernel)
    local = flatwin.argmax(axis=3)
    out = np.take_along_axis(flatwin, local[..., None], axis=3)[..., 0]
    ky, kx = np.divmod(local, kernel)
    ci = np.arange(c)[:, None, None]
    yi = np.arange(oh)[None, :, None] * stride + ky
    xi = np.arange(ow)[None, None, :] * stride + kx
    argmax = (ci * h + yi) * w + xi
    return np.ascontiguousarray(out, dtype=np.float32), argmax.astype(np.int64)


def sum_sequential(flat: np.ndarray) -> float:
    """Strict left-to-right float64 sum of a flat float32 array."""
    return float(np.cumsum(flat, dtype=np.float64)[-1])
