"""Kernel backend selection.

The compiled extension is preferred when present; the NumPy fallback is
always available.  Set ``RELPROP_KERNELS=numpy`` or ``RELPROP_KERNELS=cython``
to force a backend (forcing ``cython`` fails loudly if the extension is
missing).  Both backends implement the same contracts and agree within
float accumulation-order differences (<= 1e-10 relative at desk scale).
"""

from __future__ import annotations

import os

from . import _convnp

_FORCED = os.environ.get("RELPROP_KERNELS", "").strip().lower()

if _FORCED == "numpy":
    _impl = _convnp
elif _FORCED == "cython":
    from . import _convext as _impl  # noqa: F401
else:
    try:
        from . import _convext as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _convnp


def backend_name() -> str:
    """Name of the active backend: 'cython' or 'numpy'."""
    return _impl.BACKEND


def use_backend(name: str) -> None:
    """Switch the active backend at runtime (used by the benchmark)."""
    global _impl
    if name == "numpy":
        _impl = _convnp
    elif name == "cython":
        from . import _convext
        _impl = _convext
    else:
        raise ValueError(f"unknown kernel backend '{name}'")


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        from . import _convext  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def conv2d_forward(x, w, b, stride, pad):
    return _impl.conv2d_forward(x, w, b, stride, pad)


def conv2d_split_sums(x, w, stride, pad):
    return _impl.conv2d_split_sums(x, w, stride, pad)


def conv2d_redistribute(x, w, stride, pad, pos_scale, neg_scale):
    return _impl.conv2d_redistribute(x, w, stride, pad, pos_scale, neg_scale)


def maxpool2d_forward(x, kernel, stride):
    return _impl.maxpool2d_forward(x, kernel, stride)


def sum_sequential(flat):
    return _impl.sum_sequential(flat)
