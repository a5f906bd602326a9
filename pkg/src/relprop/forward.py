"""Forward execution with full activation recording.

The trace captures everything backward decomposition needs: the input to
every layer (the m_i values), each MaxPool's winning-element indices, and
the raw logits.  No softmax or sigmoid is ever applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, NumericalError
from .model import LayerDescriptor, ModelGraph
from .tensor import DTYPE


@dataclass
class ActivationTrace:
    """Recorded forward pass: one input tensor per layer, plus the output.

    maxpool_argmax maps a MaxPool layer's index to an int64 array (same
    shape as that layer's output) of flat row-major indices into the
    layer's input; gathering at those indices reproduces the pooled values
    exactly.
    """

    per_layer_inputs: list[np.ndarray] = field(default_factory=list)
    maxpool_argmax: dict[int, np.ndarray] = field(default_factory=dict)
    output: np.ndarray | None = None


def _avgpool_forward(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    win = win[:, ::stride, ::stride].astype(np.float64)
    return win.mean(axis=(3, 4)).astype(DTYPE)


def _apply_layer(layer: LayerDescriptor, w, b, x: np.ndarray,
                 k: int, trace: ActivationTrace) -> np.ndarray:
    kind = layer.kind
    if kind == "Dense":
        y = w.astype(np.float64) @ x.astype(np.float64)
        if b is not None:
            y += b.astype(np.float64)
        return y.astype(DTYPE)
    if kind == "Conv2D":
        return kernels.conv2d_forward(x, w, b, layer["stride"], layer["padding"])
    if kind == "ReLU":
        return np.maximum(x, 0)
    if kind == "MaxPool2D":
        out, argmax = kernels.maxpool2d_forward(x, layer["kernel"], layer["stride"])
        trace.maxpool_argmax[k] = argmax
        return out
    if kind == "AvgPool2D":
        return _avgpool_forward(x, layer["kernel"], layer["stride"])
    if kind == "GlobalAvgPool":
        return x.astype(np.float64).mean(axis=(1, 2)).astype(DTYPE)
    if kind == "Flatten":
        return np.ascontiguousarray(x).reshape(-1)
    raise DataError(f"cannot execute layer kind '{kind}'")


def forward(model: ModelGraph, x: np.ndarray) -> tuple[np.ndarray, ActivationTrace]:
    """Run the network on one input, recording a complete trace.

    Deterministic: identical inputs produce bit-identical traces.
    """
    x = np.asarray(x, dtype=DTYPE)
    if x.shape != tuple(model.input_shape):
        raise DataError(
            f"input shape {x.shape} does not match model input "
            f"{tuple(model.input_shape)}")
    if not np.isfinite(x).all():
        raise NumericalError("input contains non-finite values")
    trace = ActivationTrace()
    for k, layer in enumerate(model.layers):
        trace.per_layer_inputs.append(x)
        x = _apply_layer(layer, model.weights[k], model.biases[k], x, k, trace)
        if not np.isfinite(x).all():
            raise NumericalError(f"non-finite values after layer {k} ({layer.kind})")
    trace.output = x
    return x, trace


def predict(model: ModelGraph, x: np.ndarray) -> tuple[int, float]:
    """Argmax class and its logit; ties break toward the lowest index."""
    logits, _ = forward(model, x)
    idx = int(np.argmax(logits))
    return idx, float(logits[idx])
