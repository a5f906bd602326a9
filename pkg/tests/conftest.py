"""Shared builders for synthetic models used across the test modules."""

import numpy as np
import pytest

from relprop import LayerDescriptor, ModelGraph, Preprocessing
from relprop.kernels import available_backends, backend_name, use_backend

FIXTURE_DIR_NAME = "fixtures"


def _pre(input_shape):
    if len(input_shape) == 3:
        return Preprocessing((0.0,), (1.0,), (input_shape[1], input_shape[2]))
    return Preprocessing((0.0,), (1.0,), (1, input_shape[0]))


def dense(out_features, in_features, has_bias=False):
    return LayerDescriptor("Dense", {"in_features": in_features,
                                     "out_features": out_features,
                                     "has_bias": has_bias})


def conv(out_ch, in_ch, k, stride=1, padding=0, has_bias=False):
    return LayerDescriptor("Conv2D", {"out_ch": out_ch, "in_ch": in_ch,
                                      "kernel_h": k, "kernel_w": k,
                                      "stride": stride, "padding": padding,
                                      "has_bias": has_bias})


def relu():
    return LayerDescriptor("ReLU", {})


def mlp_model(ws, bs=None, class_names=None):
    """Build Dense/ReLU/.../Dense from a list of [out,in] weight matrices."""
    ws = [np.asarray(w, dtype=np.float32) for w in ws]
    if bs is None:
        bs = [None] * len(ws)
    bs = [None if b is None else np.asarray(b, dtype=np.float32) for b in bs]
    layers, weights, biases = [], [], []
    for l, w in enumerate(ws):
        layers.append(dense(w.shape[0], w.shape[1], bs[l] is not None))
        weights.append(w)
        biases.append(bs[l])
        if l < len(ws) - 1:
            layers.append(relu())
            weights.append(None)
            biases.append(None)
    n_out = ws[-1].shape[0]
    names = class_names or [f"c{i}" for i in range(n_out)]
    input_shape = (ws[0].shape[1],)
    return ModelGraph(input_shape=input_shape, class_names=names,
                      preprocessing=_pre(input_shape), layers=tuple(layers),
                      weights=tuple(weights), biases=tuple(biases))


def random_mlp(rng, n_dense=3, max_width=8, bias=False, nonneg=False):
    widths = [int(rng.integers(2, max_width + 1)) for _ in range(n_dense + 1)]
    ws, bs = [], []
    for l in range(n_dense):
        w = rng.standard_normal((widths[l + 1], widths[l]))
        if nonneg:
            w = np.abs(w)
        ws.append(w.astype(np.float32))
        if bias:
            b = rng.standard_normal(widths[l + 1])
            if nonneg:
                b = np.abs(b)
            bs.append(b.astype(np.float32))
        else:
            bs.append(None)
    return mlp_model(ws, bs)


def random_convnet(rng, bias=False, nonneg=False, pool="max"):
    """Small conv stack: Conv/ReLU/pool/Conv/ReLU/GAP/Dense on 2x8x8 input."""
    c_in, c_mid, c_out, n_cls = 2, 3, 4, 3

    def weight(shape):
        w = rng.standard_normal(shape)
        return np.abs(w).astype(np.float32) if nonneg else w.astype(np.float32)

    def maybe_bias(n):
        if not bias:
            return None
        b = rng.standard_normal(n)
        return np.abs(b).astype(np.float32) if nonneg else b.astype(np.float32)

    layers = [conv(c_mid, c_in, 3, padding=1, has_bias=bias), relu()]
    weights = [weight((c_mid, c_in, 3, 3)), None]
    biases = [maybe_bias(c_mid), None]
    if pool == "max":
        layers.append(LayerDescriptor("MaxPool2D", {"kernel": 2, "stride": 2}))
        weights.append(None)
        biases.append(None)
    elif pool == "avg":
        layers.append(LayerDescriptor("AvgPool2D", {"kernel": 2, "stride": 2}))
        weights.append(None)
        biases.append(None)
    layers += [conv(c_out, c_mid, 3, padding=1, has_bias=bias), relu(),
               LayerDescriptor("GlobalAvgPool", {}),
               dense(n_cls, c_out, bias)]
    weights += [weight((c_out, c_mid, 3, 3)), None, None, weight((n_cls, c_out))]
    biases += [maybe_bias(c_out), None, None, maybe_bias(n_cls)]
    input_shape = (c_in, 8, 8)
    return ModelGraph(input_shape=input_shape,
                      class_names=[f"c{i}" for i in range(n_cls)],
                      preprocessing=_pre(input_shape), layers=tuple(layers),
                      weights=tuple(weights), biases=tuple(biases))


@pytest.fixture(params=sorted(available_backends()))
def each_backend(request):
    """Run the decorated test once per compiled/fallback kernel backend."""
    previous = backend_name()
    use_backend(request.param)
    yield request.param
    use_backend(previous)


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, ok in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"  {'PASS' if ok else 'FAIL'}: {name}")
