"""Relevance decomposition: LRP-alpha/beta, RAP, and CAM.

All three methods start from the same initial condition: relevance at the
output layer is zero except at the target class, where it equals the raw
logit f(x)_target.  Backward math runs in float64; the per-layer tensors
keep that precision so conservation diagnostics are meaningful.

Propagation rules, shared by LRP and RAP:
  - Dense/Conv2D redistribute by signed contributions z_ij = m_i * w_ij,
    with positive and negative parts scaled separately (the two methods
    differ only in the per-output coefficients they assign to each part).
  - AvgPool/GlobalAvgPool are fixed-weight linear layers (weight 1/k) and
    use the same redistribution machinery.
  - ReLU passes relevance through unchanged.
  - MaxPool routes each output's relevance entirely to its recorded argmax.
  - Flatten is a pure reshape.

Zero denominators never raise: a path whose contribution sum is zero
carries zero relevance (0/0 := 0).  Biases receive no relevance and are
excluded from denominators unless ``bias_in_denominator`` is set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ModelFormatError, UsageError
from .forward import ActivationTrace
from .model import LayerDescriptor, ModelGraph
from .tensor import DTYPE, bilinear_resize, sum_all

log = logging.getLogger(__name__)

_LINEAR_KINDS = ("Dense", "Conv2D", "AvgPool2D", "GlobalAvgPool")


class Method(str, Enum):
    LRP = "lrp"
    RAP = "rap"
    CAM = "cam"


@dataclass
class RelevanceMap:
    """Per-layer relevance tensors, ordered output -> input.

    per_layer[0] is the output-layer relevance (zero except the target
    entry); per_layer[-1] is input-shaped.  Tensors are float64.
    """

    per_layer: list[np.ndarray]
    method: Method
    target_class: int
    alpha: float | None = None
    beta: float | None = None

    @property
    def input_relevance(self) -> np.ndarray:
        return self.per_layer[-1]


@dataclass
class ConservationReport:
    per_layer_sums: list[float]
    output_value: float
    max_relative_drift: float


def _check_target(model: ModelGraph, target: int) -> None:
    if not 0 <= target < len(model.class_names):
        raise UsageError(
            f"class index out of range: {target} (model has "
            f"{len(model.class_names)} classes)")


def _output_relevance(trace: ActivationTrace, target: int) -> np.ndarray:
    r = np.zeros(trace.output.shape, dtype=np.float64)
    r[target] = float(trace.output[target])
    return r


def _pool_windows(m64: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(
        m64, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    return win / float(kernel * kernel)


def _linear_sums(layer: LayerDescriptor, w, b, m: np.ndarray,
                 bias_in_denominator: bool, epsilon: float):
    """Positive and negative contribution sums per output unit (float64)."""
    kind = layer.kind
    if kind == "Dense":
        z = w.astype(np.float64) * m.astype(np.float64)[None, :]
        splus = np.maximum(z, 0.0).sum(axis=1)
        sminus = np.minimum(z, 0.0).sum(axis=1)
    elif kind == "Conv2D":
        splus, sminus = kernels.conv2d_split_sums(
            m, w, layer["stride"], layer["padding"])
    elif kind == "AvgPool2D":
        zwin = _pool_windows(m.astype(np.float64), layer["kernel"], layer["stride"])
        splus = np.maximum(zwin, 0.0).sum(axis=(3, 4))
        sminus = np.minimum(zwin, 0.0).sum(axis=(3, 4))
    elif kind == "GlobalAvgPool":
        z = m.astype(np.float64) / float(m.shape[1] * m.shape[2])
        splus = np.maximum(z, 0.0).sum(axis=(1, 2))
        sminus = np.minimum(z, 0.0).sum(axis=(1, 2))
    else:
        raise ModelFormatError(f"{kind} is not a linear layer")
    if bias_in_denominator and b is not None:
        b64 = b.astype(np.float64)
        bpos, bneg = np.maximum(b64, 0.0), np.minimum(b64, 0.0)
        if splus.ndim == 3:
            bpos, bneg = bpos[:, None, None], bneg[:, None, None]
        splus = splus + bpos
        sminus = sminus + bneg
    if epsilon:
        splus = splus + epsilon
        sminus = sminus - epsilon
    return splus, sminus


def _linear_redistribute(layer: LayerDescriptor, w, m: np.ndarray,
                         pos_scale: np.ndarray, neg_scale: np.ndarray):
    """Scatter z+*pos_scale and z-*neg_scale back onto the layer's inputs."""
    kind = layer.kind
    if kind == "Dense":
        z = w.astype(np.float64) * m.astype(np.float64)[None, :]
        rpos = np.maximum(z, 0.0).T @ pos_scale
        rneg = np.minimum(z, 0.0).T @ neg_scale
        return rpos, rneg
    if kind == "Conv2D":
        return kernels.conv2d_redistribute(
            m, w, layer["stride"], layer["padding"],
            np.ascontiguousarray(pos_scale, dtype=np.float64),
            np.ascontiguousarray(neg_scale, dtype=np.float64))
    if kind == "AvgPool2D":
        k, s = layer["kernel"], layer["stride"]
        zwin = _pool_windows(m.astype(np.float64), k, s)
        c, oh, ow = zwin.shape[:3]
        rpos = np.zeros(m.shape, dtype=np.float64)
        rneg = np.zeros(m.shape, dtype=np.float64)
        for u in range(k):
            for v in range(k):
                zs = zwin[:, :, :, u, v]
                rpos[:, u:u + oh * s:s, v:v + ow * s:s] += np.maximum(zs, 0.0) * pos_scale
                rneg[:, u:u + oh * s:s, v:v + ow * s:s] += np.minimum(zs, 0.0) * neg_scale
        return rpos, rneg
    if kind == "GlobalAvgPool":
        z = m.astype(np.float64) / float(m.shape[1] * m.shape[2])
        rpos = np.maximum(z, 0.0) * pos_scale[:, None, None]
        rneg = np.minimum(z, 0.0) * neg_scale[:, None, None]
        return rpos, rneg
    raise ModelFormatError(f"{kind} is not a linear layer")


def _scales(splus, sminus, cpos, cneg):
    with np.errstate(divide="ignore", invalid="ignore"):
        ps = np.where(splus != 0.0, cpos / splus, 0.0)
        ns = np.where(sminus != 0.0, cneg / sminus, 0.0)
    return ps, ns


def _maxpool_route(R: np.ndarray, argmax: np.ndarray, in_shape) -> np.ndarray:
    n = int(np.prod(in_shape))
    lower = np.bincount(argmax.ravel(), weights=R.astype(np.float64).ravel(),
                        minlength=n)
    return lower.reshape(in_shape)


def lrp_backward(model: ModelGraph, trace: ActivationTrace, target: int,
                 alpha: float = 1.0, beta: float = 0.0, *,
                 bias_in_denominator: bool = False,
                 epsilon: float = 0.0) -> RelevanceMap:
    """Decompose the target logit by signed-contribution proportions.

    At every Dense/Conv layer the relevance of output unit j is split into
    a positive part alpha * z+/sum(z+) and a negative part
    -beta * z-/sum(z-); alpha - beta must equal 1 so the parts account for
    R_j exactly.  With alpha=1, beta=0 and biases excluded the per-layer
    sums all equal f(x)_target.
    """
    if abs((alpha - beta) - 1.0) > 1e-9:
        raise UsageError(f"alpha - beta must equal 1, got {alpha} - {beta}")
    _check_target(model, target)
    R = _output_relevance(trace, target)
    per_layer = [R]
    for k in reversed(range(len(model.layers))):
        layer = model.layers[k]
        m = trace.per_layer_inputs[k]
        if layer.kind in _LINEAR_KINDS:
            splus, sminus = _linear_sums(layer, model.weights[k], model.biases[k],
                                         m, bias_in_denominator, epsilon)
            ps, ns = _scales(splus, sminus, alpha * R, (-beta) * R)
            rpos, rneg = _linear_redistribute(layer, model.weights[k], m, ps, ns)
            R = rpos + rneg
        elif layer.kind == "ReLU":
            pass
        elif layer.kind == "MaxPool2D":
            R = _maxpool_route(R, trace.maxpool_argmax[k], m.shape)
        elif layer.kind == "Flatten":
            R = R.reshape(m.shape)
        else:
            raise ModelFormatError(f"no propagation rule for layer kind '{layer.kind}'")
        per_layer.append(R)
    return RelevanceMap(per_layer, Method.LRP, target, alpha, beta)


def rap_normalize_penultimate(model: ModelGraph, trace: ActivationTrace,
                              target: int) -> np.ndarray:
    """Absolute influence normalization at the final layer.

    Step 1: each penultimate unit takes relevance proportional to its
    signed contribution z_i = m_i * w_i(target), scaled so the total is
    f(x)_target.  Step 2: R' = |R| * (sum R / sum |R|), making the vector
    uniformly same-signed while keeping its total.
    """
    _check_target(model, target)
    final = model.layers[-1]
    if final.kind != "Dense":
        raise ModelFormatError("RAP requires a Dense final layer")
    m = trace.per_layer_inputs[-1].astype(np.float64)
    z = model.weights[-1][target].astype(np.float64) * m
    total = z.sum()
    fx = float(trace.output[target])
    if total == 0.0:
        log.warning("degenerate penultimate normalization: contribution sum is 0")
        return np.zeros_like(z)
    r = z * (fx / total)
    abs_sum = np.abs(r).sum()
    if abs_sum == 0.0:
        log.warning("degenerate penultimate normalization: |R| sums to 0")
        return np.zeros_like(r)
    return np.abs(r) * (r.sum() / abs_sum)


def rap_layer_backward(layer: LayerDescriptor, w, b, m: np.ndarray,
                       R_upper: np.ndarray, *,
                       bias_in_denominator: bool = False,
                       epsilon: float = 0.0):
    """One signed-propagation step: returns (R_bar, R_neg_path).

    The positive path distributes R_j by z+ proportions; the negative path
    carries R_j scaled by |z- sum| / (|z+ sum| + |z- sum|), distributed by
    z- proportions.  R_neg_path is the negative-path portion alone, needed
    by the uniform shift that follows.
    """
    splus, sminus = _linear_sums(layer, w, b, m, bias_in_denominator, epsilon)
    total = splus - sminus
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(total != 0.0, -sminus / total, 0.0)
    ps, ns = _scales(splus, sminus, R_upper, R_upper * ratio)
    rpos, rneg = _linear_redistribute(layer, w, m, ps, ns)
    return rpos + rneg, rneg


def rap_uniform_shift(R_bar: np.ndarray, R_neg_path: np.ndarray,
                      activations: np.ndarray) -> np.ndarray:
    """Subtract the negative-path total, spread equally over active units.

    Psi_i = sum(R_neg_path) / Gamma where activation m_i > 0, else 0;
    Gamma counts strictly positive activations (spatial positions count
    individually for conv maps).  Gamma = 0 skips the shift.
    """
    active = activations > 0
    gamma = int(np.count_nonzero(active))
    if gamma == 0:
        log.warning("uniform shift skipped: no activated units in layer")
        return R_bar
    total_neg = sum_all(R_neg_path)
    psi = np.where(active, total_neg / gamma, 0.0)
    return R_bar - psi


def rap_backward(model: ModelGraph, trace: ActivationTrace, target: int, *,
                 bias_in_denominator: bool = False,
                 epsilon: float = 0.0) -> RelevanceMap:
    """Full relative-attribution decomposition.

    Composes the penultimate normalization once, then per remaining linear
    layer a signed-propagation step followed by the uniform shift.  ReLU,
    MaxPool and Flatten behave exactly as under LRP.
    """
    _check_target(model, target)
    R = _output_relevance(trace, target)
    per_layer = [R]
    R = rap_normalize_penultimate(model, trace, target)
    per_layer.append(R)
    for k in reversed(range(len(model.layers) - 1)):
        layer = model.layers[k]
        m = trace.per_layer_inputs[k]
        if layer.kind in _LINEAR_KINDS:
            r_bar, r_neg = rap_layer_backward(
                layer, model.weights[k], model.biases[k], m, R,
                bias_in_denominator=bias_in_denominator, epsilon=epsilon)
            R = rap_uniform_shift(r_bar, r_neg, m)
        elif layer.kind == "ReLU":
            pass
        elif layer.kind == "MaxPool2D":
            R = _maxpool_route(R, trace.maxpool_argmax[k], m.shape)
        elif layer.kind == "Flatten":
            R = R.reshape(m.shape)
        else:
            raise ModelFormatError(f"no propagation rule for layer kind '{layer.kind}'")
        per_layer.append(R)
    return RelevanceMap(per_layer, Method.RAP, target)


def cam_heatmap(model: ModelGraph, trace: ActivationTrace, target: int, *,
                resize: bool = True) -> np.ndarray:
    """Class activation map: classifier-weighted sum of the maps feeding GAP.

    Requires a Conv -> GlobalAvgPool -> Dense tail (an optional Flatten
    between pool and classifier is tolerated).  Returns [H,W] float32,
    bilinearly resized to the model input size unless ``resize`` is False.
    """
    _check_target(model, target)
    err = ModelFormatError(
        "CAM requires GAP head (Conv -> GlobalAvgPool -> Dense tail)")
    n = len(model.layers)
    if n < 2 or model.layers[-1].kind != "Dense":
        raise err
    k = n - 2
    if model.layers[k].kind == "Flatten":
        k -= 1
    if k < 0 or model.layers[k].kind != "GlobalAvgPool":
        raise err
    feats = trace.per_layer_inputs[k]
    if feats.ndim != 3:
        raise err
    wrow = model.weights[-1][target].astype(np.float64)
    cam = np.tensordot(wrow, feats.astype(np.float64), axes=(0, 0))
    if resize:
        h, w = model.input_shape[1], model.input_shape[2]
        return bilinear_resize(cam.astype(DTYPE), h, w)
    return cam.astype(DTYPE)


def conservation_report(rmap: RelevanceMap) -> ConservationReport:
    """Per-layer relevance totals and the worst relative drift from f(x)."""
    sums = [sum_all(t) for t in rmap.per_layer]
    out = sums[0]
    denom = max(abs(out), 1e-12)
    drift = max(abs(s - out) for s in sums) / denom
    return ConservationReport(sums, out, drift)
