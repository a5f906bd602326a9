"""Portable model format: loading, validation, and batchnorm folding.

A model is a directory holding ``model.json`` (architecture, preprocessing,
class names, per-layer weight offsets) and ``weights.bin`` (concatenated
little-endian float32 values, row-major).  Dense weights are laid out
[out, in], Conv2D weights [out_ch, in_ch, kh, kw]; each layer's bias
immediately follows its weights in the blob.  Offsets are byte offsets and
must be multiples of 4.

BatchNorm entries are a manifest-only construct: at load time each one is
folded into the preceding Conv2D/Dense layer (w' = w*g/sqrt(var+eps),
b' = (b-mean)*g/sqrt(var+eps)+beta), so a loaded graph contains only
propagation-ready layers.  Its weight block stores 4*C floats in the order
gamma, beta, running_mean, running_var.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ModelFormatError
from .tensor import DTYPE, Shape

FORMAT_VERSION = 1

LAYER_KINDS = ("Dense", "Conv2D", "ReLU", "MaxPool2D", "AvgPool2D",
               "GlobalAvgPool", "Flatten")
_CLASSIFIER_KINDS = ("softmax", "sigmoid", "logsoftmax")

_REQUIRED_PARAMS = {
    "Dense": ("in_features", "out_features", "has_bias"),
    "Conv2D": ("in_ch", "out_ch", "kernel_h", "kernel_w", "stride",
               "padding", "has_bias"),
    "ReLU": (),
    "MaxPool2D": ("kernel", "stride"),
    "AvgPool2D": ("kernel", "stride"),
    "GlobalAvgPool": (),
    "Flatten": (),
}


@dataclass(frozen=True)
class LayerDescriptor:
    """One layer of the graph: a kind plus its kind-specific parameters."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ModelFormatError(f"unsupported layer kind '{self.kind}'")
        missing = [p for p in _REQUIRED_PARAMS[self.kind] if p not in self.params]
        if missing:
            raise ModelFormatError(
                f"{self.kind} layer missing params: {', '.join(missing)}")

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    @property
    def has_weights(self) -> bool:
        return self.kind in ("Dense", "Conv2D")

    def weight_shape(self) -> Shape:
        if self.kind == "Dense":
            return (self["out_features"], self["in_features"])
        if self.kind == "Conv2D":
            return (self["out_ch"], self["in_ch"], self["kernel_h"], self["kernel_w"])
        raise ModelFormatError(f"{self.kind} layer carries no weights")

    def bias_shape(self) -> Shape:
        return (self.weight_shape()[0],)

    def output_shape(self, in_shape: Shape) -> Shape:
        """Shape produced from ``in_shape``; raises on incompatibility."""
        k = self.kind
        if k == "Dense":
            if len(in_shape) != 1 or in_shape[0] != self["in_features"]:
                raise ModelFormatError(
                    f"Dense expects 1-D input of {self['in_features']}, got {in_shape}")
            return (self["out_features"],)
        if k == "Flatten":
            return (int(np.prod(in_shape)),)
        if k == "ReLU":
            return in_shape
        if len(in_shape) != 3:
            raise ModelFormatError(f"{k} expects [C,H,W] input, got {in_shape}")
        c, h, w = in_shape
        if k == "Conv2D":
            if c != self["in_ch"]:
                raise ModelFormatError(
                    f"Conv2D expects {self['in_ch']} channels, got {c}")
            s, p = self["stride"], self["padding"]
            oh = (h + 2 * p - self["kernel_h"]) // s + 1
            ow = (w + 2 * p - self["kernel_w"]) // s + 1
            if oh < 1 or ow < 1:
                raise ModelFormatError(f"Conv2D kernel larger than input {in_shape}")
            return (self["out_ch"], oh, ow)
        if k in ("MaxPool2D", "AvgPool2D"):
            kk, s = self["kernel"], self["stride"]
            if h < kk or w < kk:
                raise ModelFormatError(f"{k} kernel larger than input {in_shape}")
            return (c, (h - kk) // s + 1, (w - kk) // s + 1)
        if k == "GlobalAvgPool":
            return (c,)
        raise ModelFormatError(f"unsupported layer kind '{k}'")


@dataclass(frozen=True)
class Preprocessing:
    mean: tuple[float, ...]
    std: tuple[float, ...]
    resize: tuple[int, int]


@dataclass
class ModelGraph:
    """Validated, immutable-by-convention model: descriptors plus weights."""

    layers: list[LayerDescriptor]
    weights: list[np.ndarray | None]
    biases: list[np.ndarray | None]
    input_shape: Shape
    class_names: list[str]
    preprocessing: Preprocessing

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        n = len(self.layers)
        if len(self.weights) != n or len(self.biases) != n:
            raise ModelFormatError("weights/biases lists must match layer count")
        for k, (layer, w, b) in enumerate(zip(self.layers, self.weights, self.biases)):
            if layer.has_weights:
                if w is None:
                    raise ModelFormatError(f"layer {k} ({layer.kind}) missing weights")
                if w.shape != layer.weight_shape():
                    raise ModelFormatError(
                        f"layer {k} weight shape mismatch: expected "
                        f"{layer.weight_shape()}, got {w.shape}")
                if layer["has_bias"]:
                    if b is None or b.shape != layer.bias_shape():
                        got = None if b is None else b.shape
                        raise ModelFormatError(
                            f"layer {k} bias shape mismatch: expected "
                            f"{layer.bias_shape()}, got {got}")
                elif b is not None:
                    raise ModelFormatError(f"layer {k} declares no bias but has one")
            elif w is not None or b is not None:
                raise ModelFormatError(f"layer {k} ({layer.kind}) carries no weights")
        shapes = self.layer_shapes()
        if self.layers and self.layers[-1].kind == "ReLU":
            raise ModelFormatError(
                "activation after the final linear layer is not allowed")
        out = shapes[-1]
        if out != (len(self.class_names),):
            raise ModelFormatError(
                f"final layer produces {out}, expected ({len(self.class_names)},) "
                "to match class_names")

    def layer_shapes(self) -> list[Shape]:
        """Input shape of every layer followed by the output shape."""
        shapes = [tuple(self.input_shape)]
        for layer in self.layers:
            shapes.append(layer.output_shape(shapes[-1]))
        return shapes

    def num_parameters(self) -> int:
        total = 0
        for w, b in zip(self.weights, self.biases):
            total += 0 if w is None else w.size
            total += 0 if b is None else b.size
        return total

    def class_index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise ModelFormatError(f"unknown class '{name}'") from None


def _as_int(value, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ModelFormatError(f"{what} must be an integer, got {value!r}")
    return value


def _fold_batchnorm(layer: LayerDescriptor, w: np.ndarray, b: np.ndarray | None,
                    gamma, beta, mean, var, eps: float):
    """Fold batchnorm statistics into the preceding linear layer's weights."""
    scale = gamma.astype(np.float64) / np.sqrt(var.astype(np.float64) + eps)
    w64 = w.astype(np.float64)
    if layer.kind == "Conv2D":
        w64 *= scale[:, None, None, None]
    else:
        w64 *= scale[:, None]
    b64 = np.zeros(w.shape[0], dtype=np.float64) if b is None else b.astype(np.float64)
    b64 = (b64 - mean.astype(np.float64)) * scale + beta.astype(np.float64)
    folded = LayerDescriptor(layer.kind, {**layer.params, "has_bias": True})
    return folded, w64.astype(DTYPE), b64.astype(DTYPE)


def load_model(model_dir: str | Path) -> ModelGraph:
    """Load and validate a model directory, folding any BatchNorm entries."""
    model_dir = Path(model_dir)
    manifest_path = model_dir / "model.json"
    blob_path = model_dir / "weights.bin"
    if not manifest_path.is_file():
        raise ModelFormatError(f"missing manifest {manifest_path}")
    if not blob_path.is_file():
        raise ModelFormatError(f"missing weight blob {blob_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model.json is not valid JSON: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r}")

    blob = np.fromfile(blob_path, dtype="<f4")
    blob_bytes = blob.size * 4

    def read_block(offset: int, count: int, what: str) -> np.ndarray:
        if offset % 4:
            raise ModelFormatError(f"{what} offset {offset} not 4-byte aligned")
        end = offset + count * 4
        if end > blob_bytes:
            raise ModelFormatError(
                f"weights.bin too short: expected at least {end} bytes, "
                f"got {blob_bytes}")
        return np.array(blob[offset // 4:offset // 4 + count], dtype=DTYPE)

    layers: list[LayerDescriptor] = []
    weights: list[np.ndarray | None] = []
    biases: list[np.ndarray | None] = []
    for k, entry in enumerate(manifest.get("layers", [])):
        kind = entry.get("kind")
        params = {key: v for key, v in entry.items()
                  if key not in ("kind", "weight_offset", "bias_offset")}
        if isinstance(kind, str) and kind.lower() in _CLASSIFIER_KINDS:
            raise ModelFormatError(
                f"layer {k}: classification layer must be excluded "
                "(relevance starts from the pre-classification output)")
        if kind == "BatchNorm":
            if not layers or not layers[-1].has_weights:
                raise ModelFormatError(
                    f"layer {k}: BatchNorm must follow a Conv2D or Dense layer")
            nf = _as_int(params.get("num_features"), "num_features")
            eps = float(params.get("eps", 1e-5))
            block = read_block(_as_int(entry.get("weight_offset"),
                                       f"layer {k} weight"), 4 * nf,
                               f"layer {k} (BatchNorm)")
            prev = layers[-1]
            if prev.weight_shape()[0] != nf:
                raise ModelFormatError(
                    f"layer {k}: BatchNorm num_features {nf} does not match "
                    f"preceding layer's {prev.weight_shape()[0]} outputs")
            folded, w, b = _fold_batchnorm(
                prev, weights[-1], biases[-1],
                block[:nf], block[nf:2 * nf], block[2 * nf:3 * nf], block[3 * nf:],
                eps)
            layers[-1], weights[-1], biases[-1] = folded, w, b
            continue
        try:
            layer = LayerDescriptor(kind, params)
        except ModelFormatError as exc:
            raise ModelFormatError(f"layer {k}: {exc}") from None
        w = b = None
        if layer.has_weights:
            wshape = layer.weight_shape()
            w = read_block(_as_int(entry.get("weight_offset"), f"layer {k} weight"),
                           int(np.prod(wshape)), f"layer {k} weights").reshape(wshape)
            if layer["has_bias"]:
                b = read_block(_as_int(entry.get("bias_offset"), f"layer {k} bias"),
                               wshape[0], f"layer {k} bias")
        layers.append(layer)
        weights.append(w)
        biases.append(b)

    pre = manifest.get("preprocessing", {})
    preprocessing = Preprocessing(
        mean=tuple(float(v) for v in pre.get("mean", [])),
        std=tuple(float(v) for v in pre.get("std", [])),
        resize=tuple(int(v) for v in pre.get("resize", [])),
    )
    if len(preprocessing.resize) != 2:
        raise ModelFormatError("preprocessing.resize must be [H, W]")
    if any(s == 0 for s in preprocessing.std):
        raise ModelFormatError("preprocessing.std entries must be nonzero")

    input_shape = tuple(int(v) for v in manifest.get("input_shape", []))
    if not input_shape or any(d < 1 for d in input_shape):
        raise ModelFormatError(f"invalid input_shape {input_shape}")

    class_names = [str(c) for c in manifest.get("class_names", [])]
    if not class_names:
        raise ModelFormatError("class_names must be non-empty")

    model = ModelGraph(layers, weights, biases, input_shape, class_names,
                       preprocessing)
    _check_finite_weights(model)
    return model


def save_model(model: ModelGraph, out_dir: str | Path) -> None:
    """Write ``model`` as a canonical manifest + blob directory.

    Weight blocks are 16-byte aligned; each bias immediately follows its
    weights.  Saving then reloading reproduces the weights bit-exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chunks: list[bytes] = []
    offset = 0
    entries = []
    for layer, w, b in zip(model.layers, model.weights, model.biases):
        entry: dict[str, Any] = {"kind": layer.kind, **layer.params,
                                 "weight_offset": None, "bias_offset": None}
        if w is not None:
            pad = (-offset) % 16
            if pad:
                chunks.append(b"\x00" * pad)
                offset += pad
            entry["weight_offset"] = offset
            raw = np.ascontiguousarray(w, dtype="<f4").tobytes()
            chunks.append(raw)
            offset += len(raw)
            if b is not None:
                entry["bias_offset"] = offset
                raw = np.ascontiguousarray(b, dtype="<f4").tobytes()
                chunks.append(raw)
                offset += len(raw)
        entries.append(entry)
    manifest = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "preprocessing": {
            "mean": list(model.preprocessing.mean),
            "std": list(model.preprocessing.std),
            "resize": list(model.preprocessing.resize),
        },
        "class_names": list(model.class_names),
        "layers": entries,
    }
    (out_dir / "model.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out_dir / "weights.bin").write_bytes(b"".join(chunks))


def summarize(model: ModelGraph) -> str:
    """Human-readable layer table used by the CLI's inspect command."""
    shapes = model.layer_shapes()
    lines = [f"{'#':>3}  {'kind':<14}{'output shape':<18}{'params':>10}"]
    for k, layer in enumerate(model.layers):
        w, b = model.weights[k], model.biases[k]
        count = (0 if w is None else w.size) + (0 if b is None else b.size)
        shape = "x".join(str(d) for d in shapes[k + 1])
        lines.append(f"{k:>3}  {layer.kind:<14}{shape:<18}{count:>10}")
    lines.append(f"input shape : {'x'.join(str(d) for d in model.input_shape)}")
    lines.append(f"classes     : {', '.join(model.class_names)}")
    p = model.preprocessing
    lines.append(f"preprocess  : mean={list(p.mean)} std={list(p.std)} "
                 f"resize={p.resize[0]}x{p.resize[1]}")
    lines.append(f"parameters  : {model.num_parameters()}")
    return "\n".join(lines)


def _check_finite_weights(model: ModelGraph) -> None:
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        for name, arr in (("weights", w), ("bias", b)):
            if arr is not None and not np.isfinite(arr).all():
                raise ModelFormatError(f"layer {k} {name} contain non-finite values")
