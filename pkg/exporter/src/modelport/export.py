"""Convert sequential torch checkpoints into the manifest + blob format.

The output is a model directory (model.json + weights.bin) as consumed
by the relprop loader: little-endian float32 blocks, weight blocks at
16-byte aligned offsets, bias packed immediately after its weights.
BatchNorm layers are exported unfused as a [gamma | beta | mean | var]
block; folding them into the preceding linear layer is the loader's job.

Layout conversion is explicit and conservative: Dense weights go out as
[out, in] and conv weights as [out_ch, in_ch, kh, kw], both row-major,
which is exactly torch's native layout, so no transpose happens at all.
Anything the format cannot represent (grouped or dilated convs, padded
pooling, non-sequential topology) fails the export; nothing is dropped
silently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

FORMAT_VERSION = 1


class ExportError(Exception):
    """The checkpoint cannot be converted faithfully."""


_KIND_BY_TYPE = {
    nn.Conv2d: "Conv2D",
    nn.Linear: "Dense",
    nn.ReLU: "ReLU",
    nn.MaxPool2d: "MaxPool2D",
    nn.AvgPool2d: "AvgPool2D",
    nn.AdaptiveAvgPool2d: "GlobalAvgPool",
    nn.BatchNorm2d: "BatchNorm",
    nn.Flatten: "Flatten",
}

_SUPPORTED = "/".join(t.__name__ for t in _KIND_BY_TYPE)


@dataclass
class ExportSpec:
    """What to convert and how the result should present itself.

    ``layer_mapping`` pairs each child of the sequential checkpoint, in
    order, with the manifest kind it becomes.  Leave it None to infer
    the pairing from the module types; pass it explicitly to pin the
    conversion down (the exporter then refuses anything that does not
    line up, rather than guessing).
    """

    source_checkpoint: str | Path
    input_shape: tuple[int, ...]
    class_names: list[str]
    mean: list[float]
    std: list[float]
    resize: tuple[int, int] | None = None
    layer_mapping: list[tuple[str, str]] | None = None


def _kind_of(name: str, child: nn.Module) -> str:
    kind = _KIND_BY_TYPE.get(type(child))
    if kind is None:
        raise ExportError(
            f"unsupported module '{name}' ({type(child).__name__}); only "
            f"sequential stacks of {_SUPPORTED} can be exported")
    return kind


def _square(value, what: str, name: str) -> int:
    if isinstance(value, str):
        raise ExportError(f"module '{name}': string {what} {value!r} is not "
                          "supported")
    pair = (value, value) if isinstance(value, int) else tuple(value)
    if len(pair) != 2 or pair[0] != pair[1]:
        raise ExportError(
            f"module '{name}': non-square {what} {value!r} is not supported")
    return int(pair[0])


def _array(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype("<f4")


def _convert(name: str, child: nn.Module, kind: str):
    """Return (manifest entry sans offsets, blob blocks, consumed keys).

    Blob blocks are ('weight'|'bias', array) pairs in write order.
    """
    if kind == "Conv2D":
        if child.groups != 1:
            raise ExportError(f"module '{name}': grouped convolution is not "
                              "supported")
        if _square(child.dilation, "dilation", name) != 1:
            raise ExportError(f"module '{name}': dilated convolution is not "
                              "supported")
        if child.padding_mode != "zeros":
            raise ExportError(f"module '{name}': padding_mode "
                              f"'{child.padding_mode}' is not supported")
        w = _array(child.weight)
        entry = {"kind": kind, "in_ch": w.shape[1], "out_ch": w.shape[0],
                 "kernel_h": w.shape[2], "kernel_w": w.shape[3],
                 "stride": _square(child.stride, "stride", name),
                 "padding": _square(child.padding, "padding", name),
                 "has_bias": child.bias is not None}
        blocks = [("weight", w)]
        consumed = [f"{name}.weight"]
        if child.bias is not None:
            blocks.append(("bias", _array(child.bias)))
            consumed.append(f"{name}.bias")
        return entry, blocks, consumed

    if kind == "Dense":
        w = _array(child.weight)
        entry = {"kind": kind, "in_features": w.shape[1],
                 "out_features": w.shape[0], "has_bias": child.bias is not None}
        blocks = [("weight", w)]
        consumed = [f"{name}.weight"]
        if child.bias is not None:
            blocks.append(("bias", _array(child.bias)))
            consumed.append(f"{name}.bias")
        return entry, blocks, consumed

    if kind == "BatchNorm":
        if not child.affine or not child.track_running_stats:
            raise ExportError(f"module '{name}': BatchNorm2d must be affine "
                              "with tracked running stats")
        block = np.concatenate([_array(child.weight), _array(child.bias),
                                _array(child.running_mean),
                                _array(child.running_var)])
        entry = {"kind": kind, "num_features": child.num_features,
                 "eps": float(child.eps)}
        consumed = [f"{name}.weight", f"{name}.bias", f"{name}.running_mean",
                    f"{name}.running_var", f"{name}.num_batches_tracked"]
        return entry, [("weight", block)], consumed

    if kind in ("MaxPool2D", "AvgPool2D"):
        kernel = _square(child.kernel_size, "kernel", name)
        stride = kernel if child.stride is None else _square(
            child.stride, "stride", name)
        if _square(child.padding, "padding", name) != 0:
            raise ExportError(f"module '{name}': padded pooling is not "
                              "supported")
        if getattr(child, "ceil_mode", False):
            raise ExportError(f"module '{name}': ceil_mode pooling is not "
                              "supported")
        if kind == "MaxPool2D" and _square(child.dilation, "dilation",
                                           name) != 1:
            raise ExportError(f"module '{name}': dilated pooling is not "
                              "supported")
        return {"kind": kind, "kernel": kernel, "stride": stride}, [], []

    if kind == "GlobalAvgPool":
        size = child.output_size
        pair = (size, size) if isinstance(size, int) else tuple(size)
        if any(int(s) != 1 for s in pair):
            raise ExportError(f"module '{name}': adaptive pooling to "
                              f"{size!r} is not global average pooling")
        return {"kind": kind}, [], []

    if kind == "Flatten":
        if child.start_dim != 1 or child.end_dim != -1:
            raise ExportError(f"module '{name}': partial Flatten "
                              f"(start_dim={child.start_dim}, "
                              f"end_dim={child.end_dim}) is not supported")
        return {"kind": kind}, [], []

    # ReLU
    return {"kind": kind}, [], []


def _load_checkpoint(path: str | Path) -> nn.Sequential:
    path = Path(path)
    if not path.is_file():
        raise ExportError(f"checkpoint not found: {path}")
    # trusted local artifact; full pickles are the point of this tool
    obj = torch.load(path, map_location="cpu", weights_only=False)
    if isinstance(obj, dict):
        raise ExportError("checkpoint holds a bare state_dict; save the "
                          "full Sequential module instead")
    if not isinstance(obj, nn.Module):
        raise ExportError(f"checkpoint holds {type(obj).__name__}, not a "
                          "torch module")
    if not isinstance(obj, nn.Sequential):
        raise ExportError(
            f"checkpoint root is {type(obj).__name__}, not Sequential; "
            "non-sequential topologies (residual blocks, branches) cannot "
            "be exported")
    obj.eval()
    return obj


def _resolve_mapping(spec: ExportSpec, module: nn.Sequential):
    children = list(module.named_children())
    if spec.layer_mapping is None:
        return [(name, _kind_of(name, child)) for name, child in children]

    mapping = [(str(n), str(k)) for n, k in spec.layer_mapping]
    names = [n for n, _ in mapping]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ExportError(f"layer_mapping lists modules more than once: "
                          f"{', '.join(dupes)}")
    by_name = dict(children)
    for n, k in mapping:
        if n not in by_name:
            raise ExportError(f"layer_mapping names unknown module '{n}'")
        expect = _kind_of(n, by_name[n])
        if expect != k:
            raise ExportError(
                f"module '{n}' is {type(by_name[n]).__name__}, which "
                f"exports as {expect}, not {k}")
    missing = [(n, c) for n, c in children if n not in set(names)]
    missing_params = sorted(
        key for n, c in missing
        for key, _ in c.named_parameters(prefix=n))
    if missing_params:
        raise ExportError("unmapped parameters: "
                          + ", ".join(missing_params))
    if missing:
        n, c = missing[0]
        raise ExportError(f"layer_mapping omits module '{n}' "
                          f"({type(c).__name__})")
    if names != [n for n, _ in children]:
        raise ExportError("layer_mapping must follow the checkpoint's "
                          "module order")
    return mapping


def _validate_spec(spec: ExportSpec) -> None:
    if not spec.class_names or not all(
            isinstance(c, str) and c for c in spec.class_names):
        raise ExportError("class_names must be a non-empty list of names")
    if len(spec.mean) != len(spec.std) or not spec.mean:
        raise ExportError("preprocessing mean and std must be non-empty and "
                          "the same length")
    if any(s == 0 for s in spec.std):
        raise ExportError("preprocessing std must be non-zero")
    if not spec.input_shape or any(int(d) < 1 for d in spec.input_shape):
        raise ExportError(f"invalid input_shape {tuple(spec.input_shape)}")


def export_model(spec: ExportSpec, out_dir: str | Path) -> Path:
    """Write the converted model directory; returns its path.

    Every learnable parameter of the checkpoint must be consumed by the
    mapping; leftovers abort the export with their names.  Re-exporting
    the same checkpoint is byte-identical.
    """
    _validate_spec(spec)
    module = _load_checkpoint(spec.source_checkpoint)
    mapping = _resolve_mapping(spec, module)
    by_name = dict(module.named_children())

    entries = []
    chunks: list[bytes] = []
    offset = 0
    consumed: set[str] = set()
    for name, kind in mapping:
        entry, blocks, keys = _convert(name, by_name[name], kind)
        entry.setdefault("weight_offset", None)
        entry.setdefault("bias_offset", None)
        for slot, arr in blocks:
            if slot == "weight":
                pad = (-offset) % 16
                if pad:
                    chunks.append(b"\x00" * pad)
                    offset += pad
            raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            entry[f"{slot}_offset"] = offset
            chunks.append(raw)
            offset += len(raw)
        consumed.update(keys)
        entries.append(entry)

    leftover = sorted(k for k in module.state_dict()
                      if k not in consumed
                      and not k.endswith("num_batches_tracked"))
    if leftover:
        raise ExportError("unmapped parameters: " + ", ".join(leftover))

    last_dense = next((e for e in reversed(entries) if e["kind"] == "Dense"),
                      None)
    if last_dense and last_dense["out_features"] != len(spec.class_names):
        raise ExportError(
            f"final Dense layer produces {last_dense['out_features']} "
            f"outputs but {len(spec.class_names)} class names were given")

    resize = spec.resize
    if resize is None:
        shape = tuple(int(d) for d in spec.input_shape)
        resize = (shape[-2], shape[-1]) if len(shape) >= 2 else (1, shape[0])

    manifest = {
        "format_version": FORMAT_VERSION,
        "input_shape": [int(d) for d in spec.input_shape],
        "preprocessing": {
            "mean": [float(v) for v in spec.mean],
            "std": [float(v) for v in spec.std],
            "resize": [int(resize[0]), int(resize[1])],
        },
        "class_names": list(spec.class_names),
        "layers": entries,
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "model.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out_dir / "weights.bin").write_bytes(b"".join(chunks))
    return out_dir
