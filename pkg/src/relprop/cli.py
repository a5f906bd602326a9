"""Command-line interface.

Exit codes are a stable contract for pipelines:
  0 success, 1 usage error, 2 data/model error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import struct
import sys
from pathlib import Path

import numpy as np

from .attribution import (Method, cam_heatmap, conservation_report,
                          lrp_backward, rap_backward)
from .dataset import load_dataset_manifest
from .errors import DataError, ModelFormatError, NumericalError, UsageError
from .evaluation import (Heatmap, evaluate_dataset, postprocess_relevance,
                         render_heatmap, summary_grid, write_report)
from .forward import forward
from .images import load_image_raw, preprocess_image
from .model import load_model, summarize
from .tensor import DTYPE, bilinear_resize

RMAP_MAGIC = b"RMAP"
RMAP_VERSION = 1


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code contract."""

    def error(self, message):
        raise UsageError(message)


def write_rmap(path: Path, tensor: np.ndarray) -> None:
    """Dump a tensor as magic RMAP, u32 version, u32 ndim, u32 dims, f32 data."""
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    header = RMAP_MAGIC + struct.pack("<II", RMAP_VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    path.write_bytes(header + arr.tobytes())


def read_rmap(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != RMAP_MAGIC:
        raise DataError(f"{path}: not a relevance dump (bad magic)")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != RMAP_VERSION:
        raise DataError(f"{path}: unsupported relevance dump version {version}")
    dims = struct.unpack_from(f"<{ndim}I", raw, 12)
    data = np.frombuffer(raw, dtype="<f4", offset=12 + 4 * ndim)
    return data.reshape(dims).copy()


def _resolve_target(model, trace, spec: str) -> int:
    if spec == "predicted":
        return int(np.argmax(trace.output))
    try:
        return int(spec)
    except ValueError:
        return model.class_index(spec)


def _resized_raw(raw: np.ndarray, height: int, width: int) -> np.ndarray:
    """Raw uint8 image resized to the model frame, for overlay rendering."""
    chw = raw[None, :, :] if raw.ndim == 2 else raw.transpose(2, 0, 1)
    resized = np.stack([bilinear_resize(plane.astype(DTYPE), height, width)
                        for plane in chw])
    out = resized[0] if resized.shape[0] == 1 else resized.transpose(1, 2, 0)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def cmd_attribute(args) -> int:
    model = load_model(args.model_dir)
    raw = load_image_raw(args.image)
    x = preprocess_image(raw, model.preprocessing, model.input_shape[0])
    _, trace = forward(model, x)
    target = _resolve_target(model, trace, args.target)
    method = args.method
    if method == Method.LRP.value:
        rmap = lrp_backward(model, trace, target, args.alpha, args.beta,
                            bias_in_denominator=args.bias_in_denominator,
                            epsilon=args.epsilon)
        relevance = rmap.input_relevance
    elif method == Method.RAP.value:
        rmap = rap_backward(model, trace, target,
                            bias_in_denominator=args.bias_in_denominator,
                            epsilon=args.epsilon)
        relevance = rmap.input_relevance
    else:
        relevance = cam_heatmap(model, trace, target)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    heat = postprocess_relevance(relevance, Method(method))
    render_heatmap(heat, None, out_dir / "heatmap.png")
    h, w = heat.values.shape
    render_heatmap(heat, _resized_raw(raw, h, w), out_dir / "overlay.png")
    write_rmap(out_dir / "relevance.bin", relevance)
    print(f"target class: {target} ({model.class_names[target]})")
    print(f"f(x) = {float(trace.output[target]):.8f}")
    print(f"wrote {out_dir / 'heatmap.png'}, {out_dir / 'overlay.png'}, "
          f"{out_dir / 'relevance.bin'}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model_dir)
    frame = None
    if len(model.input_shape) == 3:
        frame = (model.input_shape[1], model.input_shape[2])
    samples = load_dataset_manifest(args.manifest, frame=frame)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in (Method.LRP.value, Method.RAP.value, Method.CAM.value):
            raise UsageError(f"unknown method '{m}'")
    thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
    report = evaluate_dataset(model, samples, methods, thresholds,
                              jobs=args.jobs, target_mode=args.target,
                              alpha=args.alpha, beta=args.beta)
    n_ok = sum(c.n_samples for c in report.entries.values())
    if n_ok == 0:
        raise DataError("no evaluable samples (every sample lacks boxes or failed)")
    write_report(report, args.out)
    print(summary_grid(report))
    print(f"report written to {args.out}")
    if report.n_skipped_no_boxes:
        print(f"skipped {report.n_skipped_no_boxes} samples without boxes")
    if report.failures:
        print(f"{len(report.failures)} samples failed:", file=sys.stderr)
        for line in report.failures:
            print(f"  {line}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    model = load_model(args.model_dir)
    rng = np.random.default_rng(args.seed)
    worst = {"lrp": None, "rap": None}
    for _ in range(args.n):
        x = rng.standard_normal(model.input_shape).astype(DTYPE)
        _, trace = forward(model, x)
        target = int(np.argmax(trace.output))
        for name, fn in (("lrp", lambda: lrp_backward(model, trace, target)),
                         ("rap", lambda: rap_backward(model, trace, target))):
            rep = conservation_report(fn())
            if worst[name] is None or rep.max_relative_drift > worst[name].max_relative_drift:
                worst[name] = rep
    for name in ("lrp", "rap"):
        rep = worst[name]
        print(f"{name} f(x)_target = {rep.output_value:+.6f}")
        for k, s in enumerate(rep.per_layer_sums):
            print(f"{name} layer {k:2d} relevance sum = {s:+.6f}")
        print(f"{name} max relative drift = {rep.max_relative_drift:.3e}")
    if worst["lrp"].max_relative_drift > 1e-4:
        print("conservation check failed: lrp drift exceeds 1e-4", file=sys.stderr)
        return 3
    return 0


def cmd_inspect(args) -> int:
    print(summarize(load_model(args.model_dir)))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="relprop",
                     description="Relevance attribution for feed-forward "
                                 "and convolutional classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attribute", help="decompose one image into a heatmap")
    p.add_argument("model_dir")
    p.add_argument("image")
    p.add_argument("--method", choices=["lrp", "rap", "cam"], default="lrp")
    p.add_argument("--target", default="predicted",
                   help="'predicted', a class name, or a class index")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--bias-in-denominator", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--out", default="attribution")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("evaluate", help="thresholded mean-IOU over a dataset")
    p.add_argument("model_dir")
    p.add_argument("manifest")
    p.add_argument("--methods", default="lrp,rap,cam")
    p.add_argument("--thresholds", default="0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--target", choices=["label", "predicted"], default="label")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=0,
                   help="worker threads (0 = all cores); results identical")
    p.add_argument("--out", default="report.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="conservation diagnostics on random inputs")
    p.add_argument("model_dir")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("inspect", help="print the layer table of a model")
    p.add_argument("model_dir")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ModelFormatError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
