"""Command-line entry points: export, synth, convert-boxes.

Exit codes follow the attribution CLI's convention: 0 success, 1 usage
error, 2 data or conversion error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .boxes import convert_boxes
from .export import ExportError, ExportSpec, export_model
from .synth import make_synthetic_dataset


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _parse_size(text: str, flag: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        a, b = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"{flag} must look like 64x64, got '{text}'")
    if a < 1 or b < 1:
        raise ValueError(f"{flag} must be positive, got '{text}'")
    return a, b


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise ValueError(f"{flag} must be comma-separated numbers, "
                         f"got '{text}'")


def cmd_export(args) -> int:
    try:
        shape = tuple(int(p) for p in args.input_shape.lower().split("x"))
        mean = _parse_floats(args.mean, "--mean")
        std = _parse_floats(args.std, "--std")
        resize = _parse_size(args.resize, "--resize") if args.resize else None
    except ValueError as exc:
        return _fail(str(exc), 1)
    mapping = None
    if args.mapping:
        try:
            raw = json.loads(Path(args.mapping).read_text())
            mapping = [(str(n), str(k)) for n, k in raw]
        except (OSError, ValueError, TypeError) as exc:
            return _fail(f"cannot read mapping file: {exc}", 2)
    spec = ExportSpec(
        source_checkpoint=args.checkpoint,
        input_shape=shape,
        class_names=[c for c in args.classes.split(",") if c],
        mean=mean, std=std, resize=resize, layer_mapping=mapping)
    try:
        out = export_model(spec, args.out)
    except ExportError as exc:
        return _fail(str(exc), 2)
    print(f"wrote {out / 'model.json'} and {out / 'weights.bin'}")
    return 0


def cmd_synth(args) -> int:
    if args.n < 1:
        return _fail(f"--n must be >= 1, got {args.n}", 1)
    try:
        manifest = make_synthetic_dataset(args.n, args.seed, args.out)
    except OSError as exc:
        return _fail(str(exc), 2)
    print(f"wrote {args.n} samples, manifest {manifest}")
    return 0


def cmd_convert_boxes(args) -> int:
    try:
        src = _parse_size(args.src, "--from")
        dst = _parse_size(args.dst, "--to")
    except ValueError as exc:
        return _fail(str(exc), 1)
    path = Path(args.manifest)
    if not path.is_file():
        return _fail(f"manifest not found: {path}", 2)
    out_lines = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            return _fail(f"line {lineno}: malformed record: {exc}", 2)
        if not isinstance(record, dict) or "boxes" not in record:
            return _fail(f"line {lineno}: record has no 'boxes' field", 2)
        try:
            record["boxes"] = [list(b) for b in convert_boxes(
                record["boxes"], src, dst)]
        except (ValueError, TypeError) as exc:
            return _fail(f"line {lineno}: {exc}", 2)
        out_lines.append(json.dumps(record))
    text = "".join(l + "\n" for l in out_lines)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        print(f"wrote {len(out_lines)} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelport",
        description="convert torch checkpoints and annotations into the "
                    "attribution toolkit's file formats")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("export", help="convert a Sequential checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("out")
    p.add_argument("--classes", required=True,
                   help="comma-separated class names, output order")
    p.add_argument("--input-shape", required=True,
                   help="model input, e.g. 1x64x64")
    p.add_argument("--mean", required=True,
                   help="per-channel preprocessing mean, comma-separated")
    p.add_argument("--std", required=True,
                   help="per-channel preprocessing std, comma-separated")
    p.add_argument("--resize", default=None,
                   help="preprocessing resize HxW (default: input H and W)")
    p.add_argument("--mapping", default=None,
                   help="JSON file of [module, kind] pairs pinning the "
                        "conversion")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("synth", help="generate a planted-patch dataset")
    p.add_argument("out")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("convert-boxes",
                       help="rescale manifest boxes into the input frame")
    p.add_argument("manifest")
    p.add_argument("--from", dest="src", required=True,
                   help="original frame WxH")
    p.add_argument("--to", dest="dst", required=True, help="target frame WxH")
    p.add_argument("--out", default="-",
                   help="output manifest path, '-' for stdout")
    p.set_defaults(fn=cmd_convert_boxes)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "fn", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
