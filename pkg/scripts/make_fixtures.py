#!/usr/bin/env python3
"""Regenerate the committed fixtures: planted-patch model + annotated images.

The model is a hand-constructed bright-patch detector with a CAM-compatible
tail (Conv -> ReLU -> GlobalAvgPool -> Dense, bias-free):

  channel 0: 8x8 box average   (fires inside a bright patch)
  channel 1: left/right contrast
  channel 2: top/bottom contrast
  channel 3: checkerboard contrast

The classifier mixes a dominant detector weight with small contrast
weights, so the class activation map spreads over the low-resolution
feature grid while input-pixel relevance concentrates on the patch itself.

Images are 64x64 PGM: uniform dark noise, half with a bright 8x8 patch at
a seeded random location (label "lesion", the patch is the box), half
without (label "normal", no boxes).

Run from the repo root; rewrites fixtures/ in place and prints the
localization report the acceptance tests rely on.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from relprop import (LayerDescriptor, ModelGraph, Preprocessing,
                     evaluate_dataset, load_dataset_manifest, load_model,
                     save_model)

SIZE = 64
PATCH = 8


def build_model() -> ModelGraph:
    k = PATCH
    det = np.full((k, k), 1.0 / (k * k), dtype=np.float32)
    lr = np.zeros((k, k), dtype=np.float32)
    lr[:, :k // 2] = 1.0 / (k * k)
    lr[:, k // 2:] = -1.0 / (k * k)
    tb = lr.T.copy()
    checker = np.fromfunction(lambda y, x: ((y + x) % 2) * 2.0 - 1.0, (k, k))
    checker = (checker / (k * k)).astype(np.float32)
    conv_w = np.stack([det, lr, tb, checker])[:, None, :, :]
    dense_w = np.array([[-1.0, 0.08, 0.08, 0.08],
                        [1.0, 0.08, 0.08, 0.08]], dtype=np.float32)
    layers = [
        LayerDescriptor("Conv2D", {"in_ch": 1, "out_ch": 4, "kernel_h": k,
                                   "kernel_w": k, "stride": 4, "padding": 0,
                                   "has_bias": False}),
        LayerDescriptor("ReLU"),
        LayerDescriptor("GlobalAvgPool"),
        LayerDescriptor("Dense", {"in_features": 4, "out_features": 2,
                                  "has_bias": False}),
    ]
    return ModelGraph(layers, [conv_w, None, None, dense_w], [None] * 4,
                      (1, SIZE, SIZE), ["normal", "lesion"],
                      Preprocessing((0.12,), (0.5,), (SIZE, SIZE)))


def make_images(out_dir: Path, n: int, seed: int):
    rng = np.random.default_rng(seed)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n):
        img = rng.integers(5, 31, (SIZE, SIZE), dtype=np.uint8)
        if i % 2 == 0:
            x0, y0 = (int(v) for v in rng.integers(0, SIZE - PATCH + 1, 2))
            img[y0:y0 + PATCH, x0:x0 + PATCH] = rng.integers(
                220, 256, (PATCH, PATCH), dtype=np.uint8)
            name = f"lesion_{i // 2:02d}.pgm"
            records.append({"image": f"images/{name}", "label": "lesion",
                            "boxes": [[x0, y0, PATCH, PATCH]]})
        else:
            name = f"normal_{i // 2:02d}.pgm"
            records.append({"image": f"images/{name}", "label": "normal",
                            "boxes": []})
        Image.fromarray(img, mode="L").save(img_dir / name)
    manifest = out_dir / "dataset.jsonl"
    manifest.write_text(
        "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return manifest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="fixtures")
    parser.add_argument("--n", type=int, default=16)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out_dir = Path(args.out)
    model_dir = out_dir / "planted_patch_model"
    save_model(build_model(), model_dir)
    manifest = make_images(out_dir, args.n, args.seed)
    print(f"wrote {model_dir} and {manifest}")

    model = load_model(model_dir)
    samples = load_dataset_manifest(manifest, frame=(SIZE, SIZE))
    thresholds = [0.1, 0.2, 0.3, 0.4, 0.5]
    report = evaluate_dataset(model, samples, ["lrp", "rap", "cam"],
                              thresholds, jobs=1)
    print(f"{'method':<8}" + "".join(f"  T={t:<6g}" for t in thresholds))
    for method in ("lrp", "rap", "cam"):
        row = [report.entries[(method, "lesion", t)].mean_iou
               for t in thresholds]
        print(f"{method:<8}" + "".join(f"  {v:8.4f}" for v in row))
    lrp3 = report.entries[("lrp", "lesion", 0.3)].mean_iou
    rap3 = report.entries[("rap", "lesion", 0.3)].mean_iou
    cam1 = report.entries[("cam", "lesion", 0.1)].mean_iou
    lrp1 = report.entries[("lrp", "lesion", 0.1)].mean_iou
    rap1 = report.entries[("rap", "lesion", 0.1)].mean_iou
    print(f"lrp@0.3={lrp3:.4f} rap@0.3={rap3:.4f} (need >= 0.5)")
    print(f"cam@0.1={cam1:.4f} vs lrp@0.1={lrp1:.4f}, rap@0.1={rap1:.4f} "
          f"(need cam strictly lower)")
    ok = lrp3 >= 0.5 and rap3 >= 0.5 and cam1 < lrp1 and cam1 < rap1
    print("margins OK" if ok else "MARGINS VIOLATED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
