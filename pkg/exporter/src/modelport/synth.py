"""Synthetic planted-patch datasets in the evaluation manifest format."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

FRAME = 64
PATCH = 8
_BG_MAX = 96     # background noise stays below
_PATCH_MIN = 192  # patch pixels start above, so the patch holds the max


def make_synthetic_dataset(n: int, seed: int, out_dir: str | Path) -> Path:
    """Write n grayscale 64x64 PGMs plus dataset.jsonl; returns the manifest.

    The first ceil(n/2) samples carry a bright 8x8 patch at a seeded
    random location (label "lesion", box equal to the patch); the rest
    are background noise only (label "normal", empty box list).  The
    same (n, seed) pair reproduces every file byte for byte.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)

    n_lesion = (n + 1) // 2
    records = []
    for i in range(n):
        img = rng.integers(0, _BG_MAX, size=(FRAME, FRAME), dtype=np.uint8)
        if i < n_lesion:
            x = int(rng.integers(0, FRAME - PATCH + 1))
            y = int(rng.integers(0, FRAME - PATCH + 1))
            img[y:y + PATCH, x:x + PATCH] = rng.integers(
                _PATCH_MIN, 256, size=(PATCH, PATCH), dtype=np.uint8)
            name = f"lesion_{i:02d}.pgm"
            record = {"image": f"images/{name}", "label": "lesion",
                      "boxes": [[x, y, PATCH, PATCH]]}
        else:
            name = f"normal_{i - n_lesion:02d}.pgm"
            record = {"image": f"images/{name}", "label": "normal",
                      "boxes": []}
        Image.fromarray(img, mode="L").save(out / "images" / name)
        records.append(record)

    manifest = out / "dataset.jsonl"
    manifest.write_text("".join(json.dumps(r) + "\n" for r in records))
    return manifest
