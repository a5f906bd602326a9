"""Heatmap post-processing, thresholded IOU, and dataset-level aggregation.

The localization protocol: channel-sum the input relevance, clamp negative
values to zero, normalize by the per-image max, binarize at each threshold
T with strict >, and score the mask against the union of the sample's
boxes by IOU.  Means are reported per (method, class, threshold) cell.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .attribution import Method, cam_heatmap, lrp_backward, rap_backward
from .dataset import BoundingBox, Sample
from .errors import UsageError
from .forward import forward
from .images import load_image
from .model import ModelGraph
from .tensor import DTYPE


@dataclass
class Heatmap:
    """Normalized [H,W] float32 map in [0,1]; max is 1 unless all-zero."""

    values: np.ndarray
    source_method: Method | None = None


@dataclass(frozen=True)
class EvalCell:
    mean_iou: float
    n_samples: int


@dataclass
class EvalReport:
    entries: dict[tuple[str, str, float], EvalCell]
    thresholds: list[float]
    methods: list[str]
    classes: list[str]
    n_skipped_no_boxes: int = 0
    failures: list[str] = field(default_factory=list)


def postprocess_relevance(relevance: np.ndarray,
                          method: Method | None = None) -> Heatmap:
    """Channel-sum, clamp negatives, divide by max (when positive)."""
    vals = np.asarray(relevance, dtype=np.float64)
    if vals.ndim == 3:
        vals = vals.sum(axis=0)
    if vals.ndim != 2:
        raise ValueError(f"expected [C,H,W] or [H,W] relevance, got {vals.shape}")
    vals = np.maximum(vals, 0.0)
    mx = vals.max() if vals.size else 0.0
    if mx > 0.0:
        vals = vals / mx
    return Heatmap(vals.astype(DTYPE), method)


def binarize(heatmap: Heatmap, threshold: float) -> np.ndarray:
    """Boolean mask of pixels strictly above the threshold; T in [0,1)."""
    if not 0.0 <= threshold < 1.0:
        raise UsageError(f"threshold must lie in [0,1), got {threshold}")
    return heatmap.values > threshold


def rasterize_boxes(boxes, height: int, width: int) -> np.ndarray:
    """Union of boxes as a boolean [H,W] mask."""
    region = np.zeros((height, width), dtype=bool)
    for box in boxes:
        region[box.y:box.y + box.h, box.x:box.x + box.w] = True
    return region


def iou(mask: np.ndarray, boxes: list[BoundingBox]) -> float:
    """|mask AND box-union| / |mask OR box-union|.  Empty union -> 0."""
    if not boxes:
        raise ValueError("iou requires at least one box")
    region = rasterize_boxes(boxes, mask.shape[0], mask.shape[1])
    inter = int(np.count_nonzero(mask & region))
    union = int(np.count_nonzero(mask | region))
    return inter / union if union else 0.0


def _decompose(model: ModelGraph, trace, target: int, method: str,
               alpha: float, beta: float) -> np.ndarray:
    if method == Method.LRP.value:
        return lrp_backward(model, trace, target, alpha, beta).input_relevance
    if method == Method.RAP.value:
        return rap_backward(model, trace, target).input_relevance
    if method == Method.CAM.value:
        return cam_heatmap(model, trace, target)
    raise UsageError(f"unknown method '{method}'")


def _eval_one(model: ModelGraph, sample: Sample, methods: list[str],
              thresholds: list[float], target_mode: str,
              alpha: float, beta: float) -> dict[tuple[str, float], float]:
    x = load_image(sample.image_path, model.preprocessing, model.input_shape[0])
    _, trace = forward(model, x)
    if target_mode == "predicted":
        target = int(np.argmax(trace.output))
    else:
        target = model.class_index(sample.class_label)
    scores: dict[tuple[str, float], float] = {}
    for method in methods:
        heat = postprocess_relevance(
            _decompose(model, trace, target, method, alpha, beta))
        for t in thresholds:
            scores[(method, t)] = iou(binarize(heat, t), list(sample.boxes))
    return scores


def evaluate_dataset(model: ModelGraph, samples: list[Sample],
                     methods: list[str], thresholds: list[float], *,
                     jobs: int | None = None, target_mode: str = "label",
                     alpha: float = 1.0, beta: float = 0.0) -> EvalReport:
    """Score every boxed sample and average per (method, class, threshold).

    Samples without boxes are skipped and counted; per-sample failures are
    recorded in the report and excluded from the means.  Aggregation runs
    in manifest order regardless of worker count, so the report is
    deterministic for any ``jobs`` value.
    """
    for t in thresholds:
        if not 0.0 <= t < 1.0:
            raise UsageError(f"threshold must lie in [0,1), got {t}")
    if target_mode not in ("label", "predicted"):
        raise UsageError(f"target must be 'label' or 'predicted', got '{target_mode}'")
    boxed = [(i, s) for i, s in enumerate(samples) if s.boxes]
    n_skipped = len(samples) - len(boxed)

    results: dict[int, dict | Exception] = {}

    def run(idx_sample):
        i, sample = idx_sample
        try:
            return i, _eval_one(model, sample, methods, thresholds,
                                target_mode, alpha, beta)
        except Exception as exc:
            return i, exc

    workers = jobs if jobs and jobs > 0 else (os.cpu_count() or 1)
    if workers == 1 or len(boxed) <= 1:
        for item in boxed:
            i, out = run(item)
            results[i] = out
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, out in pool.map(run, boxed):
                results[i] = out

    sums: dict[tuple[str, str, float], float] = {}
    counts: dict[tuple[str, str, float], int] = {}
    classes: list[str] = []
    failures: list[str] = []
    for i, sample in boxed:
        out = results[i]
        if isinstance(out, Exception):
            failures.append(f"{sample.image_path}: {out}")
            continue
        if sample.class_label not in classes:
            classes.append(sample.class_label)
        for (method, t), score in out.items():
            key = (method, sample.class_label, t)
            sums[key] = sums.get(key, 0.0) + score
            counts[key] = counts.get(key, 0) + 1
    entries = {key: EvalCell(sums[key] / counts[key], counts[key])
               for key in sums}
    return EvalReport(entries, list(thresholds), list(methods), classes,
                      n_skipped, failures)


def report_to_csv(report: EvalReport) -> str:
    """Machine-readable report: method,class,threshold,mean_iou,n_samples."""
    lines = ["method,class,threshold,mean_iou,n_samples"]
    for method in report.methods:
        for cls in sorted(report.classes):
            for t in report.thresholds:
                cell = report.entries.get((method, cls, t))
                if cell is not None:
                    lines.append(f"{method},{cls},{t:g},{cell.mean_iou:.6f},"
                                 f"{cell.n_samples}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(report_to_csv(report), encoding="utf-8")


def summary_grid(report: EvalReport) -> str:
    """method x threshold table of class-averaged mean IOU."""
    header = "method  " + "".join(f"  T={t:<6g}" for t in report.thresholds)
    lines = [header]
    for method in report.methods:
        cells = []
        for t in report.thresholds:
            vals = [report.entries[(method, c, t)].mean_iou
                    for c in report.classes if (method, c, t) in report.entries]
            cells.append(f"  {np.mean(vals):8.4f}" if vals else "       -")
        lines.append(f"{method:<8}" + "".join(cells))
    return "\n".join(lines)


def _colorize(values: np.ndarray) -> np.ndarray:
    """Blue (0) to red (1) linear color scale, uint8 [H,W,3]."""
    v = np.clip(values.astype(np.float64), 0.0, 1.0)
    rgb = np.stack([v * 255.0, np.zeros_like(v), (1.0 - v) * 255.0], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def render_heatmap(heatmap: Heatmap, base_image: np.ndarray | None,
                   out_path: str | Path) -> None:
    """Write the heatmap as PNG; blend over base_image when given.

    base_image is uint8 (or float in [0,255]) with shape [H,W] or [H,W,3]
    matching the heatmap frame.  Overlay weight is 0.6 heatmap, 0.4 image.
    Identical inputs produce byte-identical files.
    """
    colored = _colorize(heatmap.values).astype(np.float64)
    if base_image is not None:
        base = np.asarray(base_image, dtype=np.float64)
        if base.ndim == 2:
            base = np.stack([base] * 3, axis=-1)
        if base.shape != colored.shape:
            raise ValueError(
                f"base image shape {base.shape} does not match heatmap "
                f"{colored.shape}")
        colored = 0.6 * colored + 0.4 * base
    out = np.rint(np.clip(colored, 0.0, 255.0)).astype(np.uint8)
    Image.fromarray(out, mode="RGB").save(Path(out_path), format="PNG")
