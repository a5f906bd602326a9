"""Rescale bounding-box annotations into a model-input frame.

Annotations usually live at the source image resolution while the model
sees a resized input.  The rescale floors the origin and ceils the
extent, biasing toward slightly larger boxes: truncating annotated area
is the one error this tool must never make.
"""

from __future__ import annotations

import math

Box = tuple[int, int, int, int]


def convert_boxes(boxes, original_size, target_size) -> list[Box]:
    """Rescale [x, y, w, h] boxes from original_size to target_size.

    Sizes are (width, height).  Results are clamped to the target frame;
    a box that collapses below one pixel in either direction (possible
    only when it lies outside the original frame) raises ValueError.
    """
    ow, oh = (int(v) for v in original_size)
    tw, th = (int(v) for v in target_size)
    if min(ow, oh, tw, th) < 1:
        raise ValueError(f"sizes must be positive, got {original_size} -> "
                         f"{target_size}")
    sx, sy = tw / ow, th / oh
    out: list[Box] = []
    for i, box in enumerate(boxes):
        x, y, w, h = box
        if w <= 0 or h <= 0:
            raise ValueError(f"box {i} ({x},{y},{w},{h}): non-positive extent")
        x0 = max(math.floor(x * sx), 0)
        y0 = max(math.floor(y * sy), 0)
        x1 = min(math.ceil((x + w) * sx), tw)
        y1 = min(math.ceil((y + h) * sy), th)
        nw, nh = x1 - x0, y1 - y0
        if nw < 1 or nh < 1:
            raise ValueError(
                f"box {i} ({x},{y},{w},{h}) collapses to {nw}x{nh} in the "
                f"{tw}x{th} frame")
        out.append((x0, y0, nw, nh))
    return out
