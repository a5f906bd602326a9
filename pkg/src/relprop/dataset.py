"""Dataset annotation manifests.

A manifest is UTF-8, line-delimited JSON; each record is
``{"image": "<path>", "label": "<class>", "boxes": [[x,y,w,h], ...]}``.
Boxes live in the model-input coordinate frame (post-resize), origin
top-left; producers rescale original-resolution annotations before
writing a manifest.  Relative image paths resolve against the manifest's
directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise DataError(f"box origin must be non-negative, got ({self.x},{self.y})")
        if self.w < 1 or self.h < 1:
            raise DataError(f"box extent must be at least 1, got {self.w}x{self.h}")

    def check_in_frame(self, height: int, width: int) -> None:
        if self.x + self.w > width or self.y + self.h > height:
            raise DataError(
                f"box ({self.x},{self.y},{self.w},{self.h}) exceeds the "
                f"{height}x{width} input frame")


@dataclass(frozen=True)
class Sample:
    image_path: str
    class_label: str
    boxes: tuple[BoundingBox, ...]


def _parse_box(raw, line_no: int) -> BoundingBox:
    if (not isinstance(raw, list) or len(raw) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw)):
        raise DataError(f"line {line_no}: box must be [x,y,w,h] integers, got {raw!r}")
    return BoundingBox(*raw)


def load_dataset_manifest(path: str | Path,
                          frame: tuple[int, int] | None = None) -> list[Sample]:
    """Parse a manifest into Samples, validating every record.

    ``frame`` is the model-input (H, W); when given, boxes falling outside
    it fail with the offending line number.  Box shape invariants (origin
    >= 0, extent >= 1) are checked unconditionally.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset manifest not found: {path}")
    base = path.parent
    samples: list[Sample] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: malformed record: {exc}") from None
        if not isinstance(record, dict):
            raise DataError(f"line {line_no}: expected a JSON object")
        try:
            image = record["image"]
            label = record["label"]
            raw_boxes = record["boxes"]
        except KeyError as exc:
            raise DataError(f"line {line_no}: missing field {exc}") from None
        if not isinstance(image, str) or not isinstance(label, str):
            raise DataError(f"line {line_no}: image and label must be strings")
        if not isinstance(raw_boxes, list):
            raise DataError(f"line {line_no}: boxes must be a list")
        try:
            boxes = tuple(_parse_box(b, line_no) for b in raw_boxes)
            if frame is not None:
                for box in boxes:
                    box.check_in_frame(*frame)
        except DataError as exc:
            msg = str(exc)
            raise DataError(msg if msg.startswith("line ")
                            else f"line {line_no}: {msg}") from None
        resolved = image if Path(image).is_absolute() else str(base / image)
        samples.append(Sample(resolved, label, boxes))
    return samples
