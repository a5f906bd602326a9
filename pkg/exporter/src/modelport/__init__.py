"""modelport: checkpoint conversion and dataset tooling.

Bridges mainstream training ecosystems to the attribution toolkit's
portable formats: sequential torch checkpoints become manifest + blob
model directories, box annotations rescale into the model-input frame,
and seeded synthetic planted-patch datasets support end-to-end demos.
"""

from .boxes import convert_boxes
from .export import ExportError, ExportSpec, export_model
from .synth import make_synthetic_dataset

__all__ = ["ExportError", "ExportSpec", "convert_boxes", "export_model",
           "make_synthetic_dataset"]

__version__ = "0.1.0"
