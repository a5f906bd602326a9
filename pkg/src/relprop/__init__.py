"""Relevance attribution for feed-forward and convolutional classifiers.

Loads models from a portable manifest format, runs a recorded forward
pass, decomposes logits into input-pixel relevance (LRP-alpha/beta, RAP,
CAM), and evaluates localization against bounding boxes via thresholded
mean IOU.
"""

from .attribution import (ConservationReport, Method, RelevanceMap,
                          cam_heatmap, conservation_report, lrp_backward,
                          rap_backward, rap_layer_backward,
                          rap_normalize_penultimate, rap_uniform_shift)
from .dataset import BoundingBox, Sample, load_dataset_manifest
from .errors import (DataError, ModelFormatError, NumericalError,
                     RelpropError, UsageError)
from .evaluation import (EvalCell, EvalReport, Heatmap, binarize,
                         evaluate_dataset, iou, postprocess_relevance,
                         rasterize_boxes, render_heatmap, report_to_csv,
                         summary_grid, write_report)
from .forward import ActivationTrace, forward, predict
from .images import load_image, load_image_raw, preprocess_image
from .model import (LayerDescriptor, ModelGraph, Preprocessing, load_model,
                    save_model, summarize)

__version__ = "0.1.0"

__all__ = [
    "ActivationTrace", "BoundingBox", "ConservationReport", "DataError",
    "EvalCell", "EvalReport", "Heatmap", "LayerDescriptor", "Method",
    "ModelFormatError", "ModelGraph", "NumericalError", "Preprocessing",
    "RelevanceMap", "RelpropError", "Sample", "UsageError", "binarize",
    "cam_heatmap", "conservation_report", "evaluate_dataset", "forward",
    "iou", "load_dataset_manifest", "load_image", "load_image_raw",
    "load_model", "lrp_backward", "postprocess_relevance", "predict",
    "preprocess_image", "rap_backward", "rap_layer_backward",
    "rap_normalize_penultimate", "rap_uniform_shift", "rasterize_boxes",
    "render_heatmap", "report_to_csv", "save_model", "summarize",
    "summary_grid", "write_report",
]
