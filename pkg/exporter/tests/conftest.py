"""Shared helpers: tiny torch nets and the attribution CLI as a subprocess.

The exporter's contract is the file formats plus the consumer's CLI, so
round-trip tests shell out to it rather than importing the library.
"""

import re
import subprocess
import sys

import numpy as np
import torch
from torch import nn

from modelport import ExportSpec, export_model

RELPROP = [sys.executable, "-m", "relprop.cli"]


def run_relprop(*args):
    return subprocess.run([*RELPROP, *map(str, args)],
                          capture_output=True, text=True)


def parse_fx(stdout: str) -> float:
    match = re.search(r"f\(x\) = (-?[0-9.]+(?:e-?\d+)?)", stdout)
    assert match, f"no f(x) line in output:\n{stdout}"
    return float(match.group(1))


def tiny_cnn(seed=0, hw=16):
    torch.manual_seed(seed)
    return nn.Sequential(
        nn.Conv2d(1, 3, 3, padding=1), nn.ReLU(),
        nn.MaxPool2d(2, 2),
        nn.Conv2d(3, 4, 3, padding=1), nn.ReLU(),
        nn.AdaptiveAvgPool2d(1), nn.Flatten(),
        nn.Linear(4, 2),
    )


def export_net(net, tmp_path, *, hw=16, classes=("normal", "lesion"),
               mean=(0.5,), std=(0.5,), name="exported", mapping=None):
    ckpt = tmp_path / "net.pt"
    torch.save(net, ckpt)
    spec = ExportSpec(source_checkpoint=ckpt, input_shape=(1, hw, hw),
                      class_names=list(classes), mean=list(mean),
                      std=list(std), layer_mapping=mapping)
    return export_model(spec, tmp_path / name)


def torch_logits(net, img_u8, mean=0.5, std=0.5):
    """Forward the standardized image exactly as the consumer will see it."""
    x = (img_u8.astype(np.float32) / 255.0 - mean) / std
    with torch.no_grad():
        out = net(torch.from_numpy(x[None, None]).float())
    return out.numpy().ravel()
