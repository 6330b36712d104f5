"""PNG <-> ConditionRaster helpers shared by the CLI and tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import PipelineConfig
from .errors import DimensionError
from .semantic_mapper import ConditionRaster


def load_condition_png(path: str | Path, kind: str, cfg: PipelineConfig) -> ConditionRaster:
    img = Image.open(path)
    r = cfg.gan.img_res
    if img.size != (r, r):
        raise DimensionError(f"mask is {img.size[0]}x{img.size[1]}, expected {r}x{r}")
    if kind == "segmentation":
        if img.mode != "P":
            img = img.convert("P")
        labels = np.asarray(img, dtype=np.int64)
        return ConditionRaster(kind="segmentation", data=torch.from_numpy(labels),
                               num_classes=cfg.mapper.seg_classes)
    gray = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    return ConditionRaster(kind=kind, data=torch.from_numpy(gray))
