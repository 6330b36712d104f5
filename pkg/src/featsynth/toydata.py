"""Procedural toy dataset: layered geometric shapes with exact ground truth.

Each scene contains 1-3 shapes (circle, rectangle, triangle) on a colored
background.  Images get anti-aliased edges via 4x supersampling; masks are
hard labels from an analytic coverage test at pixel centers, so the ground
truth is exact by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch import Tensor

from .errors import FeatsynthError

log = logging.getLogger(__name__)

# class ids: 0 background, 1 circle, 2 rectangle, 3 triangle
NUM_CLASSES = 4
CLASS_NAMES = ["background", "circle", "rectangle", "triangle"]

# base RGB per class, jittered per scene (values in [0,1])
CLASS_PALETTE = np.array([
    [0.15, 0.18, 0.22],   # background: dark slate
    [0.85, 0.25, 0.25],   # circle: red
    [0.25, 0.65, 0.30],   # rectangle: green
    [0.95, 0.80, 0.25],   # triangle: yellow
])

# palette for exporting gt/condition masks as indexed PNG
SEG_PALETTE: list[tuple[int, int, int]] = [
    (40, 40, 60), (220, 60, 60), (60, 170, 80), (240, 200, 60),
]

_SUPERSAMPLE = 4


@dataclass
class ShapeParams:
    kind: str                 # circle | rectangle | triangle
    cx: float                 # center, in [0,1] image coordinates
    cy: float
    size: float               # radius / half-extent, in [0,1] units
    aspect: float             # rectangle aspect; triangle orientation scale
    angle: float              # rotation, radians
    color: np.ndarray         # RGB in [0,1]


@dataclass
class ToyScene:
    image: Tensor             # [3,H,W] in [-1,1]
    gt_mask: Tensor           # [H,W] long, values < NUM_CLASSES
    params: list[ShapeParams] = field(default_factory=list)
    seed: int = 0


def _coverage(shape: ShapeParams, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Boolean inside-test for a grid of points in [0,1]^2 coordinates."""
    dx, dy = xs - shape.cx, ys - shape.cy
    ca, sa = np.cos(shape.angle), np.sin(shape.angle)
    u = ca * dx + sa * dy
    v = -sa * dx + ca * dy
    if shape.kind == "circle":
        return u * u + v * v <= shape.size ** 2
    if shape.kind == "rectangle":
        return (np.abs(u) <= shape.size) & (np.abs(v) <= shape.size * shape.aspect)
    if shape.kind == "triangle":
        # isoceles triangle pointing +v, half-height size
        h = shape.size
        inside = (v >= -h) & (v <= h)
        half_width = shape.size * shape.aspect * (h - v) / (2 * h)
        return inside & (np.abs(u) <= half_width)
    raise FeatsynthError(f"unknown shape kind {shape.kind!r}")


_KIND_CLASS = {"circle": 1, "rectangle": 2, "triangle": 3}


def render_scene(shapes: list[ShapeParams], bg_color: np.ndarray,
                 img_res: int, seed: int = 0) -> ToyScene:
    """Rasterize shapes back-to-front; later shapes are on top."""
    ss = _SUPERSAMPLE
    n = img_res * ss
    grid = (np.arange(n) + 0.5) / n
    xs_hi, ys_hi = np.meshgrid(grid, grid)          # ys rows, xs cols
    img = np.ones((n, n, 3)) * bg_color[None, None, :]

    centers = (np.arange(img_res) + 0.5) / img_res
    xs_lo, ys_lo = np.meshgrid(centers, centers)
    mask = np.zeros((img_res, img_res), dtype=np.int64)

    for shape in shapes:
        cov_hi = _coverage(shape, xs_hi, ys_hi)
        img[cov_hi] = shape.color
        cov_lo = _coverage(shape, xs_lo, ys_lo)
        mask[cov_lo] = _KIND_CLASS[shape.kind]

    # box-filter downsample for anti-aliasing
    img = img.reshape(img_res, ss, img_res, ss, 3).mean(axis=(1, 3))
    image = torch.from_numpy((img * 2.0 - 1.0).transpose(2, 0, 1)).float()
    return ToyScene(image=image, gt_mask=torch.from_numpy(mask),
                    params=list(shapes), seed=seed)


def gen_scene(seed: int, img_res: int = 64) -> ToyScene:
    """Deterministic random scene with 1-3 shapes."""
    rng = np.random.default_rng(seed)
    n_shapes = int(rng.integers(1, 4))
    shapes = []
    for _ in range(n_shapes):
        kind = ["circle", "rectangle", "triangle"][int(rng.integers(3))]
        base = CLASS_PALETTE[_KIND_CLASS[kind]]
        color = np.clip(base + rng.uniform(-0.12, 0.12, size=3), 0.0, 1.0)
        shapes.append(ShapeParams(
            kind=kind,
            cx=float(rng.uniform(0.25, 0.75)),
            cy=float(rng.uniform(0.25, 0.75)),
            size=float(rng.uniform(0.12, 0.28)),
            aspect=float(rng.uniform(0.6, 1.4)),
            angle=float(rng.uniform(0, 2 * np.pi)),
            color=color,
        ))
    bg = np.clip(CLASS_PALETTE[0] + rng.uniform(-0.08, 0.08, size=3), 0.0, 1.0)
    return render_scene(shapes, bg, img_res, seed=seed)


def make_dataset(n: int, seed: int, img_res: int = 64) -> list[ToyScene]:
    """n scenes with per-scene seeds derived from the dataset seed."""
    return [gen_scene(seed * 1_000_003 + i, img_res) for i in range(n)]


def annotate_by_palette(image: Tensor) -> Tensor:
    """Stand-in for the single human annotator: label each pixel with the
    class whose palette color is nearest.  Used exactly once per pipeline;
    the caller must count it against the annotation audit."""
    rgb = ((image.clamp(-1, 1) + 1) / 2).numpy().transpose(1, 2, 0)    # [H,W,3]
    d2 = ((rgb[:, :, None, :] - CLASS_PALETTE[None, None, :, :]) ** 2).sum(axis=-1)
    return torch.from_numpy(d2.argmin(axis=-1).astype(np.int64))


def image_to_pil(image: Tensor) -> Image.Image:
    arr = ((image.clamp(-1, 1) + 1) * 127.5).round().byte().numpy().transpose(1, 2, 0)
    return Image.fromarray(arr)


def pil_to_image(img: Image.Image) -> Tensor:
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr.transpose(2, 0, 1) * 2.0 - 1.0)


def mask_to_indexed_png(mask: Tensor | np.ndarray, palette: list[tuple[int, int, int]]) -> Image.Image:
    arr = mask.numpy() if isinstance(mask, Tensor) else np.asarray(mask)
    img = Image.fromarray(arr.astype(np.uint8), mode="P")
    flat = [c for rgb in palette for c in rgb]
    img.putpalette(flat + [0] * (768 - len(flat)))
    return img


def indexed_png_to_mask(img: Image.Image) -> Tensor:
    if img.mode != "P":
        img = img.convert("P")
    return torch.from_numpy(np.asarray(img, dtype=np.int64))


def ingest_folder(path: str | Path, img_res: int = 64) -> list[Tensor]:
    """Load a folder of images: center-crop, resize, normalize to [-1,1].

    Unreadable files are skipped with a warning; an empty result is an error.
    """
    path = Path(path)
    if not path.is_dir():
        raise FeatsynthError(f"not a directory: {path}")
    tensors = []
    for p in sorted(path.iterdir()):
        if not p.is_file():
            continue
        try:
            img = Image.open(p).convert("RGB")
        except Exception as e:  # noqa: BLE001 - any decode failure is a skip
            log.warning("skipping unreadable file %s: %s", p, e)
            continue
        side = min(img.size)
        left = (img.width - side) // 2
        top = (img.height - side) // 2
        img = img.crop((left, top, left + side, top + side)).resize(
            (img_res, img_res), Image.BILINEAR
        )
        tensors.append(pil_to_image(img))
    if not tensors:
        raise FeatsynthError(f"no readable images in {path}")
    return tensors
