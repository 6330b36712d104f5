"""Evaluation metrics: mIoU, pixel accuracy, a Fréchet feature-statistics
distance over a fixed random conv embedder, and a group-diversity score.

The feature-statistics distance is a desk-scale stand-in for Inception FID:
embeddings come from an untrained, fixed-seed conv net, so only orderings
within this artifact are meaningful, never comparisons to published FID.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import torch
from torch import Tensor, nn

from .errors import DimensionError


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> np.ndarray:
    idx = num_classes * gt.reshape(-1) + pred.reshape(-1)
    counts = np.bincount(idx, minlength=num_classes ** 2)
    return counts.reshape(num_classes, num_classes)


def _as_np(x) -> np.ndarray:
    return x.detach().cpu().numpy() if isinstance(x, Tensor) else np.asarray(x)


def miou(pred, gt, num_classes: int) -> float:
    """Mean IoU over the classes present in gt or pred."""
    pred, gt = _as_np(pred), _as_np(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {gt.shape}")
    cm = confusion_matrix(pred, gt, num_classes)
    inter = np.diag(cm)
    union = cm.sum(axis=0) + cm.sum(axis=1) - inter
    present = union > 0
    return float((inter[present] / union[present]).mean())


def pixel_accuracy(pred, gt) -> float:
    pred, gt = _as_np(pred), _as_np(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {gt.shape}")
    return float((pred == gt).mean())


class _RandomEmbedder(nn.Module):
    """Untrained conv embedder with weights fixed by seed; 128-dim output."""

    def __init__(self, seed: int = 1234, out_dim: int = 128):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.convs = nn.ModuleList([
            nn.Conv2d(3, 32, 3, stride=2, padding=1),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.Conv2d(64, out_dim, 3, stride=2, padding=1),
        ])
        for c in self.convs:
            fan_in = c.in_channels * 9
            with torch.no_grad():
                c.weight.copy_(torch.randn(c.weight.shape, generator=g) / fan_in ** 0.5)
                c.bias.zero_()
        self.eval()

    @torch.no_grad()
    def forward(self, x: Tensor) -> Tensor:
        for c in self.convs:
            x = torch.relu(c(x))
        return x.mean(dim=(2, 3))


_EMBEDDER: _RandomEmbedder | None = None


def _embed(images: Tensor) -> np.ndarray:
    global _EMBEDDER
    if _EMBEDDER is None:
        _EMBEDDER = _RandomEmbedder()
    return _EMBEDDER(images.float()).numpy().astype(np.float64)


def frechet_gaussian_distance(mu_a, cov_a, mu_b, cov_b, eps: float = 1e-6) -> float:
    """||mu_a-mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^{1/2})."""
    cov_a = cov_a + eps * np.eye(cov_a.shape[0])
    cov_b = cov_b + eps * np.eye(cov_b.shape[0])
    covmean = scipy.linalg.sqrtm(cov_a @ cov_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2 * np.trace(covmean))


def feature_stats_distance(set_a: Tensor, set_b: Tensor) -> float:
    """Fréchet distance between Gaussian fits of embedded image sets.

    Inputs are [N,3,H,W] image batches in [-1,1], N >= 2 each.
    """
    if set_a.shape[0] < 2 or set_b.shape[0] < 2:
        raise DimensionError("feature_stats_distance needs >= 2 images per set")
    ea, eb = _embed(set_a), _embed(set_b)
    mu_a, mu_b = ea.mean(axis=0), eb.mean(axis=0)
    cov_a = np.cov(ea, rowvar=False)
    cov_b = np.cov(eb, rowvar=False)
    return max(0.0, frechet_gaussian_distance(mu_a, cov_a, mu_b, cov_b))


def group_diversity(groups: list[Tensor]) -> float:
    """Mean over group pairs of the per-pixel RMS-channel distance between
    corresponding images; 0 iff all groups are identical."""
    sizes = {g.shape[0] for g in groups}
    if len(sizes) != 1:
        raise DimensionError(f"groups must be equal-sized, got sizes {sorted(sizes)}")
    total, count = 0.0, 0
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            diff = (groups[i].double() - groups[j].double()) ** 2
            per_pixel = diff.mean(dim=1).sqrt()        # RMS over channels
            total += float(per_pixel.mean())
            count += 1
    return total / count if count else 0.0
