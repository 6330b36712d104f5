"""K-means over generator feature maps: proxy masks and soft assignments.

Centroids are fit once (after GAN pretraining) and frozen; assign_soft is
the differentiable surrogate used by the mask-reconstruction loss, with
gradients flowing into the features only, never the centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import Tensor

from .errors import DegenerateDataError, DimensionError

# Fixed palette for exporting proxy masks as indexed-color PNGs.
# Cluster id k maps to PROXY_PALETTE[k % len(PROXY_PALETTE)].
PROXY_PALETTE: list[tuple[int, int, int]] = [
    (0, 0, 0), (230, 25, 75), (60, 180, 75), (255, 225, 25),
    (0, 130, 200), (245, 130, 48), (145, 30, 180), (70, 240, 240),
    (240, 50, 230), (210, 245, 60), (250, 190, 190), (0, 128, 128),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
    (255, 255, 255), (100, 100, 255), (255, 100, 100), (100, 255, 100),
    (200, 80, 160),
]


FEATURE_NORMS = ("none", "whiten", "instance")


@dataclass
class ClusterModel:
    """Frozen K-means centroids plus the softmax temperature.

    ``norm`` records the feature normalization the centroids were fit under;
    assign_hard/assign_soft apply the same transform before measuring
    distances, so fit and assignment always agree:

    - "none": raw features.
    - "whiten": per-channel (x - mean) / scale with statistics taken over the
      fit sample and stored in the model.
    - "instance": per-map, per-channel standardization over the spatial axes
      (statistics recomputed from each input, so no stored parameters).
    """

    centroids: np.ndarray          # [K, C]
    tau: float = 1.0
    fitted_on: int = 0
    norm: str = "none"
    feature_mean: np.ndarray | None = None   # [C], whiten only
    feature_scale: np.ndarray | None = None  # [C], whiten only
    _torch_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 2:
            raise DegenerateDataError("cluster model needs a [K>=2, C] centroid matrix")
        if not np.all(np.isfinite(self.centroids)):
            raise DegenerateDataError("centroids must be finite")
        if self.tau <= 0:
            raise DegenerateDataError("tau must be > 0")
        if self.norm not in FEATURE_NORMS:
            raise DegenerateDataError(f"unknown feature norm {self.norm!r}")
        if self.norm == "whiten":
            if self.feature_mean is None or self.feature_scale is None:
                raise DegenerateDataError("whiten model needs stored mean/scale")
            self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
            self.feature_scale = np.asarray(self.feature_scale, dtype=np.float64)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def centroids_tensor(self, dtype: torch.dtype) -> Tensor:
        key = str(dtype)
        if key not in self._torch_cache:
            self._torch_cache[key] = torch.from_numpy(self.centroids).to(dtype)
        return self._torch_cache[key]

    def transform(self, f: Tensor) -> Tensor:
        """Apply the model's feature normalization to a [C,H,W] map.

        Differentiable in f; per-pixel spatial permutations commute with
        both transforms (whiten is pointwise, instance statistics are
        permutation-invariant), so assign_* equivariance is preserved.
        """
        if self.norm == "none":
            return f
        if self.norm == "whiten":
            mean = torch.from_numpy(self.feature_mean).to(f.dtype).view(-1, 1, 1)
            scale = torch.from_numpy(self.feature_scale).to(f.dtype).view(-1, 1, 1)
            return (f - mean) / scale
        mean = f.mean(dim=(-2, -1), keepdim=True)
        var = f.var(dim=(-2, -1), unbiased=False, keepdim=True)
        return (f - mean) / torch.sqrt(var + 1e-8)


def _features_to_pixels(features) -> np.ndarray:
    """Stack [C,H,W] maps (or raw [N,C] matrices) into one [N, C] array."""
    rows = []
    for f in features:
        a = f.detach().cpu().numpy() if isinstance(f, Tensor) else np.asarray(f)
        if a.ndim == 3:
            rows.append(a.reshape(a.shape[0], -1).T)
        elif a.ndim == 2:
            rows.append(a)
        else:
            raise DimensionError(f"expected [C,H,W] or [N,C], got shape {a.shape}")
    return np.concatenate(rows, axis=0).astype(np.float64)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = x[rng.integers(n)]
            continue
        centroids[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int) -> tuple[np.ndarray, float]:
    """Lloyd iterations to assignment fixpoint.  Asserts the within-cluster
    sum of squares never increases."""
    k = centroids.shape[0]
    prev_labels = None
    prev_sse = np.inf
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        sse = d2[np.arange(x.shape[0]), labels].sum()
        assert sse <= prev_sse + 1e-9 * max(1.0, abs(prev_sse)), "Lloyd objective increased"
        prev_sse = sse
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels
        for j in range(k):
            members = x[labels == j]
            if len(members) == 0:
                # re-seed an empty cluster to the point farthest from its centroid
                far = d2[np.arange(x.shape[0]), labels].argmax()
                centroids[j] = x[far]
            else:
                centroids[j] = members.mean(axis=0)
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    sse = d2[np.arange(x.shape[0]), labels].sum()
    return centroids, float(sse)


def fit_clusters(features, k: int, seed: int = 0, tau: float = 1.0,
                 max_iter: int = 300, n_init: int = 8,
                 norm: str = "none") -> ClusterModel:
    """Lloyd's K-means with k-means++ init; best of ``n_init`` restarts.

    ``norm`` selects the feature normalization ("none", "whiten",
    "instance"); the fitted model stores it so assignments use the same
    transform.  Raises DegenerateDataError when there are fewer than ``k``
    distinct pixel vectors.
    """
    if norm not in FEATURE_NORMS:
        raise DegenerateDataError(f"unknown feature norm {norm!r}")
    feature_mean = feature_scale = None
    if norm == "instance":
        maps = []
        for f in features:
            t = f if isinstance(f, Tensor) else torch.as_tensor(f)
            if t.dim() != 3:
                raise DimensionError(
                    "instance norm needs [C,H,W] feature maps to fit on"
                )
            mean = t.mean(dim=(-2, -1), keepdim=True)
            var = t.var(dim=(-2, -1), unbiased=False, keepdim=True)
            maps.append((t - mean) / torch.sqrt(var + 1e-8))
        x = _features_to_pixels(maps)
    else:
        x = _features_to_pixels(features)
        if norm == "whiten":
            feature_mean = x.mean(axis=0)
            feature_scale = x.std(axis=0) + 1e-8
            x = (x - feature_mean) / feature_scale
    distinct = np.unique(x, axis=0)
    if distinct.shape[0] < k:
        raise DegenerateDataError(
            f"only {distinct.shape[0]} distinct pixel vectors for K={k}"
        )
    rng = np.random.default_rng(seed)
    best_c, best_sse = None, np.inf
    for _ in range(max(1, n_init)):
        init = _kmeans_pp_init(x, k, rng)
        c, sse = _lloyd(x, init.copy(), max_iter)
        if sse < best_sse:
            best_c, best_sse = c, sse
    return ClusterModel(centroids=best_c, tau=tau, fitted_on=x.shape[0],
                        norm=norm, feature_mean=feature_mean,
                        feature_scale=feature_scale)


def _pixel_sq_dists(f: Tensor, model: ClusterModel) -> Tensor:
    """Squared distances [K, H, W] from every pixel vector to every centroid."""
    if f.dim() != 3:
        raise DimensionError(f"expected [C,H,W] feature map, got shape {tuple(f.shape)}")
    c, h, w = f.shape
    if c != model.dim:
        raise DimensionError(f"feature channels {c} != centroid width {model.dim}")
    f = model.transform(f)
    pix = f.reshape(c, -1).T                                   # [HW, C]
    cen = model.centroids_tensor(f.dtype)                      # [K, C]
    d2 = (pix[:, None, :] - cen[None, :, :]).pow(2).sum(-1)    # [HW, K]
    return d2.T.reshape(model.k, h, w)


def assign_hard(f: Tensor, model: ClusterModel) -> Tensor:
    """Per-pixel nearest-centroid labels [H, W]; ties go to the lowest id."""
    with torch.no_grad():
        d2 = _pixel_sq_dists(f, model)
    # numpy argmin guarantees first-occurrence tie-breaking
    labels = d2.cpu().numpy().argmin(axis=0)
    return torch.from_numpy(labels).long()


def assign_soft(f: Tensor, model: ClusterModel) -> Tensor:
    """Per-pixel softmax over -d^2/tau, [K, H, W]; differentiable in f."""
    d2 = _pixel_sq_dists(f, model)
    return torch.softmax(-d2 / model.tau, dim=0)


def hflip(x: Tensor) -> Tensor:
    """Mirror along the width (last) axis; works for images, features, masks."""
    return torch.flip(x, dims=[-1])
