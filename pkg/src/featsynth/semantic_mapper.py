"""Bridging human conditions and proxy masks.

A one-shot SegNet (pointwise classifier over concatenated generator
features) turns generated samples into human-style segmentation masks, so
(condition, proxy-mask) training pairs can be minted without further
annotation.  The mapper is a small U-Net that converts any condition raster
into proxy-mask logits at the rearranger's resolution.

The module keeps a global audit counter of human-annotated rasters consumed;
the whole pipeline must consume exactly one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .cluster_proxy import ClusterModel, assign_hard
from .config import GanConfig, MapperConfig
from .errors import ConfigError, DimensionError
from .gan_core import GanCore, sample_latent

# audit: number of human-labeled rasters consumed by SegNet fitting
_ANNOTATIONS_CONSUMED = 0


def consumed_annotations() -> int:
    return _ANNOTATIONS_CONSUMED


def reset_annotation_audit() -> None:
    global _ANNOTATIONS_CONSUMED
    _ANNOTATIONS_CONSUMED = 0


@dataclass
class ConditionRaster:
    """Human-facing input: segmentation labels, scribble, or edge raster."""

    kind: str                  # segmentation | scribble | edge
    data: Tensor               # [H,W] long labels, or [H,W] float in [0,1]
    num_classes: int = 0       # L, for segmentation kind

    def __post_init__(self) -> None:
        if self.kind not in ("segmentation", "scribble", "edge"):
            raise ConfigError(f"unknown condition kind {self.kind!r}")
        if self.kind == "segmentation":
            if self.num_classes < 2:
                raise ConfigError("segmentation condition needs num_classes >= 2")
            if int(self.data.max()) >= self.num_classes or int(self.data.min()) < 0:
                raise DimensionError("segmentation labels out of range")
        else:
            if float(self.data.min()) < 0 or float(self.data.max()) > 1:
                raise DimensionError("scribble/edge values must lie in [0,1]")


def condition_channels(kind: str, num_classes: int) -> int:
    return num_classes if kind == "segmentation" else 1


def encode_condition(c: ConditionRaster) -> Tensor:
    """Condition -> float channel stack: one-hot for segmentation, else 1ch."""
    if c.kind == "segmentation":
        return F.one_hot(c.data.long(), c.num_classes).permute(2, 0, 1).float()
    return c.data.float()[None]


def build_feature_stack(gan: GanCore, w: Tensor) -> Tensor:
    """Concatenate G1 block outputs from 8^2 up to proxy_res, upsampled
    (nearest) to half the image resolution."""
    squeeze = w.dim() == 1
    if squeeze:
        w = w[None]
    r_s = gan.cfg.img_res // 2
    with torch.no_grad():
        _, stack = gan.g1(w, return_stack=True)
    parts = [
        F.interpolate(stack[res], size=(r_s, r_s), mode="nearest")
        for res in sorted(stack)
        if res >= 8
    ]
    out = torch.cat(parts, dim=1)
    return out[0] if squeeze else out


def feature_stack_channels(cfg: GanConfig) -> int:
    res, total = 8, 0
    while res <= cfg.proxy_res:
        total += cfg.widths[res]
        res *= 2
    return total


class SegNet(nn.Module):
    """Two pointwise layers: per-pixel classifier over stacked features."""

    def __init__(self, in_channels: int, num_classes: int, hidden: int = 64):
        super().__init__()
        self.num_classes = num_classes
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, hidden, 1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(hidden, num_classes, 1),
        )

    def forward(self, stack: Tensor) -> Tensor:
        return self.net(stack if stack.dim() == 4 else stack[None])


def segnet_fit(pairs: list[tuple[Tensor, ConditionRaster]], num_classes: int,
               hidden: int = 64, epochs: int = 400, lr: float = 0.01,
               seed: int = 0) -> SegNet:
    """Fit the per-pixel classifier on human-annotated (stack, mask) pairs.

    One pair is the standard one-shot setting; more pairs give the few-shot
    variants.  Every pair counts against the annotation audit.
    """
    global _ANNOTATIONS_CONSUMED
    if not pairs:
        raise ConfigError("segnet_fit needs at least one annotated pair")
    for _, cond in pairs:
        if cond.kind != "segmentation":
            raise ConfigError("segnet is fit on segmentation annotations")
        if cond.num_classes != num_classes:
            raise DimensionError(
                f"annotation has {cond.num_classes} classes, expected {num_classes}"
            )
    _ANNOTATIONS_CONSUMED += len(pairs)

    stacks = torch.stack([s for s, _ in pairs])
    r_s = stacks.shape[-1]
    targets = torch.stack([
        F.interpolate(c.data[None, None].float(), size=(r_s, r_s), mode="nearest")[0, 0].long()
        for _, c in pairs
    ])
    # inverse-frequency class weights: with a single annotated sample the
    # background dwarfs the shapes, and unweighted CE sacrifices their IoU
    counts = torch.bincount(targets.flatten(), minlength=num_classes).double()
    weight = torch.where(counts > 0, counts.sum() / (num_classes * counts.clamp(min=1)),
                         torch.ones_like(counts)).float()
    torch.manual_seed(seed)
    net = SegNet(stacks.shape[1], num_classes, hidden)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    for _ in range(epochs):
        opt.zero_grad()
        loss = F.cross_entropy(net(stacks), targets, weight=weight)
        loss.backward()
        opt.step()
    net.eval()
    return net


@torch.no_grad()
def segnet_predict(stack: Tensor, net: SegNet, img_res: int) -> ConditionRaster:
    """Per-pixel argmax over L logits, upsampled to image size.

    Logits are upsampled bilinearly before the argmax: the interpolation
    places class boundaries at sub-cell precision, which nearest-neighbor
    label upsampling cannot."""
    logits = net(stack if stack.dim() == 4 else stack[None])
    logits = F.interpolate(logits, size=(img_res, img_res),
                           mode="bilinear", align_corners=False)
    labels = logits.argmax(dim=1)
    return ConditionRaster(kind="segmentation", data=labels[0].long(),
                           num_classes=net.num_classes)


class _DownBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1)

    def forward(self, x):
        return F.leaky_relu(self.conv(x), 0.2)


class MapperUNet(nn.Module):
    """Encoder-decoder from a condition raster to K proxy logits at proxy_res.

    No noise input: the mapping is deterministic by design.
    """

    def __init__(self, in_channels: int, k: int, img_res: int, proxy_res: int,
                 width: int = 32):
        super().__init__()
        self.img_res, self.proxy_res = img_res, proxy_res
        self.in_channels = in_channels
        w = width
        self.stem = nn.Conv2d(in_channels, w, 3, padding=1)
        downs, chans, reses = [], [w], [img_res]
        res, ch = img_res, w
        # encode past the proxy resolution down to a 4x4 bottleneck so the
        # decoder sees mid-range layout, not just local patches
        while res > 4:
            out_ch = min(4 * w, ch * 2)
            downs.append(_DownBlock(ch, out_ch))
            ch = out_ch
            res //= 2
            chans.append(ch)
            reses.append(res)
        self.downs = nn.ModuleList(downs)
        # global context: image-wide average of the bottleneck, re-injected
        # as a per-channel bias so every output pixel sees the whole layout
        self.context = nn.Linear(ch, ch)
        ups, fuses = [], []
        while res < proxy_res:
            res *= 2
            skip_ch = chans[reses.index(res)]
            ups.append(nn.ConvTranspose2d(ch, 2 * w, 4, stride=2, padding=1))
            fuses.append(nn.Conv2d(2 * w + skip_ch, 2 * w, 3, padding=1))
            ch = 2 * w
        self.ups = nn.ModuleList(ups)
        self.fuses = nn.ModuleList(fuses)
        self.head = nn.Conv2d(ch, k, 1)
        self._skip_res = reses

    def forward(self, cond: Tensor) -> Tensor:
        squeeze = cond.dim() == 3
        if squeeze:
            cond = cond[None]
        if cond.shape[1] != self.in_channels or cond.shape[-1] != self.img_res:
            raise DimensionError(
                f"condition shape {tuple(cond.shape[1:])} incompatible with mapper "
                f"({self.in_channels} channels at {self.img_res})"
            )
        x = F.leaky_relu(self.stem(cond), 0.2)
        acts = {self.img_res: x}
        for d in self.downs:
            x = d(x)
            acts[x.shape[-1]] = x
        ctx = self.context(x.mean(dim=(2, 3)))
        x = x + ctx[:, :, None, None]
        for up, fuse in zip(self.ups, self.fuses):
            x = F.leaky_relu(up(x), 0.2)
            skip = acts[x.shape[-1]]
            x = F.leaky_relu(fuse(torch.cat([x, skip], dim=1)), 0.2)
        out = self.head(x)
        return out[0] if squeeze else out


def mapper_forward(c: ConditionRaster, mapper: MapperUNet,
                   expected_kind: str | None = None) -> Tensor:
    """Condition raster -> proxy logits [K, proxy_res, proxy_res]."""
    if expected_kind is not None and c.kind != expected_kind:
        raise ConfigError(f"mapper was trained on {expected_kind!r}, got {c.kind!r}")
    return mapper(encode_condition(c))


def scribble_from_labels(labels: Tensor) -> Tensor:
    """Morphological skeleton of the non-background regions, [H,W] in {0,1}."""
    from skimage.morphology import skeletonize

    arr = labels.cpu().numpy()
    out = np.zeros_like(arr, dtype=np.float32)
    for cls in np.unique(arr):
        if cls == 0:
            continue
        out += skeletonize(arr == cls).astype(np.float32)
    return torch.from_numpy(np.clip(out, 0, 1))


def edge_from_image(image: Tensor, threshold: float = 0.25) -> Tensor:
    """Gradient-magnitude threshold of an [-1,1] image, [H,W] in {0,1}."""
    gray = image.mean(dim=0)
    gx = torch.zeros_like(gray)
    gy = torch.zeros_like(gray)
    gx[:, 1:] = gray[:, 1:] - gray[:, :-1]
    gy[1:, :] = gray[1:, :] - gray[:-1, :]
    mag = torch.sqrt(gx ** 2 + gy ** 2)
    return (mag > threshold).float()


def make_condition(kind: str, image: Tensor, seg: ConditionRaster) -> ConditionRaster:
    """Derive the requested condition kind for a generated sample."""
    if kind == "segmentation":
        return seg
    if kind == "scribble":
        return ConditionRaster(kind="scribble", data=scribble_from_labels(seg.data))
    if kind == "edge":
        return ConditionRaster(kind="edge", data=edge_from_image(image))
    raise ConfigError(f"unknown condition kind {kind!r}")


def mint_pairs(gan: GanCore, cluster_model: ClusterModel, segnet: SegNet,
               n: int, seed: int = 0, kind: str = "segmentation",
               with_style: bool = False):
    """Generate (ConditionRaster, ProxyMask) pairs from random latents.

    Fully self-supervised: only the frozen SegNet carries annotation
    information.  With ``with_style`` the source style vector is returned
    too (the mapper's adversarial phase needs it).
    """
    pairs = []
    with torch.no_grad():
        for i in range(n):
            z = sample_latent(seed * 1_000_003 + i, gan.cfg.z_dim)
            w = gan.map_latent(z)
            f, stack = gan.generate_front(w, return_stack=True)
            proxy = assign_hard(f, cluster_model)
            r_s = gan.cfg.img_res // 2
            parts = [
                F.interpolate(stack[res][None], size=(r_s, r_s), mode="nearest")[0]
                for res in sorted(stack) if res >= 8
            ]
            seg = segnet_predict(torch.cat(parts, dim=0), segnet, gan.cfg.img_res)
            image = gan.generate_back(f) if kind == "edge" else None
            cond = make_condition(kind, image, seg)
            pairs.append((cond, proxy, w) if with_style else (cond, proxy))
    return pairs
