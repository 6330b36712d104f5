"""Style-modulated toy generator/discriminator with an explicit G1/G2 split.

The generator is deliberately small: a mapping MLP, style-modulated conv
blocks with nearest upsampling up to the proxy resolution (G1), and plain
conv blocks from there to the image (G2).  No per-layer noise injection, so
every forward pass is deterministic given (weights, input).  G2 takes only
the feature maps, which is what lets rearranged features fully determine
the synthesized image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .config import GanConfig
from .errors import DimensionError


@dataclass
class LatentCode:
    """A z vector plus the seed that produced it."""

    values: Tensor
    seed: int


def sample_latent(seed: int, z_dim: int = 64) -> LatentCode:
    """Standard-normal latent, fully determined by the seed."""
    g = torch.Generator().manual_seed(int(seed))
    return LatentCode(values=torch.randn(z_dim, generator=g), seed=int(seed))


def _init_linear(layer: nn.Linear) -> None:
    fan_in = layer.in_features
    nn.init.normal_(layer.weight, std=1.0 / math.sqrt(fan_in))
    if layer.bias is not None:
        nn.init.zeros_(layer.bias)


def _init_conv(layer: nn.Conv2d) -> None:
    fan_in = layer.in_channels * layer.kernel_size[0] * layer.kernel_size[1]
    nn.init.normal_(layer.weight, std=1.0 / math.sqrt(fan_in))
    if layer.bias is not None:
        nn.init.zeros_(layer.bias)


class MappingNetwork(nn.Module):
    """z -> w MLP."""

    def __init__(self, z_dim: int, w_dim: int, depth: int = 4):
        super().__init__()
        self.z_dim = z_dim
        dims = [z_dim] + [w_dim] * depth
        layers: list[nn.Module] = []
        for i in range(depth):
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            if i < depth - 1:
                layers.append(nn.LeakyReLU(0.2))
        self.net = nn.Sequential(*layers)
        for m in self.net:
            if isinstance(m, nn.Linear):
                _init_linear(m)

    def forward(self, z: Tensor) -> Tensor:
        if z.shape[-1] != self.z_dim:
            raise DimensionError(f"latent length {z.shape[-1]} != configured {self.z_dim}")
        return self.net(z)


class ModulatedConv2d(nn.Module):
    """StyleGAN2-style weight modulation + demodulation, 3x3."""

    def __init__(self, in_ch: int, out_ch: int, w_dim: int, demodulate: bool = True):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, 3, 3) / math.sqrt(in_ch * 9))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.affine = nn.Linear(w_dim, in_ch)
        _init_linear(self.affine)
        nn.init.ones_(self.affine.bias)
        self.demodulate = demodulate

    def forward(self, x: Tensor, w: Tensor) -> Tensor:
        b, in_ch, h, wd = x.shape
        style = self.affine(w)                                   # [B, in]
        weight = self.weight[None] * style[:, None, :, None, None]  # [B, out, in, 3, 3]
        if self.demodulate:
            denom = torch.rsqrt(weight.pow(2).sum(dim=(2, 3, 4)) + 1e-8)
            weight = weight * denom[:, :, None, None, None]
        out_ch = weight.shape[1]
        x = x.reshape(1, b * in_ch, h, wd)
        weight = weight.reshape(b * out_ch, in_ch, 3, 3)
        out = F.conv2d(x, weight, padding=1, groups=b)
        out = out.reshape(b, out_ch, h, wd) + self.bias[None, :, None, None]
        return out


class FrontBlock(nn.Module):
    """Optional 2x nearest upsample followed by one modulated conv + LReLU."""

    def __init__(self, in_ch: int, out_ch: int, w_dim: int, upsample: bool):
        super().__init__()
        self.upsample = upsample
        self.conv = ModulatedConv2d(in_ch, out_ch, w_dim)

    def forward(self, x: Tensor, w: Tensor) -> Tensor:
        if self.upsample:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
        return F.leaky_relu(self.conv(x, w), 0.2)


class GeneratorFront(nn.Module):
    """G1: learned constant -> modulated blocks -> feature maps at proxy_res."""

    def __init__(self, cfg: GanConfig):
        super().__init__()
        self.cfg = cfg
        self.const = nn.Parameter(torch.randn(cfg.widths[cfg.base_res], cfg.base_res, cfg.base_res))
        blocks = []
        self.block_res: list[int] = []
        res, in_ch = cfg.base_res, cfg.widths[cfg.base_res]
        blocks.append(FrontBlock(in_ch, cfg.widths[res], cfg.w_dim, upsample=False))
        self.block_res.append(res)
        while res < cfg.proxy_res:
            res *= 2
            blocks.append(FrontBlock(in_ch, cfg.widths[res], cfg.w_dim, upsample=True))
            self.block_res.append(res)
            in_ch = cfg.widths[res]
        self.blocks = nn.ModuleList(blocks)

    def forward(self, w: Tensor, return_stack: bool = False):
        if w.shape[-1] != self.cfg.w_dim:
            raise DimensionError(f"style length {w.shape[-1]} != configured {self.cfg.w_dim}")
        x = self.const[None].expand(w.shape[0], -1, -1, -1).to(w.dtype)
        stack: dict[int, Tensor] = {}
        for res, block in zip(self.block_res, self.blocks):
            x = block(x, w)
            stack[res] = x
        if return_stack:
            return x, stack
        return x


class GeneratorBack(nn.Module):
    """G2: plain conv blocks from proxy_res to img_res, then RGB head.

    Takes only feature maps (no style), so the rearranged features alone
    determine the output image.  tanh clamps the image to [-1, 1].
    """

    def __init__(self, cfg: GanConfig):
        super().__init__()
        self.cfg = cfg
        layers: list[nn.Module] = []
        res, in_ch = cfg.proxy_res, cfg.channels
        while res < cfg.img_res:
            res *= 2
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(in_ch, cfg.widths[res], 3, padding=1),
                nn.LeakyReLU(0.2),
            ]
            in_ch = cfg.widths[res]
        self.body = nn.Sequential(*layers)
        self.to_rgb = nn.Conv2d(in_ch, 3, 1)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                _init_conv(m)

    def forward(self, f: Tensor) -> Tensor:
        if f.shape[-3:] != (self.cfg.channels, self.cfg.proxy_res, self.cfg.proxy_res):
            raise DimensionError(
                f"feature shape {tuple(f.shape[-3:])} != "
                f"({self.cfg.channels}, {self.cfg.proxy_res}, {self.cfg.proxy_res})"
            )
        return torch.tanh(self.to_rgb(self.body(f)))


class Discriminator(nn.Module):
    """Conv stack from img_res down to base_res, then a scalar logit."""

    def __init__(self, cfg: GanConfig):
        super().__init__()
        self.cfg = cfg
        layers: list[nn.Module] = [nn.Conv2d(3, cfg.widths[cfg.img_res], 1)]
        res = cfg.img_res
        while res > cfg.base_res:
            out_ch = cfg.widths[res // 2]
            layers += [
                nn.Conv2d(cfg.widths[res], out_ch, 3, padding=1),
                nn.LeakyReLU(0.2),
                nn.AvgPool2d(2),
            ]
            res //= 2
        self.body = nn.Sequential(*layers)
        self.head = nn.Linear(cfg.widths[cfg.base_res] * cfg.base_res * cfg.base_res, 1)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                _init_conv(m)
        _init_linear(self.head)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-3:] != (3, self.cfg.img_res, self.cfg.img_res):
            raise DimensionError(
                f"image shape {tuple(x.shape[-3:])} != (3, {self.cfg.img_res}, {self.cfg.img_res})"
            )
        h = self.body(x)
        return self.head(h.flatten(1)).squeeze(-1)


class GanCore(nn.Module):
    """Bundle of mapping network, G1, G2, and discriminator."""

    def __init__(self, cfg: GanConfig):
        super().__init__()
        self.cfg = cfg
        self.mapping = MappingNetwork(cfg.z_dim, cfg.w_dim, cfg.mapping_depth)
        self.g1 = GeneratorFront(cfg)
        self.g2 = GeneratorBack(cfg)
        self.disc = Discriminator(cfg)

    # Single-sample convenience wrappers; training uses the modules batched.

    def map_latent(self, z: LatentCode | Tensor) -> Tensor:
        v = z.values if isinstance(z, LatentCode) else z
        squeeze = v.dim() == 1
        w = self.mapping(v[None] if squeeze else v)
        return w[0] if squeeze else w

    def generate_front(self, w: Tensor, return_stack: bool = False):
        squeeze = w.dim() == 1
        out = self.g1(w[None] if squeeze else w, return_stack=return_stack)
        if return_stack:
            f, stack = out
            if squeeze:
                return f[0], {r: t[0] for r, t in stack.items()}
            return f, stack
        return out[0] if squeeze else out

    def generate_back(self, f: Tensor) -> Tensor:
        squeeze = f.dim() == 3
        x = self.g2(f[None] if squeeze else f)
        return x[0] if squeeze else x

    def discriminate(self, x: Tensor) -> Tensor:
        squeeze = x.dim() == 3
        s = self.disc(x[None] if squeeze else x)
        return s[0] if squeeze else s

    def forward(self, w: Tensor) -> Tensor:
        """Unsplit generator pass; equals generate_back(generate_front(w))."""
        return self.generate_back(self.generate_front(w))
