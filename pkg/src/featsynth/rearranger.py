"""Cross-attention feature rearranger.

The proxy mask becomes the query (class embedding + 2D sinusoidal positional
encoding, through a residual block), the feature maps become keys and values,
and single-head attention re-spatializes the values into the layout the mask
dictates.  A second residual block and an output projection map the attended
tokens back to feature-map channels.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .config import GanConfig, RearrangerConfig
from .errors import ConfigError, DimensionError


def positional_encoding(d_f: int, r_p: int, dtype: torch.dtype = torch.float32) -> Tensor:
    """Fixed 2D sinusoidal table [d_f, r_p, r_p].

    Channels split in half between row and column index; within each half,
    sin and cos alternate over geometric frequencies.  All entries in [-1, 1].
    """
    if d_f % 4 != 0:
        raise ConfigError(f"d_f={d_f} must be divisible by 4 for the 2D sin/cos split")
    quarter = d_f // 4
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(quarter, dtype=torch.float64) / max(1, quarter)
    )
    pos = torch.arange(r_p, dtype=torch.float64)
    ang = pos[:, None] * freqs[None, :]                        # [r_p, quarter]
    table = torch.zeros(d_f, r_p, r_p, dtype=torch.float64)
    row = torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)   # [r_p, d_f/2]
    col = row
    table[: d_f // 2] = row.T[:, :, None].expand(-1, -1, r_p)
    table[d_f // 2:] = col.T[:, None, :].expand(-1, r_p, -1)
    return table.to(dtype)


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(QK^T / sqrt(d)) V for 2D token matrices."""
    if q.dim() != 2 or k.dim() != 2 or v.dim() != 2:
        raise DimensionError("attention expects 2D [tokens, dim] matrices")
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise DimensionError(f"key count {k.shape[0]} != value count {v.shape[0]}")
    logits = q @ k.T / math.sqrt(q.shape[1])
    return torch.softmax(logits, dim=1) @ v


class ResidualStack(nn.Module):
    """N layers of (1x1 conv + LReLU) with an identity skip per layer."""

    def __init__(self, width: int, layers: int):
        super().__init__()
        self.convs = nn.ModuleList(nn.Conv2d(width, width, 1) for _ in range(layers))
        for c in self.convs:
            nn.init.normal_(c.weight, std=1.0 / math.sqrt(width))
            nn.init.zeros_(c.bias)

    def forward(self, x: Tensor) -> Tensor:
        for conv in self.convs:
            x = x + F.leaky_relu(conv(x), 0.2)
        return x


class Rearranger(nn.Module):
    """Single-head cross-attention rearranger with pre/post residual blocks."""

    def __init__(self, gan_cfg: GanConfig, cfg: RearrangerConfig, k: int):
        super().__init__()
        self.gan_cfg = gan_cfg
        self.cfg = cfg
        self.k = k
        d, d_f, c = cfg.attn_dim, cfg.embed_dim, gan_cfg.channels
        self.class_embed = nn.Embedding(k, d_f)
        nn.init.normal_(self.class_embed.weight, std=1.0 / math.sqrt(d_f))
        self.register_buffer(
            "pos_enc", positional_encoding(d_f, gan_cfg.proxy_res), persistent=False
        )
        self.feat_in = nn.Conv2d(c, d_f, 1)
        self.pre_block = ResidualStack(d_f, cfg.block_layers)
        self.post_block = ResidualStack(d_f, cfg.block_layers)
        self.w_q = nn.Linear(d_f, d, bias=False)
        self.w_k = nn.Linear(d_f, d, bias=False)
        self.w_v = nn.Linear(d_f, d, bias=False)
        self.attn_out = nn.Conv2d(d, d_f, 1)
        self.proj_out = nn.Conv2d(d_f, c, 1)
        for m in (self.feat_in, self.attn_out, self.proj_out):
            nn.init.normal_(m.weight, std=1.0 / math.sqrt(m.in_channels))
            nn.init.zeros_(m.bias)
        for m in (self.w_q, self.w_k, self.w_v):
            nn.init.normal_(m.weight, std=1.0 / math.sqrt(d_f))

    def _check_mask(self, m: Tensor) -> None:
        r = self.gan_cfg.proxy_res
        if m.shape[-2:] != (r, r):
            raise DimensionError(f"mask shape {tuple(m.shape[-2:])} != ({r}, {r})")
        if m.max().item() >= self.k or m.min().item() < 0:
            raise DimensionError(f"mask labels must lie in [0, {self.k})")

    def _queries_from_grid(self, emb_grid: Tensor) -> Tensor:
        tok = emb_grid + self.pos_enc[None].to(emb_grid.dtype)
        tok = self.pre_block(tok)
        return self.w_q(tok.flatten(2).transpose(1, 2))        # [B,HW,d]

    def embed_mask(self, m: Tensor) -> Tensor:
        """Proxy mask [H,W] (or [B,H,W]) -> query matrix [HW, d] (or [B,HW,d])."""
        squeeze = m.dim() == 2
        if squeeze:
            m = m[None]
        self._check_mask(m)
        emb = self.class_embed(m.long()).permute(0, 3, 1, 2)   # [B,d_f,H,W]
        q = self._queries_from_grid(emb)
        return q[0] if squeeze else q

    def embed_mask_probs(self, probs: Tensor) -> Tensor:
        """Soft/one-hot mask [K,H,W] (or batched) -> queries; differentiable
        in the probabilities (straight-through path for the mapper)."""
        squeeze = probs.dim() == 3
        if squeeze:
            probs = probs[None]
        if probs.shape[1] != self.k:
            raise DimensionError(f"probs have {probs.shape[1]} classes, expected {self.k}")
        emb = torch.einsum("bkhw,kd->bdhw", probs, self.class_embed.weight)
        q = self._queries_from_grid(emb)
        return q[0] if squeeze else q

    def _embed_features(self, f: Tensor) -> tuple[Tensor, Tensor]:
        tok = self.feat_in(f)
        if self.cfg.pe_on_keys:
            tok = tok + self.pos_enc[None].to(tok.dtype)
        tok = self.pre_block(tok).flatten(2).transpose(1, 2)   # [B,HW,d_f]
        return self.w_k(tok), self.w_v(tok)

    def forward(self, m: Tensor, f: Tensor) -> Tensor:
        """Rearrange feature maps f to the layout of proxy mask m.

        m may be integer labels [H,W] / [B,H,W] or a soft/one-hot stack
        [K,H,W] / [B,K,H,W].
        """
        soft = m.dim() == f.dim()
        squeeze = f.dim() == 3
        if squeeze:
            f, m = f[None], m[None]
        c, r = self.gan_cfg.channels, self.gan_cfg.proxy_res
        if f.shape[-3:] != (c, r, r):
            raise DimensionError(f"feature shape {tuple(f.shape[-3:])} != ({c}, {r}, {r})")
        q = self.embed_mask_probs(m) if soft else self.embed_mask(m)  # [B,HW,d]
        keys, vals = self._embed_features(f)                   # [B,HW,d] each
        logits = q @ keys.transpose(1, 2) / math.sqrt(q.shape[-1])
        attended = torch.softmax(logits, dim=-1) @ vals        # [B,HW,d]
        grid = attended.transpose(1, 2).reshape(f.shape[0], -1, r, r)
        out = self.proj_out(self.post_block(self.attn_out(grid)))
        return out[0] if squeeze else out

    def rearrange(self, m: Tensor, f: Tensor) -> Tensor:
        return self.forward(m, f)


def rearrange(m: Tensor, f: Tensor, weights: Rearranger) -> Tensor:
    """Functional alias for Rearranger.forward."""
    return weights(m, f)
