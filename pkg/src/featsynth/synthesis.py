"""Inference paths: condition-driven synthesis and exemplar-guided generation."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor

from .checkpoint import PipelineState
from .cluster_proxy import assign_hard
from .errors import ConfigError
from .gan_core import sample_latent
from .semantic_mapper import ConditionRaster, mapper_forward


@dataclass
class SynthesisResult:
    image: Tensor         # [3,R_img,R_img] in [-1,1]
    proxy_mask: Tensor    # [R_p,R_p] long


def _require(state: PipelineState, *names: str) -> None:
    for n in names:
        if getattr(state, n) is None:
            raise ConfigError(f"checkpoint is missing the {n!r} component")


@torch.no_grad()
def synthesize(state: PipelineState, condition: ConditionRaster,
               style_seed: int) -> SynthesisResult:
    """Condition -> proxy mask (via the mapper) -> rearranged render."""
    _require(state, "gan", "rearranger", "mapper")
    logits = mapper_forward(condition, state.mapper,
                            expected_kind=state.cfg.mapper.condition_kind)
    proxy = logits.argmax(dim=0)
    z = sample_latent(style_seed, state.cfg.gan.z_dim)
    f = state.gan.generate_front(state.gan.map_latent(z))
    f_out = state.rearranger(proxy, f)
    return SynthesisResult(image=state.gan.generate_back(f_out), proxy_mask=proxy)


@torch.no_grad()
def exemplar(state: PipelineState, target_seed: int,
             style_seed: int) -> SynthesisResult:
    """Layout from the target latent's own proxy mask, style from another."""
    _require(state, "gan", "cluster", "rearranger")
    z_t = sample_latent(target_seed, state.cfg.gan.z_dim)
    f_t = state.gan.generate_front(state.gan.map_latent(z_t))
    proxy = assign_hard(f_t, state.cluster)
    z_s = sample_latent(style_seed, state.cfg.gan.z_dim)
    f_s = state.gan.generate_front(state.gan.map_latent(z_s))
    f_out = state.rearranger(proxy, f_s)
    return SynthesisResult(image=state.gan.generate_back(f_out), proxy_mask=proxy)
