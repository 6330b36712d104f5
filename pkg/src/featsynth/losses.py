"""Training objectives for the rearranger and mapper stages.

Conventions: the adversarial loss is non-saturating (softplus), the R1
penalty is 0.5 * E||grad_x D(x)||^2, the mask loss routes gradients through
the soft cluster assignment with frozen centroids, and the self loss is the
L2 norm of the difference tensor summed over the batch.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import Tensor

from .cluster_proxy import ClusterModel, assign_soft
from .errors import DimensionError

# re-export: LossWeights lives with the other config dataclasses
from .config import LossWeights  # noqa: F401


def loss_self(f_rearranged: Tensor, f_original: Tensor, mean: bool = False) -> Tensor:
    """L2 norm of (f' - f), summed over the batch dimension if present."""
    if f_rearranged.shape != f_original.shape:
        raise DimensionError(
            f"shape mismatch {tuple(f_rearranged.shape)} vs {tuple(f_original.shape)}"
        )
    diff = f_rearranged - f_original
    if diff.dim() == 3:
        diff = diff[None]
    norms = diff.flatten(1).norm(dim=1)
    if mean:
        return norms.sum() / diff[0].numel()
    return norms.sum()


def loss_mask(f_rearranged: Tensor, m_target: Tensor, model: ClusterModel) -> Tensor:
    """Mean per-pixel cross-entropy of soft assignments vs hard target labels."""
    if f_rearranged.dim() == 3:
        f_rearranged, m_target = f_rearranged[None], m_target[None]
    if m_target.max().item() >= model.k or m_target.min().item() < 0:
        raise DimensionError(f"target labels must lie in [0, {model.k})")
    total = 0.0
    n = f_rearranged.shape[0]
    for i in range(n):
        probs = assign_soft(f_rearranged[i], model)            # [K,H,W]
        logp = torch.log(probs.clamp_min(1e-30))
        total = total + F.nll_loss(logp[None], m_target[i][None].long(), reduction="mean")
    return total / n


def adv_g_nonsat(fake_scores: Tensor) -> Tensor:
    """Non-saturating generator loss: mean softplus(-score)."""
    return F.softplus(-fake_scores).mean()


def adv_d(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    """Discriminator loss: mean softplus(-real) + mean softplus(fake)."""
    return F.softplus(-real_scores).mean() + F.softplus(fake_scores).mean()


def r1_penalty(discriminator, real_batch: Tensor) -> Tensor:
    """0.5 * mean over batch of ||grad_x D(x)||^2, differentiable in D's weights."""
    x = real_batch.detach().requires_grad_(True)
    scores = discriminator(x)
    (grad,) = torch.autograd.grad(scores.sum(), x, create_graph=True)
    return 0.5 * grad.flatten(1).pow(2).sum(dim=1).mean()


def total_rearranger(l_adv: Tensor | float, l_self: Tensor | float,
                     l_mask: Tensor | float, l_r1: Tensor | float,
                     weights: LossWeights) -> Tensor | float:
    """L_adv + lambda_self L_self + lambda_mask L_mask + lambda_R1 L_R1."""
    return (l_adv + weights.lambda_self * l_self
            + weights.lambda_mask * l_mask + weights.lambda_r1 * l_r1)


def loss_rec_mapper(predicted_logits: Tensor, target_proxy: Tensor) -> Tensor:
    """Mean per-pixel cross-entropy of mapper logits [K,H,W] vs target labels."""
    if predicted_logits.dim() == 3:
        predicted_logits, target_proxy = predicted_logits[None], target_proxy[None]
    k = predicted_logits.shape[1]
    if target_proxy.max().item() >= k or target_proxy.min().item() < 0:
        raise DimensionError(f"target labels must lie in [0, {k})")
    return F.cross_entropy(predicted_logits, target_proxy.long())


def total_mapper(l_adv: Tensor | float, l_rec: Tensor | float,
                 l_r1: Tensor | float, weights: LossWeights,
                 phase: int) -> Tensor | float:
    """Phase 1: reconstruction only (lambda_rec=10); phase 2 adds the
    adversarial term and R1 with lambda_rec=100."""
    if phase == 1:
        return weights.lambda_rec_phase1 * l_rec
    if phase == 2:
        return (weights.lambda_adv * l_adv + weights.lambda_rec_phase2 * l_rec
                + weights.lambda_r1 * l_r1)
    raise ValueError(f"phase must be 1 or 2, got {phase}")
