"""Shared test utilities: finite differences and brute-force K-means oracle."""

from __future__ import annotations

import itertools

import numpy as np
import torch


def finite_diff_grad(fn, x: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Central-difference gradient of a scalar function of a tensor."""
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = float(fn(x).detach())
        flat[i] = orig - eps
        lo = float(fn(x).detach())
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def rel_err(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = max(float(a.norm()), float(b.norm()), 1e-12)
    return float((a - b).norm()) / denom


def check_grad(fn, x: torch.Tensor, tol: float = 1e-4, eps: float = 1e-5) -> float:
    """Compare autograd gradient of scalar fn(x) with central differences."""
    x = x.detach().double().requires_grad_(True)
    out = fn(x)
    (analytic,) = torch.autograd.grad(out, x)
    numeric = finite_diff_grad(lambda t: fn(t.detach()), x.detach().clone(), eps)
    err = rel_err(analytic, numeric)
    assert err < tol, f"gradient mismatch: rel err {err} >= {tol}"
    return err


def brute_force_kmeans_sse(points: np.ndarray, k: int) -> float:
    """Exhaustive minimum within-cluster SSE over all assignments (n small).

    Enumerates every labeling with the first point pinned to cluster 0 (SSE
    is invariant under relabeling) and uses the identity
    SSE = sum |x_i|^2 - sum_j |sum_j|^2 / n_j to score them all vectorized.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    tails = np.array(list(itertools.product(range(k), repeat=n - 1)), dtype=np.int8)
    labels = np.concatenate([np.zeros((tails.shape[0], 1), dtype=np.int8), tails], axis=1)
    explained = np.zeros(labels.shape[0])
    for j in range(k):
        mask = (labels == j).astype(np.float64)        # [A, n]
        counts = mask.sum(axis=1)                      # [A]
        sums = mask @ points                           # [A, d]
        nonempty = counts > 0
        explained[nonempty] += (sums[nonempty] ** 2).sum(axis=1) / counts[nonempty]
    return float((points ** 2).sum() - explained.max())


def kmeans_sse(points: np.ndarray, centroids: np.ndarray) -> float:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())
