"""Independent reference implementations used to cross-check the library.

Everything here is written against numpy / plain python on purpose: the
library computes with torch, so agreement is a genuine two-route check,
not the same code called twice.
"""
from __future__ import annotations

import math

import numpy as np
import torch


def adain_oracle(raw: np.ndarray, target_mean: np.ndarray, target_std: np.ndarray) -> np.ndarray:
    mu = raw.mean()
    sigma = raw.std()  # numpy default is the population convention
    return target_std * (raw - mu) / sigma + target_mean


def pairwise_mean_sq(pairs: list[np.ndarray]) -> float:
    """Naive O(N^2) double loop over flattened pairs."""
    flat = [np.asarray(p, dtype=np.float64).reshape(-1) for p in pairs]
    total, count = 0.0, 0
    for j in range(len(flat)):
        for k in range(j + 1, len(flat)):
            d = flat[j] - flat[k]
            total += float(np.dot(d, d))
            count += 1
    return total / count


def stats_oracle(bank: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-pass sum / sum-of-squares accumulation over (n, 2, d)."""
    n = bank.shape[0]
    s = np.zeros(bank.shape[1:], dtype=np.float64)
    ss = np.zeros(bank.shape[1:], dtype=np.float64)
    for row in bank.astype(np.float64):
        s += row
        ss += row * row
    mean = s / n
    var = ss / n - mean * mean
    return mean, np.sqrt(np.maximum(var, 0.0))


def adv_loss_oracle(d_real: float, d_fake: float, *, saturating: bool = False, eps: float = 1e-7) -> tuple[float, float]:
    dr = min(max(d_real, eps), 1 - eps)
    df = min(max(d_fake, eps), 1 - eps)
    loss_d = -(math.log(dr) + math.log(1.0 - df))
    loss_g = math.log(1.0 - df) if saturating else -math.log(df)
    return loss_d, loss_g


def central_difference(fn, tensor: torch.Tensor, *, h: float = 1e-5) -> torch.Tensor:
    """Central finite differences of a scalar function at a float64 tensor."""
    assert tensor.dtype == torch.float64, "finite differences need float64 probes"
    grad = torch.zeros_like(tensor)
    flat = tensor.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + h
        up = float(fn(tensor).detach())
        flat[i] = orig - h
        down = float(fn(tensor).detach())
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = max(float(a.norm()), float(b.norm()), 1e-12)
    return float((a - b).norm()) / denom
