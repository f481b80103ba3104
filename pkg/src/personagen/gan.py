"""Generator and discriminator MLPs, distribution alignment, adversarial losses.

Single-sample regime throughout: the reference recipe trains with batch 1,
so forward passes take one latent or one embedding pair at a time.
"""
from __future__ import annotations

import math

import torch
from torch import nn

from .bank import EmbeddingStats
from .errors import DegenerateInputError

PROB_EPS = 1e-7

# a vector whose own spread sits below this relative floor is constant
_ADAIN_STD_FLOOR = 1e-6


def adain(raw: torch.Tensor, target_mean: torch.Tensor, target_std: torch.Tensor) -> torch.Tensor:
    """Re-standardize ``raw`` by its own scalar moments, then match targets.

    The vector's mean/std are scalars taken over its components (population
    convention); the targets are per-dimension vectors. Idempotent when the
    targets are uniform across dimensions; refuses constant input, whose
    spread cannot be rescaled.
    """
    if raw.dim() != 1:
        raise ValueError("adain expects a single 1-D vector")
    mu = raw.mean()
    sigma = raw.std(correction=0)
    if sigma <= _ADAIN_STD_FLOOR * (1.0 + raw.abs().max()):
        raise DegenerateInputError("adain input has zero variance across components")
    return target_std * ((raw - mu) / sigma) + target_mean


class GeneratorNet(nn.Module):
    """Latent code -> raw embedding pair, before distribution alignment."""

    def __init__(self, z_dim: int = 64, dim: int = 1024, hidden: int | None = None, negative_slope: float = 0.2):
        super().__init__()
        if z_dim < 1 or dim < 2:
            raise ValueError("z_dim >= 1 and dim >= 2 required")
        hidden = 2 * dim if hidden is None else hidden
        self.z_dim = z_dim
        self.dim = dim
        self.net = nn.Sequential(
            nn.Linear(z_dim, hidden),
            nn.LeakyReLU(negative_slope),
            nn.Linear(hidden, 2 * dim),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape != (self.z_dim,):
            raise ValueError(f"expected latent of shape ({self.z_dim},), got {tuple(z.shape)}")
        return self.net(z).view(2, self.dim)


class DiscriminatorNet(nn.Module):
    """Embedding pair -> probability that it came from the reference bank."""

    def __init__(self, dim: int = 1024, hidden: tuple[int, int] = (512, 256), negative_slope: float = 0.2):
        super().__init__()
        self.dim = dim
        h0, h1 = hidden
        self.net = nn.Sequential(
            nn.Linear(2 * dim, h0),
            nn.LeakyReLU(negative_slope),
            nn.Linear(h0, h1),
            nn.LeakyReLU(negative_slope),
            nn.Linear(h1, 1),
        )

    def forward(self, pair: torch.Tensor) -> torch.Tensor:
        flat = pair.reshape(-1)
        if flat.shape != (2 * self.dim,):
            raise ValueError(f"expected a pair with {2 * self.dim} values, got {tuple(pair.shape)}")
        return torch.sigmoid(self.net(flat).squeeze(-1))


def init_mlp(module: nn.Module, rng: torch.Generator, negative_slope: float = 0.2) -> None:
    """Fan-in-scaled normal init for the leaky slope, zero biases. Seeded."""
    gain2 = 2.0 / (1.0 + negative_slope ** 2)
    with torch.no_grad():
        for layer in module.modules():
            if isinstance(layer, nn.Linear):
                std = math.sqrt(gain2 / layer.in_features)
                layer.weight.normal_(0.0, std, generator=rng)
                layer.bias.zero_()


def generator_forward(gen: GeneratorNet, stats: EmbeddingStats, z: torch.Tensor) -> torch.Tensor:
    """Generate an aligned embedding pair (2, dim) for one latent."""
    if stats.dim != gen.dim:
        raise ValueError(f"stats dim {stats.dim} does not match generator dim {gen.dim}")
    raw = gen(z)
    return torch.stack([adain(raw[i], stats.mean[i], stats.std[i]) for i in (0, 1)])


def adversarial_losses(
    d_real: torch.Tensor | float,
    d_fake: torch.Tensor | float,
    *,
    saturating: bool = False,
    eps: float = PROB_EPS,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Discriminator and generator losses from two probabilities.

    Probabilities are clamped to [eps, 1 - eps] before any log. The default
    generator loss is the non-saturating form -log D(fake); ``saturating``
    switches to the literal minimax form +log(1 - D(fake)).
    """
    def as_prob(x):
        if not torch.is_tensor(x):
            x = torch.as_tensor(x, dtype=torch.float64)
        return x.clamp(eps, 1.0 - eps)

    dr, df = as_prob(d_real), as_prob(d_fake)
    loss_d = -(torch.log(dr) + torch.log(1.0 - df))
    loss_g = torch.log(1.0 - df) if saturating else -torch.log(df)
    return loss_d, loss_g
