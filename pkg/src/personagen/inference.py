"""Character sampling, latent interpolation, rendering, identity persistence."""
from __future__ import annotations

import datetime
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .bank import EmbeddingStats
from .context import PLACEHOLDER, contextualize
from .encoders import hash_tensors
from .errors import IdentityFileError, RenderError, StoryRenderError
from .gan import GeneratorNet, generator_forward
from .pipelines import DiffusionPipeline
from .training import TrainingConfig, read_checkpoint

IDENTITY_FORMAT_VERSION = 1


@dataclass
class GeneratorHandle:
    """A trained generator loaded for inference only."""

    gen: GeneratorNet
    stats: EmbeddingStats
    z_dim: int
    dim: int
    base_model_id: str
    name_list_hash: str
    step: int
    checkpoint_id: str


def load_generator(path: str | Path) -> GeneratorHandle:
    """Load just the generator side of a training checkpoint, frozen."""
    payload = read_checkpoint(path)
    config = TrainingConfig(**payload["config"])
    gen = GeneratorNet(config.z_dim, payload["dim"], config.gen_hidden)
    gen.load_state_dict(payload["generator"])
    gen.eval()
    gen.requires_grad_(False)
    stats = EmbeddingStats(payload["stats_mean"], payload["stats_std"])
    tensors = [v for _, v in sorted(payload["generator"].items())] + [stats.mean, stats.std]
    checkpoint_id = "g" + hash_tensors(tensors)[:12] + f"-{payload['step']}"
    return GeneratorHandle(
        gen=gen,
        stats=stats,
        z_dim=config.z_dim,
        dim=payload["dim"],
        base_model_id=payload["base_model_id"],
        name_list_hash=payload["name_list_hash"],
        step=int(payload["step"]),
        checkpoint_id=checkpoint_id,
    )


@dataclass
class PseudoIdentity:
    """A sampled character: an embedding pair plus its provenance."""

    embeddings: torch.Tensor  # (2, dim)
    latent: torch.Tensor  # (z_dim,)
    base_model_id: str
    checkpoint_id: str
    created_at: str
    name_list_hash: str = ""


def sample_identity(
    handle: GeneratorHandle,
    *,
    latent: torch.Tensor | None = None,
    rng: torch.Generator | None = None,
) -> PseudoIdentity:
    """Draw (or accept) a latent and produce its aligned embedding pair.

    Deterministic given an explicit latent; a fresh draw uses ``rng`` when
    provided, the global torch stream otherwise.
    """
    if latent is None:
        if rng is None:
            latent = torch.randn(handle.z_dim)
        else:
            latent = torch.randn(handle.z_dim, generator=rng)
    else:
        latent = torch.as_tensor(latent, dtype=torch.float32)
        if latent.shape != (handle.z_dim,):
            raise ValueError(f"latent must have shape ({handle.z_dim},), got {tuple(latent.shape)}")
        if not torch.isfinite(latent).all():
            raise ValueError("latent contains non-finite values")
    with torch.no_grad():
        embeddings = generator_forward(handle.gen, handle.stats, latent)
    return PseudoIdentity(
        embeddings=embeddings.detach().clone(),
        latent=latent.detach().clone(),
        base_model_id=handle.base_model_id,
        checkpoint_id=handle.checkpoint_id,
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        name_list_hash=handle.name_list_hash,
    )


def interpolate(z_a: torch.Tensor, z_b: torch.Tensor, t: float) -> torch.Tensor:
    """Linear blend (1-t)*a + t*b of two latents; t must lie in [0, 1]."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if z_a.shape != z_b.shape:
        raise ValueError("latents must share a shape")
    return (1.0 - t) * z_a + t * z_b


@dataclass
class RenderRequest:
    identity: PseudoIdentity
    prompt: str
    seed: int = 0
    guidance: float = 8.5
    steps: int = 50
    size: int | None = None
    negative: str = ""

    def __post_init__(self):
        n = self.prompt.count(PLACEHOLDER)
        if n != 1:
            raise RenderError(f"prompt must contain {PLACEHOLDER} exactly once, found {n}")
        if not (self.guidance >= 1.0):
            raise RenderError("guidance must be >= 1")
        if self.steps < 1:
            raise RenderError("steps must be >= 1")


def render(request: RenderRequest, pipeline: DiffusionPipeline) -> np.ndarray:
    """Render one image; refuses identities bound to a different base model."""
    identity = request.identity
    if identity.base_model_id != pipeline.base_model_id:
        raise RenderError(
            f"identity is bound to {identity.base_model_id}, pipeline is {pipeline.base_model_id}"
        )
    if identity.embeddings.shape != (2, pipeline.encoder.dim):
        raise RenderError(
            f"identity width {tuple(identity.embeddings.shape)} does not fit encoder dim {pipeline.encoder.dim}"
        )
    with torch.no_grad():
        cond, _ = contextualize(pipeline.encoder, request.prompt, identity.embeddings)
    return pipeline.generate(
        cond,
        seed=request.seed,
        guidance=request.guidance,
        steps=request.steps,
        size=request.size,
        negative=request.negative,
    )


def story_render(
    identity: PseudoIdentity,
    prompts: list[str],
    pipeline: DiffusionPipeline,
    *,
    seeds: list[int] | None = None,
    guidance: float = 8.5,
    steps: int = 50,
    size: int | None = None,
) -> list[np.ndarray]:
    """Render an ordered scene list with one identity.

    ``seeds`` pins per-scene seeds; otherwise they are drawn (and recoverable
    from the rendered request list only if the caller records them, so the
    CLI always pins). All scenes are attempted; failures are aggregated.
    """
    if not prompts:
        raise ValueError("story needs at least one prompt")
    if seeds is None:
        seeds = [int(torch.randint(2**31 - 1, (1,))) for _ in prompts]
    if len(seeds) != len(prompts):
        raise ValueError("seeds and prompts must align")
    images: list[np.ndarray] = []
    failures: list[tuple[int, Exception]] = []
    for i, (prompt, seed) in enumerate(zip(prompts, seeds)):
        try:
            req = RenderRequest(identity, prompt, seed=seed, guidance=guidance, steps=steps, size=size)
            images.append(render(req, pipeline))
        except Exception as exc:  # noqa: BLE001 - aggregated and re-raised
            failures.append((i, exc))
    if failures:
        raise StoryRenderError(failures)
    return images


def save_identity(identity: PseudoIdentity, path: str | Path) -> None:
    payload = {
        "format_version": IDENTITY_FORMAT_VERSION,
        "kind": "identity",
        "embeddings": identity.embeddings,
        "latent": identity.latent,
        "base_model_id": identity.base_model_id,
        "checkpoint_id": identity.checkpoint_id,
        "created_at": identity.created_at,
        "name_list_hash": identity.name_list_hash,
    }
    torch.save(payload, Path(path))


def load_identity(path: str | Path, *, expect_base_model: str | None = None) -> PseudoIdentity:
    payload = torch.load(Path(path), weights_only=True)
    if not isinstance(payload, dict) or payload.get("kind") != "identity":
        raise IdentityFileError(f"{path}: not an identity file")
    if payload.get("format_version") != IDENTITY_FORMAT_VERSION:
        raise IdentityFileError(f"{path}: unsupported identity format {payload.get('format_version')}")
    identity = PseudoIdentity(
        embeddings=payload["embeddings"],
        latent=payload["latent"],
        base_model_id=payload["base_model_id"],
        checkpoint_id=payload["checkpoint_id"],
        created_at=payload["created_at"],
        name_list_hash=payload["name_list_hash"],
    )
    if expect_base_model is not None and identity.base_model_id != expect_base_model:
        raise IdentityFileError(
            f"{path}: identity is bound to {identity.base_model_id}, expected {expect_base_model}"
        )
    return identity
