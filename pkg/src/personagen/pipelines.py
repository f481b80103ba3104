"""Frozen image-synthesis pipeline handles.

The renderer consumes a pipeline through :class:`DiffusionPipeline`:
a base-model id, the text encoder it conditions on, and ``generate`` from a
contextual sequence. ``StubDiffusionPipeline`` is the deterministic toy
implementation used by tests, demos, and the studio; ``SDPipelineAdapter``
wraps a real diffusers pipeline when weights are available.
"""
from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import numpy as np
import torch

from .encoders import StubTextEncoder, TextEncoder, load_encoder

__all__ = ["DiffusionPipeline", "StubDiffusionPipeline", "SDPipelineAdapter", "load_pipeline"]


@runtime_checkable
class DiffusionPipeline(Protocol):
    base_model_id: str
    encoder: TextEncoder
    native_size: int

    def generate(
        self,
        cond: torch.Tensor,
        *,
        seed: int,
        guidance: float = 8.5,
        steps: int = 50,
        size: int | None = None,
        negative: str = "",
    ) -> np.ndarray:
        """Render one (H, W, 3) uint8 image from a contextual sequence."""
        ...


class StubDiffusionPipeline:
    """Deterministic toy image synthesizer.

    Renders a little "portrait": the center block is a pattern driven purely
    by the conditioning embeddings (same conditioning, same face) and the
    frame is noise driven by the seed and the conditioning together. No
    model weights, runs in microseconds, byte-reproducible.
    """

    def __init__(self, encoder: TextEncoder, *, native_size: int = 64):
        if native_size % 16 != 0 or native_size < 16:
            raise ValueError("native_size must be a positive multiple of 16")
        self.encoder = encoder
        self.base_model_id = encoder.model_id
        self.native_size = native_size
        digest = hashlib.sha256(encoder.model_id.encode()).digest()
        gen = torch.Generator().manual_seed(int.from_bytes(digest[:8], "big") % (2**63))
        self._face_proj = torch.randn(3 * 8 * 8, encoder.dim, generator=gen) / encoder.dim ** 0.5
        self._tint_proj = torch.randn(3, encoder.dim, generator=gen) / encoder.dim ** 0.5

    def generate(
        self,
        cond: torch.Tensor,
        *,
        seed: int,
        guidance: float = 8.5,
        steps: int = 50,
        size: int | None = None,
        negative: str = "",
    ) -> np.ndarray:
        if cond.dim() != 2 or cond.shape[1] != self.encoder.dim:
            raise ValueError(f"expected a (length, {self.encoder.dim}) conditioning sequence")
        size = self.native_size if size is None else size
        if size % 16 != 0 or size < 16:
            raise ValueError("size must be a positive multiple of 16")
        pooled = cond.detach().to(torch.float32).mean(dim=0)

        face = torch.tanh(self._face_proj @ pooled).reshape(3, 8, 8)
        face = ((face + 1.0) * 127.5).numpy().astype(np.uint8)
        tint = torch.sigmoid(self._tint_proj @ pooled).numpy()

        mix = hashlib.sha256()
        mix.update(np.int64(seed).tobytes())
        mix.update(np.float64(guidance).tobytes())
        mix.update(np.int64(steps).tobytes())
        mix.update(np.int64(size).tobytes())
        mix.update(pooled.numpy().tobytes())
        rng = np.random.default_rng(int.from_bytes(mix.digest()[:8], "big"))

        frame = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        frame = (frame * tint[None, None, :]).astype(np.uint8)
        block = size // 2 // 8
        upsized = np.kron(face.transpose(1, 2, 0), np.ones((block, block, 1), dtype=np.uint8))
        lo, hi = size // 4, size // 4 + size // 2
        frame[lo:hi, lo:hi, :] = upsized
        return frame


class SDPipelineAdapter:
    """Adapter over a diffusers latent-diffusion pipeline, kept frozen.

    Conditioning embeddings are passed straight through, so the identity
    insertion path is identical to the stub's. Requires the ``diffusers``
    package and local weights; nothing in the test-suite depends on it.
    """

    def __init__(self, model_path: str, *, device: str = "cpu", dtype: torch.dtype = torch.float32):
        try:
            from diffusers import StableDiffusionPipeline
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise ImportError("SDPipelineAdapter requires the 'diffusers' package") from exc
        from .encoders import HFClipTextEncoder

        self.pipe = StableDiffusionPipeline.from_pretrained(model_path, torch_dtype=dtype).to(device)
        self.encoder = HFClipTextEncoder.from_components(
            self.pipe.tokenizer, self.pipe.text_encoder, model_path, device
        )
        self.base_model_id = model_path
        self.device = device
        self.native_size = int(self.pipe.unet.config.sample_size) * int(self.pipe.vae_scale_factor)

    def generate(
        self,
        cond: torch.Tensor,
        *,
        seed: int,
        guidance: float = 8.5,
        steps: int = 50,
        size: int | None = None,
        negative: str = "",
    ) -> np.ndarray:  # pragma: no cover - needs model weights
        size = self.native_size if size is None else size
        g = torch.Generator(self.device).manual_seed(seed)
        image = self.pipe(
            prompt_embeds=cond.unsqueeze(0),
            negative_prompt=negative or None,
            guidance_scale=guidance,
            num_inference_steps=steps,
            height=size,
            width=size,
            generator=g,
            output_type="np",
        ).images[0]
        return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def load_pipeline(spec: str, **kwargs) -> DiffusionPipeline:
    """Build a pipeline from an id string: stub ids or a diffusers model path."""
    if spec.startswith("stub/"):
        return StubDiffusionPipeline(load_encoder(spec), **kwargs)
    return SDPipelineAdapter(spec, **kwargs)
