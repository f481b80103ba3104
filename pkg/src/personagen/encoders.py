"""Frozen text-encoder handles.

Bank construction, adversarial training, and rendering all consume the text
encoder through the small read-only surface defined by :class:`TextEncoder`.
``StubTextEncoder`` is a self-contained deterministic implementation that runs
on CPU in milliseconds; the test-suite and the demo scripts use it.
``HFClipTextEncoder`` adapts a HuggingFace CLIP text model so the same code
paths can run against a real latent-diffusion checkpoint.
"""
from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence, runtime_checkable

import torch

__all__ = ["TextEncoder", "StubTextEncoder", "HFClipTextEncoder", "load_encoder", "hash_tensors"]


def hash_tensors(tensors: Sequence[torch.Tensor]) -> str:
    """SHA-256 over the shapes and raw bytes of ``tensors``, in order."""
    digest = hashlib.sha256()
    for t in tensors:
        digest.update(str(tuple(t.shape)).encode())
        digest.update(t.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


@runtime_checkable
class TextEncoder(Protocol):
    """Read-only handle on a frozen text encoder."""

    model_id: str
    dim: int
    context_length: int

    def token_ids(self, word: str) -> list[int]:
        """Ids for a single word, no special tokens. One id per subword piece."""
        ...

    def encode_text(self, text: str) -> list[int]:
        """Ids for a free-text fragment, no special tokens."""
        ...

    def sequence_ids(self, body: list[int]) -> tuple[list[int], int]:
        """Wrap body ids with the encoder's specials/padding.

        Returns the full id sequence and the offset of the body within it.
        Raises ValueError when the wrapped sequence exceeds the context length.
        """
        ...

    def embed_tokens(self, ids: Sequence[int]) -> torch.Tensor:
        """Embedding-table lookup, shape (len(ids), dim). No transformer pass."""
        ...

    def transform(self, embeddings: torch.Tensor) -> torch.Tensor:
        """Full frozen transformer pass over a (length, dim) sequence."""
        ...

    def parameter_hash(self) -> str:
        """Digest over every frozen parameter, for tamper checks."""
        ...


_WORD_RE = re.compile(r"[a-z0-9]+")
_MAX_PIECE = 10


def _pieces(word: str) -> list[str]:
    out: list[str] = []
    for chunk in _WORD_RE.findall(word.lower()):
        stack = [chunk]
        while stack:
            piece = stack.pop()
            if len(piece) > _MAX_PIECE:
                half = (len(piece) + 1) // 2
                stack.extend([piece[half:], piece[:half]])
            else:
                out.append(piece)
    return out


class StubTextEncoder:
    """Deterministic CPU stand-in for a CLIP-style text encoder.

    Every weight derives from ``seed``, so two instances built with the same
    arguments are bit-identical. The "transformer" is a single tanh layer that
    mixes each position with the sequence mean and a positional code, where a
    per-token sigmoid gate on the token's own embedding decides how much
    context it absorbs (the one-layer analog of attention routing). Contextual
    outputs therefore depend on the whole prompt, on token position, and on
    token content, while staying cheap and differentiable in either float
    precision.
    """

    def __init__(
        self,
        dim: int = 16,
        *,
        vocab_size: int = 4096,
        context_length: int = 77,
        seed: int = 0,
        self_gain: float = 1.0,
        context_gain: float = 1.8,
        gate_gain: float = 1.0,
        dtype: torch.dtype = torch.float32,
    ):
        if dim < 2 or vocab_size < 16:
            raise ValueError("stub encoder needs dim >= 2 and vocab_size >= 16")
        self.dim = dim
        self.vocab_size = vocab_size
        self.context_length = context_length
        self.seed = seed
        self.self_gain = self_gain
        self.context_gain = context_gain
        self.gate_gain = gate_gain
        self.model_id = (
            f"stub/d{dim}-v{vocab_size}-s{seed}-sg{self_gain:g}-cg{context_gain:g}-gg{gate_gain:g}"
        )

        gen = torch.Generator().manual_seed(seed * 9973 + 11)

        def draw(*shape: int, std: float) -> torch.Tensor:
            # master values in float64 so float32/float64 instances agree exactly
            return (torch.randn(shape, generator=gen, dtype=torch.float64) * std).to(dtype)

        scale = dim ** -0.5
        self._table = draw(vocab_size, dim, std=1.0)
        self._w_self = draw(dim, dim, std=self_gain * scale)
        self._w_ctx = draw(dim, dim, std=context_gain * scale)
        self._w_out = draw(dim, dim, std=scale)
        self._w_gate = draw(dim, std=gate_gain * scale)
        self._pos = draw(context_length, dim, std=0.5)
        self._bias = draw(dim, std=0.1)

    def token_ids(self, word: str) -> list[int]:
        return [self._piece_id(p) for p in _pieces(word)]

    def _piece_id(self, piece: str) -> int:
        h = hashlib.sha1(piece.encode("utf-8")).digest()
        return int.from_bytes(h[:4], "big") % self.vocab_size

    def encode_text(self, text: str) -> list[int]:
        ids: list[int] = []
        for word in text.split():
            ids.extend(self.token_ids(word))
        return ids

    def sequence_ids(self, body: list[int]) -> tuple[list[int], int]:
        if len(body) > self.context_length:
            raise ValueError(
                f"sequence of {len(body)} tokens exceeds context length {self.context_length}"
            )
        return list(body), 0

    def embed_tokens(self, ids: Sequence[int]) -> torch.Tensor:
        idx = torch.as_tensor(list(ids), dtype=torch.long)
        if idx.numel() and (idx.min() < 0 or idx.max() >= self.vocab_size):
            raise ValueError("token id outside the embedding table")
        return self._table[idx]

    def transform(self, embeddings: torch.Tensor) -> torch.Tensor:
        if embeddings.dim() != 2 or embeddings.shape[1] != self.dim:
            raise ValueError(f"expected (length, {self.dim}) sequence")
        if embeddings.shape[0] == 0 or embeddings.shape[0] > self.context_length:
            raise ValueError("sequence length outside (0, context_length]")
        x = embeddings
        w = lambda t: t.to(x.dtype)  # noqa: E731 - dtype-follow helper
        ctx = x.mean(dim=0, keepdim=True)
        gate = torch.sigmoid(x @ w(self._w_gate)).unsqueeze(1)
        pre = x @ w(self._w_self).T + gate * (ctx @ w(self._w_ctx).T) + w(self._pos)[: x.shape[0]] + w(self._bias)
        return torch.tanh(pre) @ w(self._w_out).T

    @property
    def context_gate(self) -> torch.Tensor:
        """The gate weight vector (read-only copy), for diagnostics."""
        return self._w_gate.clone()

    def parameter_hash(self) -> str:
        return hash_tensors(
            [self._table, self._w_self, self._w_ctx, self._w_out, self._w_gate, self._pos, self._bias]
        )


_STUB_ID_RE = re.compile(
    r"^stub/d(?P<dim>\d+)"
    r"(?:-v(?P<vocab>\d+))?"
    r"(?:-s(?P<seed>\d+))?"
    r"(?:-sg(?P<sg>[0-9.]+))?"
    r"(?:-cg(?P<cg>[0-9.]+))?"
    r"(?:-gg(?P<gg>[0-9.]+))?$"
)


def load_encoder(spec: str, **kwargs) -> TextEncoder:
    """Build an encoder from an id string.

    ``stub/d16-v4096-s0-sg1-cg1.8`` style ids (later groups optional) build a
    :class:`StubTextEncoder`; anything else is treated as a HuggingFace model
    path for :class:`HFClipTextEncoder`.
    """
    m = _STUB_ID_RE.match(spec)
    if m:
        return StubTextEncoder(
            int(m["dim"]),
            vocab_size=int(m["vocab"] or 4096),
            seed=int(m["seed"] or 0),
            self_gain=float(m["sg"] or 1.0),
            context_gain=float(m["cg"] or 1.8),
            gate_gain=float(m["gg"] or 1.0),
            **kwargs,
        )
    if spec.startswith("stub/"):
        raise ValueError(f"malformed stub encoder id: {spec!r}")
    return HFClipTextEncoder(spec, **kwargs)


class HFClipTextEncoder:
    """Adapter over a HuggingFace CLIP text model, kept frozen.

    Understands both plain CLIP repos and the ``text_encoder``/``tokenizer``
    subfolder layout of latent-diffusion checkpoints. Requires the
    ``transformers`` package and local weights; nothing in the test-suite
    depends on it.
    """

    def __init__(self, model_path: str, *, diffusers_layout: bool | None = None, device: str = "cpu"):
        try:
            from transformers import CLIPTextModel, CLIPTokenizer
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise ImportError("HFClipTextEncoder requires the 'transformers' package") from exc
        if diffusers_layout is None:
            diffusers_layout = True
        tok_kw = {"subfolder": "tokenizer"} if diffusers_layout else {}
        mod_kw = {"subfolder": "text_encoder"} if diffusers_layout else {}
        try:
            tokenizer = CLIPTokenizer.from_pretrained(model_path, **tok_kw)
            model = CLIPTextModel.from_pretrained(model_path, **mod_kw)
        except OSError:
            if not diffusers_layout:
                raise
            tokenizer = CLIPTokenizer.from_pretrained(model_path)
            model = CLIPTextModel.from_pretrained(model_path)
        self._init_from_components(tokenizer, model, model_path, device)

    @classmethod
    def from_components(cls, tokenizer, model, model_id: str, device: str = "cpu") -> "HFClipTextEncoder":
        self = cls.__new__(cls)
        self._init_from_components(tokenizer, model, model_id, device)
        return self

    def _init_from_components(self, tokenizer, model, model_id: str, device: str) -> None:
        self.tokenizer = tokenizer
        self.model = model.to(device).eval()
        self.model.requires_grad_(False)
        self.device = device
        self.model_id = model_id
        self.dim = int(self.model.config.hidden_size)
        self.context_length = int(self.model.config.max_position_embeddings)

    def token_ids(self, word: str) -> list[int]:
        return list(self.tokenizer(word, add_special_tokens=False)["input_ids"])

    def encode_text(self, text: str) -> list[int]:
        return list(self.tokenizer(text, add_special_tokens=False)["input_ids"])

    def sequence_ids(self, body: list[int]) -> tuple[list[int], int]:
        bos = self.tokenizer.bos_token_id
        eos = self.tokenizer.eos_token_id
        pad = self.tokenizer.pad_token_id
        pad = eos if pad is None else pad
        if len(body) + 2 > self.context_length:
            raise ValueError(
                f"sequence of {len(body)} tokens exceeds context length {self.context_length - 2}"
            )
        ids = [bos] + list(body) + [eos]
        ids += [pad] * (self.context_length - len(ids))
        return ids, 1

    def embed_tokens(self, ids: Sequence[int]) -> torch.Tensor:
        idx = torch.as_tensor(list(ids), dtype=torch.long, device=self.device)
        return self.model.text_model.embeddings.token_embedding(idx)

    def transform(self, embeddings: torch.Tensor) -> torch.Tensor:
        tm = self.model.text_model
        length = embeddings.shape[0]
        pos = tm.embeddings.position_embedding.weight[:length]
        hidden = (embeddings + pos).unsqueeze(0)
        causal = torch.full((length, length), float("-inf"), dtype=hidden.dtype, device=hidden.device)
        causal = causal.triu(1).view(1, 1, length, length)
        out = tm.encoder(inputs_embeds=hidden, causal_attention_mask=causal).last_hidden_state
        return tm.final_layer_norm(out)[0]

    def parameter_hash(self) -> str:
        items = sorted(self.model.state_dict().items())
        return hash_tensors([v for _, v in items])
