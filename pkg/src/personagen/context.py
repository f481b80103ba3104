"""Prompt corpus handling and the contextual-consistency objective.

A template is free text containing the placeholder marker exactly once. At
embedding time the marker becomes two adjacent slots which are filled with an
identity's embedding pair before the frozen transformer pass; the pass is the
only way context reaches the loss, and the identical code path serves both
training and rendering.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .encoders import TextEncoder
from .errors import CorpusError

PLACEHOLDER = "{ID}"

# slot positions carry this real (but arbitrary) id until identity rows replace them
_FILLER_ID = 0


@dataclass
class PromptTemplate:
    text: str
    category: str | None = None

    def __post_init__(self):
        n = self.text.count(PLACEHOLDER)
        if n != 1:
            raise CorpusError(f"template must contain {PLACEHOLDER} exactly once, found {n}: {self.text!r}")


@dataclass
class PromptCorpus:
    templates: list[PromptTemplate]
    position_counts: dict[int, int] = field(default_factory=dict)
    source_hash: str = ""

    def __len__(self) -> int:
        return len(self.templates)

    def __getitem__(self, index: int) -> PromptTemplate:
        return self.templates[index]

    @property
    def position_spread(self) -> int:
        return len(self.position_counts)


def tokenize_with_placeholder(encoder: TextEncoder, text: str) -> tuple[list[int], int]:
    """Token ids for a template, with two filler slots where the marker was.

    Returns the full wrapped sequence and the absolute index of the first
    slot. Raises CorpusError for a missing/duplicated marker; the encoder's
    length error propagates as ValueError.
    """
    if text.count(PLACEHOLDER) != 1:
        raise CorpusError(f"prompt must contain {PLACEHOLDER} exactly once: {text!r}")
    prefix, _, suffix = text.partition(PLACEHOLDER)
    head = encoder.encode_text(prefix)
    body = head + [_FILLER_ID, _FILLER_ID] + encoder.encode_text(suffix)
    ids, offset = encoder.sequence_ids(body)
    return ids, offset + len(head)


def load_prompt_corpus(path: str | Path, encoder: TextEncoder) -> PromptCorpus:
    """Read a corpus file: one template per line, ``#`` comments.

    A comment of the form ``# category: <tag>`` labels the templates that
    follow it. Any line violating the template contract (marker count, token
    length for this encoder) fails the load, reported with line numbers.
    """
    path = Path(path)
    raw = path.read_bytes()
    source_hash = hashlib.sha256(raw).hexdigest()
    templates: list[PromptTemplate] = []
    position_counts: dict[int, int] = {}
    problems: list[str] = []
    category: str | None = None
    for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            tag = stripped[1:].strip()
            if tag.lower().startswith("category:"):
                category = tag.split(":", 1)[1].strip() or None
            continue
        try:
            _, slot = tokenize_with_placeholder(encoder, stripped)
        except (CorpusError, ValueError) as exc:
            problems.append(f"line {line_no}: {exc}")
            continue
        templates.append(PromptTemplate(stripped, category))
        position_counts[slot] = position_counts.get(slot, 0) + 1
    if problems:
        raise CorpusError(f"{path}: " + "; ".join(problems))
    if not templates:
        raise CorpusError(f"{path}: corpus is empty")
    return PromptCorpus(templates, position_counts, source_hash)


def insert_identity(encoder: TextEncoder, text: str, embeddings: torch.Tensor) -> tuple[torch.Tensor, int]:
    """Embed a template and splice the identity pair into its slots.

    The identity rows keep their autograd history; everything else is frozen
    table lookups. Returns the (length, dim) input sequence and the slot.
    """
    if embeddings.shape != (2, encoder.dim):
        raise ValueError(f"expected identity embeddings of shape (2, {encoder.dim})")
    ids, slot = tokenize_with_placeholder(encoder, text)
    base = encoder.embed_tokens(ids).to(embeddings.dtype)
    seq = torch.cat([base[:slot], embeddings, base[slot + 2 :]])
    return seq, slot


def contextualize(encoder: TextEncoder, text: str, embeddings: torch.Tensor) -> tuple[torch.Tensor, int]:
    """Full contextual sequence for a template with the identity spliced in."""
    seq, slot = insert_identity(encoder, text, embeddings)
    return encoder.transform(seq), slot


def embed_prompt_with_identity(
    encoder: TextEncoder, template: PromptTemplate | str, embeddings: torch.Tensor
) -> torch.Tensor:
    """Contextual embedding pair (2, dim) at the placeholder positions."""
    text = template.text if isinstance(template, PromptTemplate) else template
    out, slot = contextualize(encoder, text, embeddings)
    return out[slot : slot + 2]


def encode_plain(encoder: TextEncoder, text: str) -> torch.Tensor:
    """Contextual sequence for marker-free text (e.g. unconditional branches)."""
    if PLACEHOLDER in text:
        raise ValueError("plain text must not contain the placeholder marker")
    ids, _ = encoder.sequence_ids(encoder.encode_text(text))
    if not ids:
        return torch.zeros(0, encoder.dim)
    return encoder.transform(encoder.embed_tokens(ids))


def context_consistency_loss(pairs: torch.Tensor | list[torch.Tensor]) -> torch.Tensor:
    """Mean squared distance between all pairs of contextual embedding pairs.

    Input: N stacked (2, dim) contextual pairs, N >= 2. Each is flattened and
    every unordered pair of rows contributes its squared Euclidean distance;
    the mean over the N-choose-2 pairs is returned. Squared distances are
    formed directly (no sqrt), so gradients stay finite at zero distance.
    """
    if not torch.is_tensor(pairs):
        pairs = torch.stack(list(pairs))
    if pairs.dim() != 3 or pairs.shape[0] < 2 or pairs.shape[1] != 2:
        raise ValueError(f"expected (N>=2, 2, dim) contextual pairs, got {tuple(pairs.shape)}")
    flat = pairs.reshape(pairs.shape[0], -1)
    i, j = torch.triu_indices(flat.shape[0], flat.shape[0], offset=1)
    return (flat[i] - flat[j]).pow(2).sum(dim=1).mean()
