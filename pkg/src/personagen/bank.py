"""Reference-name embedding bank and its distribution statistics.

The "real" side of adversarial training: word-embedding pairs of well-known
first/last names looked up in the frozen encoder's embedding table, plus the
per-position, per-dimension mean/std that the alignment step and everything
downstream share.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .encoders import TextEncoder
from .errors import DegenerateInputError, NameListError

BANK_FORMAT_VERSION = 1

# dimensions whose spread falls below this (relative) floor count as constant
STD_FLOOR = 1e-7


@dataclass
class NameEntry:
    first: str
    last: str
    attributes: dict[str, str] = field(default_factory=dict)

    def text(self) -> str:
        return f"{self.first} {self.last}"


@dataclass
class NameList:
    entries: list[NameEntry]
    rejected: list[tuple[int, str, str]]  # (line number, raw line, reason)
    source_hash: str


def parse_name_line(line: str) -> NameEntry:
    """Parse ``First Last [key=value ...]``; raises ValueError on bad shape."""
    words = line.split()
    if len(words) < 2:
        raise ValueError("expected two name words")
    first, last = words[0], words[1]
    attributes: dict[str, str] = {}
    for extra in words[2:]:
        key, sep, value = extra.partition("=")
        if not sep or not key or not value:
            raise ValueError(f"trailing token {extra!r} is not key=value")
        attributes[key] = value
    return NameEntry(first, last, attributes)


def filter_single_token(
    entries: list[NameEntry], encoder: TextEncoder
) -> tuple[list[NameEntry], list[tuple[NameEntry, str]]]:
    """Keep entries whose first and last name each map to exactly one token.

    Idempotent: filtering an already-filtered list changes nothing.
    """
    kept: list[NameEntry] = []
    rejected: list[tuple[NameEntry, str]] = []
    for entry in entries:
        bad = None
        for part in (entry.first, entry.last):
            n = len(encoder.token_ids(part))
            if n != 1:
                bad = f"{part!r} maps to {n} tokens"
                break
        if bad is None:
            kept.append(entry)
        else:
            rejected.append((entry, bad))
    return kept, rejected


def load_name_list(path: str | Path, encoder: TextEncoder) -> NameList:
    """Read a name list file: one ``First Last`` per line, ``#`` comments.

    Optional trailing ``key=value`` tokens attach attributes (e.g. gender
    tags for stratified runs). Names that do not map to exactly one token per
    word are rejected, never truncated; an empty result is an error.
    """
    path = Path(path)
    raw = path.read_bytes()
    source_hash = hashlib.sha256(raw).hexdigest()
    entries: list[NameEntry] = []
    rejected: list[tuple[int, str, str]] = []
    for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            entry = parse_name_line(stripped)
        except ValueError as exc:
            rejected.append((line_no, stripped, str(exc)))
            continue
        kept, bad = filter_single_token([entry], encoder)
        if kept:
            entries.append(kept[0])
        else:
            rejected.append((line_no, stripped, bad[0][1]))
    if not entries:
        raise NameListError(f"{path}: no usable names after filtering")
    return NameList(entries, rejected, source_hash)


@dataclass
class EmbeddingBank:
    """Word-embedding pairs of the reference names, shape (count, 2, dim)."""

    entries: list[NameEntry]
    embeddings: torch.Tensor
    model_id: str
    name_list_hash: str = ""

    def __post_init__(self):
        e = self.embeddings
        if e.dim() != 3 or e.shape[1] != 2:
            raise ValueError(f"expected (count, 2, dim) embeddings, got {tuple(e.shape)}")
        if e.shape[0] != len(self.entries):
            raise ValueError("entry/embedding count mismatch")
        if e.shape[0] < 2:
            raise ValueError("bank needs at least two names")
        if not torch.isfinite(e).all():
            raise ValueError("bank embeddings contain non-finite values")

    @property
    def count(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[2]

    def pair(self, index: int) -> torch.Tensor:
        return self.embeddings[index]

    def subset(self, indices: list[int]) -> "EmbeddingBank":
        return EmbeddingBank(
            [self.entries[i] for i in indices],
            self.embeddings[torch.as_tensor(indices, dtype=torch.long)].clone(),
            self.model_id,
            self.name_list_hash,
        )


def encode_names(names: NameList | list[NameEntry], encoder: TextEncoder) -> EmbeddingBank:
    """Look up the (first, last) embedding pair for every entry.

    Pure table lookups, no transformer pass, so the result is deterministic
    for a fixed encoder. Entries violating the single-token rule are refused.
    """
    if isinstance(names, NameList):
        entries, source_hash = names.entries, names.source_hash
    else:
        entries, source_hash = list(names), ""
    if len(entries) < 2:
        raise NameListError("need at least two names to build a bank")
    rows = []
    for entry in entries:
        ids = encoder.token_ids(entry.first) + encoder.token_ids(entry.last)
        if len(ids) != 2:
            raise NameListError(f"{entry.text()!r} does not map to one token per word")
        rows.append(encoder.embed_tokens(ids))
    return EmbeddingBank(entries, torch.stack(rows), encoder.model_id, source_hash)


@dataclass
class EmbeddingStats:
    """Per-position, per-dimension moments of a bank. mean/std: (2, dim)."""

    mean: torch.Tensor
    std: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.dim() != 2 or self.mean.shape[0] != 2:
            raise ValueError("stats must be a (2, dim) mean/std pair")
        if not (torch.isfinite(self.mean).all() and torch.isfinite(self.std).all()):
            raise ValueError("stats contain non-finite values")
        if (self.std <= 0).any():
            raise ValueError("stats std must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[1]


def compute_stats(bank: EmbeddingBank) -> EmbeddingStats:
    """Population mean/std over bank entries, independently per position/dim.

    A dimension with (relatively) zero spread is degenerate and refused:
    downstream alignment would collapse it.
    """
    mean = bank.embeddings.mean(dim=0)
    std = bank.embeddings.std(dim=0, correction=0)
    floor = STD_FLOOR * (1.0 + mean.abs())
    flat = (std <= floor).nonzero()
    if flat.numel():
        pos, d = (int(v) for v in flat[0])
        raise DegenerateInputError(
            f"bank dimension {d} at position {pos} has zero variance across {bank.count} names"
        )
    return EmbeddingStats(mean, std)


@dataclass
class NoiseConfig:
    """Gaussian augmentation applied to real pairs before the discriminator."""

    scale: float = 5e-3
    enabled: bool = True

    def __post_init__(self):
        if not (self.scale >= 0):
            raise ValueError("noise scale must be >= 0")


def augment_real(pair: torch.Tensor, noise: NoiseConfig, rng: torch.Generator) -> torch.Tensor:
    """Add scaled unit Gaussian noise to a real pair. Generated pairs never pass here."""
    if not torch.isfinite(pair).all():
        raise ValueError("refusing to augment a non-finite pair")
    if not noise.enabled or noise.scale == 0:
        return pair.clone()
    eta = torch.randn(pair.shape, generator=rng, dtype=pair.dtype)
    return pair + noise.scale * eta


def save_bank(bank: EmbeddingBank, path: str | Path) -> None:
    payload = {
        "format_version": BANK_FORMAT_VERSION,
        "kind": "embedding-bank",
        "model_id": bank.model_id,
        "name_list_hash": bank.name_list_hash,
        "entries": [(e.first, e.last, dict(e.attributes)) for e in bank.entries],
        "embeddings": bank.embeddings,
    }
    torch.save(payload, Path(path))


def load_bank(path: str | Path, *, expect_model_id: str | None = None) -> EmbeddingBank:
    payload = torch.load(Path(path), weights_only=True)
    if not isinstance(payload, dict) or payload.get("kind") != "embedding-bank":
        raise NameListError(f"{path}: not an embedding bank file")
    if payload.get("format_version") != BANK_FORMAT_VERSION:
        raise NameListError(f"{path}: unsupported bank format {payload.get('format_version')}")
    if expect_model_id is not None and payload["model_id"] != expect_model_id:
        raise NameListError(
            f"{path}: bank built for {payload['model_id']}, expected {expect_model_id}"
        )
    entries = [NameEntry(f, l, dict(a)) for f, l, a in payload["entries"]]
    return EmbeddingBank(entries, payload["embeddings"], payload["model_id"], payload["name_list_hash"])
