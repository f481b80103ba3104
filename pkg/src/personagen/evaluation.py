"""Evaluation protocol: render grids and the six-score report.

A grid is K identities x M prompts with one image per cell plus a designated
anchor prompt (the plain portrait). Metrics consume the grid through small
measurement backends (image/text embedding, face detection+embedding,
perceptual distance, generic features) so the same logic runs against stub
backends on a laptop and real ones on a workstation.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image
from scipy import linalg

from .context import PLACEHOLDER
from .errors import EvalError

# keeps the reference protocol (40 prompts -> 780 pairs) exact; seeded
# subsampling kicks in only beyond this
MAX_PAIRS_PER_GROUP = 1000
_PAIR_SEED = 79_261
_NEUTRAL_SUBJECT = "a person"


@dataclass
class FaceObservation:
    crop: np.ndarray
    embedding: np.ndarray


@runtime_checkable
class ImageTextBackend(Protocol):
    def embed_image(self, image: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


@runtime_checkable
class FaceBackend(Protocol):
    def detect(self, image: np.ndarray) -> FaceObservation | None: ...


@runtime_checkable
class PerceptualBackend(Protocol):
    def distance(self, a: np.ndarray, b: np.ndarray) -> float: ...


@runtime_checkable
class FeatureBackend(Protocol):
    def features(self, image: np.ndarray) -> np.ndarray: ...


@dataclass
class EvalGrid:
    identities: list[str]
    prompts: list[str]
    anchor_prompt: str
    images: dict[tuple[str, str], Path]

    def __post_init__(self):
        if not self.identities or not self.prompts:
            raise EvalError("grid needs at least one identity and one prompt")
        if self.anchor_prompt not in self.prompts:
            raise EvalError("anchor prompt must be one of the grid prompts")
        missing = [
            (i, p) for i in self.identities for p in self.prompts if (i, p) not in self.images
        ]
        if missing:
            raise EvalError(f"grid is missing {len(missing)} cell(s), e.g. {missing[0]}")


def load_grid(manifest_path: str | Path) -> EvalGrid:
    """Read a grid manifest: JSON with identities, prompts, anchor, image paths.

    Image paths are resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    data = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = manifest_path.parent
    try:
        images = {
            (identity, prompt): base / rel
            for identity, row in data["images"].items()
            for prompt, rel in row.items()
        }
        grid = EvalGrid(list(data["identities"]), list(data["prompts"]), data["anchor_prompt"], images)
    except KeyError as exc:
        raise EvalError(f"{manifest_path}: manifest missing key {exc}") from exc
    for cell, path in grid.images.items():
        if not path.is_file():
            raise EvalError(f"{manifest_path}: missing image file for cell {cell}: {path}")
    return grid


def save_grid(grid: EvalGrid, manifest_path: str | Path) -> None:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    rows: dict[str, dict[str, str]] = {i: {} for i in grid.identities}
    for (identity, prompt), path in grid.images.items():
        rel = path.relative_to(base) if path.is_absolute() and path.is_relative_to(base) else path
        rows[identity][prompt] = str(rel)
    payload = {
        "identities": grid.identities,
        "prompts": grid.prompts,
        "anchor_prompt": grid.anchor_prompt,
        "images": rows,
    }
    manifest_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


class _ImageCache:
    """Per-report image loader so each file is decoded once."""

    def __init__(self, grid: EvalGrid):
        self.grid = grid
        self._loaded: dict[tuple[str, str], np.ndarray] = {}

    def __call__(self, identity: str, prompt: str) -> np.ndarray:
        key = (identity, prompt)
        if key not in self._loaded:
            with Image.open(self.grid.images[key]) as img:
                self._loaded[key] = np.asarray(img.convert("RGB"))
        return self._loaded[key]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise EvalError("zero-norm embedding in cosine similarity")
    return float(np.dot(a, b) / (na * nb))


def _select_pairs(n: int, group_index: int) -> list[tuple[int, int]]:
    """All index pairs, or a seeded subsample above MAX_PAIRS_PER_GROUP."""
    pairs = list(combinations(range(n), 2))
    if len(pairs) <= MAX_PAIRS_PER_GROUP:
        return pairs
    rng = np.random.default_rng(_PAIR_SEED + group_index)
    chosen = rng.choice(len(pairs), size=MAX_PAIRS_PER_GROUP, replace=False)
    return [pairs[int(k)] for k in sorted(chosen)]


@dataclass
class MetricValue:
    value: float
    samples: int


def subject_consistency(grid: EvalGrid, backend: ImageTextBackend, *, cache: _ImageCache | None = None) -> MetricValue:
    """Mean image-image similarity between each anchor render and the rest."""
    cache = cache or _ImageCache(grid)
    per_identity = []
    total = 0
    for identity in grid.identities:
        anchor = backend.embed_image(cache(identity, grid.anchor_prompt))
        sims = [
            _cosine(anchor, backend.embed_image(cache(identity, p)))
            for p in grid.prompts
            if p != grid.anchor_prompt
        ]
        if not sims:
            raise EvalError("subject consistency needs at least one non-anchor prompt")
        per_identity.append(float(np.mean(sims)))
        total += len(sims)
    return MetricValue(float(np.mean(per_identity)), total)


def _observations(
    grid: EvalGrid, face: FaceBackend, cache: _ImageCache, *, max_exclusion: float = 0.2
) -> dict[str, list[FaceObservation]]:
    """Detected faces per identity; enforces the exclusion budget."""
    out: dict[str, list[FaceObservation]] = {}
    excluded = 0
    for identity in grid.identities:
        obs = []
        for prompt in grid.prompts:
            found = face.detect(cache(identity, prompt))
            if found is None:
                excluded += 1
            else:
                obs.append(found)
        if not obs:
            raise EvalError(f"no detectable faces for identity {identity!r}")
        out[identity] = obs
    total = len(grid.identities) * len(grid.prompts)
    if excluded > max_exclusion * total:
        raise EvalError(
            f"{excluded}/{total} cells had no detectable face, exceeding the {max_exclusion:.0%} budget"
        )
    return out


def identity_consistency(grid: EvalGrid, face: FaceBackend, *, cache: _ImageCache | None = None) -> MetricValue:
    """Mean pairwise face-embedding similarity within each identity."""
    cache = cache or _ImageCache(grid)
    groups = _observations(grid, face, cache)
    per_identity = []
    total = 0
    for g, identity in enumerate(grid.identities):
        obs = groups[identity]
        if len(obs) < 2:
            warnings.warn(f"identity {identity!r} has a single usable face; skipped", stacklevel=2)
            continue
        pairs = _select_pairs(len(obs), g)
        sims = [_cosine(obs[i].embedding, obs[j].embedding) for i, j in pairs]
        per_identity.append(float(np.mean(sims)))
        total += len(pairs)
    if not per_identity:
        raise EvalError("no identity had two usable faces")
    return MetricValue(float(np.mean(per_identity)), total)


def editability(grid: EvalGrid, backend: ImageTextBackend, *, cache: _ImageCache | None = None) -> MetricValue:
    """Mean image-text similarity, the placeholder read as a neutral subject."""
    cache = cache or _ImageCache(grid)
    sims = []
    for identity in grid.identities:
        for prompt in grid.prompts:
            text = prompt.replace(PLACEHOLDER, _NEUTRAL_SUBJECT)
            sims.append(_cosine(backend.embed_image(cache(identity, prompt)), backend.embed_text(text)))
    return MetricValue(float(np.mean(sims)), len(sims))


def face_diversity(
    grid: EvalGrid, face: FaceBackend, perceptual: PerceptualBackend, *, cache: _ImageCache | None = None
) -> MetricValue:
    """Mean pairwise perceptual distance between face crops within identities."""
    cache = cache or _ImageCache(grid)
    groups = _observations(grid, face, cache)
    per_identity = []
    total = 0
    for g, identity in enumerate(grid.identities):
        obs = groups[identity]
        if len(obs) < 2:
            warnings.warn(f"identity {identity!r} has a single usable face; skipped", stacklevel=2)
            continue
        pairs = _select_pairs(len(obs), g)
        dists = [float(perceptual.distance(obs[i].crop, obs[j].crop)) for i, j in pairs]
        per_identity.append(float(np.mean(dists)))
        total += len(pairs)
    if not per_identity:
        raise EvalError("no identity had two usable faces")
    return MetricValue(float(np.mean(per_identity)), total)


def trusted_face_diversity(
    grid: EvalGrid, face: FaceBackend, perceptual: PerceptualBackend, *, cache: _ImageCache | None = None
) -> MetricValue:
    """Diversity that only counts when the face stays the same person.

    Per within-identity pair: (face similarity) x (perceptual distance);
    duplicated images score zero because their distance is zero.
    """
    cache = cache or _ImageCache(grid)
    groups = _observations(grid, face, cache)
    per_identity = []
    total = 0
    for g, identity in enumerate(grid.identities):
        obs = groups[identity]
        if len(obs) < 2:
            warnings.warn(f"identity {identity!r} has a single usable face; skipped", stacklevel=2)
            continue
        pairs = _select_pairs(len(obs), g)
        vals = [
            _cosine(obs[i].embedding, obs[j].embedding) * float(perceptual.distance(obs[i].crop, obs[j].crop))
            for i, j in pairs
        ]
        per_identity.append(float(np.mean(vals)))
        total += len(pairs)
    if not per_identity:
        raise EvalError("no identity had two usable faces")
    return MetricValue(float(np.mean(per_identity)), total)


def identity_diversity(grid: EvalGrid, face: FaceBackend, *, cache: _ImageCache | None = None) -> MetricValue:
    """1 - mean pairwise face similarity between anchor portraits across identities."""
    if len(grid.identities) < 2:
        raise EvalError("identity diversity needs at least two identities")
    cache = cache or _ImageCache(grid)
    embeddings = []
    for identity in grid.identities:
        found = face.detect(cache(identity, grid.anchor_prompt))
        if found is None:
            raise EvalError(f"no detectable face in the anchor portrait of {identity!r}")
        embeddings.append(found.embedding)
    pairs = _select_pairs(len(embeddings), 0)
    sims = [_cosine(embeddings[i], embeddings[j]) for i, j in pairs]
    return MetricValue(float(1.0 - np.mean(sims)), len(pairs))


def fid_from_features(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between two Gaussian fits of feature sets."""
    fa, fb = np.asarray(features_a, dtype=np.float64), np.asarray(features_b, dtype=np.float64)
    if fa.ndim != 2 or fb.ndim != 2 or fa.shape[1] != fb.shape[1]:
        raise EvalError("feature sets must be (n, k) arrays with matching k")
    if fa.shape[0] < 2 or fb.shape[0] < 2:
        raise EvalError("need at least two samples per side to fit a covariance")
    mu_a, mu_b = fa.mean(axis=0), fb.mean(axis=0)
    cov_a = np.cov(fa, rowvar=False)
    cov_b = np.cov(fb, rowvar=False)
    covmean = linalg.sqrtm(cov_a @ cov_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu_a - mu_b
    fid = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(covmean))
    return max(fid, 0.0)


def image_quality_fid(
    grid: EvalGrid,
    reference: EvalGrid,
    backend: FeatureBackend,
    *,
    cache: _ImageCache | None = None,
) -> MetricValue:
    """FID between all grid images and all reference images. Sizes may differ."""
    cache = cache or _ImageCache(grid)
    ref_cache = _ImageCache(reference)
    fa = np.stack([backend.features(cache(i, p)) for i in grid.identities for p in grid.prompts])
    fb = np.stack(
        [backend.features(ref_cache(i, p)) for i in reference.identities for p in reference.prompts]
    )
    return MetricValue(fid_from_features(fa, fb), fa.shape[0] + fb.shape[0])


@dataclass
class MetricsReport:
    subject_consistency: float
    identity_consistency: float
    editability: float
    face_diversity: float
    trusted_face_diversity: float
    identity_diversity: float | None = None
    image_quality_fid: float | None = None
    samples: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        flat: dict = {}
        for key in (
            "subject_consistency",
            "identity_consistency",
            "editability",
            "face_diversity",
            "trusted_face_diversity",
            "identity_diversity",
            "image_quality_fid",
        ):
            flat[key] = getattr(self, key)
            flat[f"{key}_samples"] = self.samples.get(key)
        return json.dumps(flat, indent=2, sort_keys=True)


@dataclass
class MetricBackends:
    image_text: ImageTextBackend
    face: FaceBackend
    perceptual: PerceptualBackend
    features: FeatureBackend


def compute_report(
    grid: EvalGrid, backends: MetricBackends, *, reference: EvalGrid | None = None
) -> MetricsReport:
    """All metrics on one grid; FID only when a reference grid is given."""
    cache = _ImageCache(grid)
    parts: dict[str, MetricValue] = {
        "subject_consistency": subject_consistency(grid, backends.image_text, cache=cache),
        "identity_consistency": identity_consistency(grid, backends.face, cache=cache),
        "editability": editability(grid, backends.image_text, cache=cache),
        "face_diversity": face_diversity(grid, backends.face, backends.perceptual, cache=cache),
        "trusted_face_diversity": trusted_face_diversity(grid, backends.face, backends.perceptual, cache=cache),
    }
    if len(grid.identities) >= 2:
        parts["identity_diversity"] = identity_diversity(grid, backends.face, cache=cache)
    if reference is not None:
        parts["image_quality_fid"] = image_quality_fid(grid, reference, backends.features, cache=cache)
    return MetricsReport(
        subject_consistency=parts["subject_consistency"].value,
        identity_consistency=parts["identity_consistency"].value,
        editability=parts["editability"].value,
        face_diversity=parts["face_diversity"].value,
        trusted_face_diversity=parts["trusted_face_diversity"].value,
        identity_diversity=parts["identity_diversity"].value if "identity_diversity" in parts else None,
        image_quality_fid=parts["image_quality_fid"].value if "image_quality_fid" in parts else None,
        samples={k: v.samples for k, v in parts.items()},
    )
