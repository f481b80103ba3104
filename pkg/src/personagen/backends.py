"""Deterministic stub measurement backends.

These satisfy the evaluation protocols with cheap, seeded projections of
pixel content: good enough to exercise every metric's algebra and ordering
on toy renders, useless as perceptual judges. Real CLIP/face/LPIPS/Inception
adapters plug into the same protocols.
"""
from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

from .evaluation import FaceObservation, MetricBackends

_GRAY = np.array([0.299, 0.587, 0.114])


def _to_gray(image: np.ndarray, size: int) -> np.ndarray:
    """Downsample to (size, size) grayscale in [0, 1]. Pillow does the resize."""
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    img = Image.fromarray(arr.astype(np.uint8)).resize((size, size), Image.BILINEAR)
    return (np.asarray(img, dtype=np.float64) @ _GRAY) / 255.0


class StubImageTextBackend:
    """Image and text embeddings in one shared toy space."""

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim = dim
        rng = np.random.default_rng(seed + 101)
        self._proj = rng.standard_normal((dim, 256)) / 16.0

    def _normalize(self, v: np.ndarray) -> np.ndarray:
        n = np.linalg.norm(v)
        return v / n if n > 0 else v

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        flat = _to_gray(image, 16).reshape(-1)
        return self._normalize(self._proj @ flat)

    def embed_text(self, text: str) -> np.ndarray:
        counts = np.zeros(256)
        for word in text.lower().split():
            h = hashlib.sha1(word.encode("utf-8")).digest()
            counts[h[0]] += 1.0
        return self._normalize(self._proj @ counts)


class StubFaceBackend:
    """Treats the center crop as the face; blank centers count as no face."""

    def __init__(self, dim: int = 24, seed: int = 0, min_std: float = 1.0):
        self.dim = dim
        self.min_std = min_std
        rng = np.random.default_rng(seed + 202)
        self._proj = rng.standard_normal((dim, 64)) / 8.0

    def detect(self, image: np.ndarray) -> FaceObservation | None:
        arr = np.asarray(image)
        h, w = arr.shape[0], arr.shape[1]
        crop = arr[h // 4 : h - h // 4, w // 4 : w - w // 4]
        if float(np.std(crop)) < self.min_std:
            return None
        flat = _to_gray(crop, 8).reshape(-1)
        emb = self._proj @ flat
        n = np.linalg.norm(emb)
        if n == 0:
            return None
        return FaceObservation(crop=crop, embedding=emb / n)


class StubPerceptualBackend:
    """Mean absolute difference of downsampled grayscale; zero iff identical content."""

    def __init__(self, size: int = 8):
        self.size = size

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.abs(_to_gray(a, self.size) - _to_gray(b, self.size)).mean())


class StubFeatureBackend:
    """Fixed random projection of downsampled pixels, for distribution metrics."""

    def __init__(self, dim: int = 16, seed: int = 0):
        self.dim = dim
        rng = np.random.default_rng(seed + 303)
        self._proj = rng.standard_normal((dim, 64)) / 8.0

    def features(self, image: np.ndarray) -> np.ndarray:
        return self._proj @ _to_gray(image, 8).reshape(-1)


def stub_backends(seed: int = 0) -> MetricBackends:
    """The full stub backend bundle used by tests, demos, and the CLI default."""
    return MetricBackends(
        image_text=StubImageTextBackend(seed=seed),
        face=StubFaceBackend(seed=seed),
        perceptual=StubPerceptualBackend(),
        features=StubFeatureBackend(seed=seed),
    )
