"""Text-to-vector interface for sentence embeddings, with a file cache.

The pipeline only needs ``embed(texts) -> (N, dim)``. Implementations:
a deterministic hash-seeded stand-in for offline runs and tests, a JSON
file cache wrapper keyed by text hash, and a lazy adapter over the
``sentence-transformers`` package for real semantic vectors.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


class EmbeddingError(Exception):
    pass


class HashEmbeddingBackend:
    """Deterministic pseudo-embeddings: one seeded draw per distinct text."""

    def __init__(self, dim: int = 32):
        self.dim = dim

    def embed(self, texts: list[str]) -> np.ndarray:
        rows = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "big")
            rows.append(np.random.default_rng(seed).normal(size=self.dim))
        return np.stack(rows) if rows else np.zeros((0, self.dim))


class SentenceTransformerBackend:
    """all-MiniLM-style semantic vectors; imports lazily on first use."""

    def __init__(self, model_name: str = "all-MiniLM-L6-v2"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EmbeddingError(
                "sentence-transformers is not installed; use a cache file or "
                "the hash backend instead"
            ) from exc
        self._model = SentenceTransformer(model_name)

    def embed(self, texts: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode(texts, show_progress_bar=False))


class CachedEmbeddings:
    """Wraps a backend with a JSON cache keyed by text hash.

    With ``backend=None`` the cache is the only source; a miss then
    raises with instructions, so prepared caches fully replace live
    calls.
    """

    def __init__(self, cache_path, backend=None):
        self.cache_path = Path(cache_path)
        self.backend = backend
        self._cache: dict[str, list[float]] = {}
        if self.cache_path.exists():
            self._cache = json.loads(self.cache_path.read_text("utf-8"))

    @staticmethod
    def _key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def embed(self, texts: list[str]) -> np.ndarray:
        missing = [t for t in texts if self._key(t) not in self._cache]
        if missing:
            if self.backend is None:
                raise EmbeddingError(
                    f"{len(missing)} texts missing from embedding cache "
                    f"{self.cache_path} and no live backend configured; "
                    "populate the cache first"
                )
            vectors = self.backend.embed(missing)
            for text, vec in zip(missing, vectors):
                self._cache[self._key(text)] = [float(v) for v in vec]
            self.flush()
        return np.array([self._cache[self._key(t)] for t in texts])

    def flush(self) -> None:
        self.cache_path.parent.mkdir(parents=True, exist_ok=True)
        self.cache_path.write_text(json.dumps(self._cache), encoding="utf-8")


def embed_steps(step_texts: list[str], backend) -> np.ndarray:
    """One fixed-dimension vector per step text."""
    if not step_texts:
        raise EmbeddingError("no step texts to embed")
    vectors = backend.embed(step_texts)
    if vectors.shape[0] != len(step_texts):
        raise EmbeddingError("embedding backend returned wrong row count")
    return vectors
