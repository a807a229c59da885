"""Idea vectors: deterministic hashed TF-IDF embedding and external-vector import.

The built-in vectorizer stands in for a trained document-embedding model: it
fits a vocabulary with smoothed IDF weights, feature-hashes tokens into a
fixed number of buckets with a signed, seeded 64-bit hash, and L2-normalizes
the result. Identical inputs give bitwise-identical vectors on any platform.
Externally computed vectors can be loaded from JSONL instead.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError

DEFAULT_HASH_SEED = 9172023


def _hash64(token: str, seed: int, person: bytes) -> int:
    digest = blake2b(token.encode("utf-8"), digest_size=8,
                     key=seed.to_bytes(8, "big"), person=person)
    return int.from_bytes(digest.digest(), "big")


@dataclass(frozen=True)
class VectorizerModel:
    """Fitted vocabulary with IDF weights and hashing parameters."""

    dim: int
    min_count: int
    hash_seed: int
    idf: dict[str, float]
    vocabulary: frozenset[str] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vocabulary", frozenset(self.idf))

    def bucket(self, token: str) -> int:
        return _hash64(token, self.hash_seed, b"bucket") % self.dim

    def sign(self, token: str) -> float:
        return 1.0 if _hash64(token, self.hash_seed, b"sign") & 1 else -1.0


def fit_vectorizer(corpus_tokens: Sequence[Sequence[str]], dim: int,
                   min_count: int, hash_seed: int = DEFAULT_HASH_SEED) -> VectorizerModel:
    """Fit vocabulary and IDF weights over tokenized documents.

    A token is retained when its total occurrence count across the corpus is
    at least ``min_count``. idf(w) = ln((1+N)/(1+df(w))) + 1 with N the number
    of documents and df(w) the number of documents containing w.
    """
    if dim < 1:
        raise DataFormatError(f"dim must be >= 1, got {dim}")
    if min_count < 1:
        raise DataFormatError(f"min_count must be >= 1, got {min_count}")
    totals: Counter[str] = Counter()
    df: Counter[str] = Counter()
    n_docs = 0
    for tokens in corpus_tokens:
        n_docs += 1
        totals.update(tokens)
        df.update(set(tokens))
    idf = {
        w: math.log((1 + n_docs) / (1 + df[w])) + 1.0
        for w, count in totals.items()
        if count >= min_count
    }
    return VectorizerModel(dim=dim, min_count=min_count, hash_seed=hash_seed, idf=idf)


def embed(model: VectorizerModel, tokens: Sequence[str]) -> np.ndarray:
    """Embed one token list as an L2-normalized vector (zero stays zero).

    Each in-vocabulary token contributes tf * idf * sign to its hash bucket;
    tokens are accumulated in sorted order so the float sum is reproducible.
    """
    vec = np.zeros(model.dim)
    tf = Counter(tokens)
    for token in sorted(tf):
        if token in model.vocabulary:
            vec[model.bucket(token)] += tf[token] * model.idf[token] * model.sign(token)
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def embed_all(model: VectorizerModel, docs: Iterable[tuple[str, Sequence[str]]]) -> dict[str, np.ndarray]:
    """Embed (id, tokens) pairs into an id -> vector map."""
    return {doc_id: embed(model, tokens) for doc_id, tokens in docs}


def load_external_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Load a vectors.jsonl file of {"id": ..., "vec": [...]} lines.

    All lines must share one dimension; duplicate ids and non-finite values
    are fatal.
    """
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                post_id = obj["id"]
                raw = obj["vec"]
                if not isinstance(post_id, str) or not isinstance(raw, list):
                    raise ValueError("id must be a string and vec a list")
            except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad vector line ({exc})") from exc
            vec = np.asarray(raw, dtype=float)
            if vec.ndim != 1:
                raise DataFormatError(f"{path}:{lineno}: vec must be a flat list")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DataFormatError(
                    f"{path}:{lineno}: dimension {vec.size} != {dim} seen earlier"
                )
            if not np.all(np.isfinite(vec)):
                raise DataFormatError(f"{path}:{lineno}: non-finite component for {post_id!r}")
            if post_id in vectors:
                raise DataFormatError(f"{path}:{lineno}: duplicate id {post_id!r}")
            vectors[post_id] = vec
    return vectors


def write_vectors(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    """Write an id -> vector map as vectors.jsonl (ids in sorted order)."""
    with open(path, "w", encoding="utf-8") as fh:
        for post_id in sorted(vectors):
            fh.write(json.dumps({"id": post_id, "vec": [float(x) for x in vectors[post_id]]},
                                separators=(",", ":")) + "\n")
