"""Deterministic synthetic word embeddings for object labels.

Labels from the same room category share a common direction, so objects that
co-occur (chair, table) end up closer than objects from different rooms.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Mapping

import numpy as np

DEFAULT_DIM = 32

DEFAULT_VOCABULARY: dict[str, tuple[str, ...]] = {
    "bathroom": ("toilet", "sink", "bathtub", "shower", "towel", "mirror"),
    "bedroom": ("bed", "pillow", "wardrobe", "nightstand", "lamp", "dresser"),
    "dining": ("chair", "table", "plate", "vase", "candle", "sideboard"),
    "kitchen": ("fridge", "stove", "oven", "counter", "microwave", "kettle"),
    "living": ("sofa", "tv", "coffee table", "rug", "fireplace", "picture"),
    "office": ("desk", "computer", "bookshelf", "office chair", "printer", "whiteboard"),
    "hallway": ("door", "stairs", "coat rack", "shoe rack", "painting", "window"),
}

_SHARED_WEIGHT = 1.0
_OWN_WEIGHT = 1.0


def stable_seed(*parts) -> int:
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def category_of(label: str, vocabulary: Mapping[str, tuple[str, ...]] | None = None) -> str:
    vocab = DEFAULT_VOCABULARY if vocabulary is None else vocabulary
    for cat in sorted(vocab):
        if label in vocab[cat]:
            return cat
    return f"label:{label}"


@lru_cache(maxsize=None)
def _unit(key: tuple, d: int) -> np.ndarray:
    v = np.random.default_rng(stable_seed(*key)).standard_normal(d)
    return v / np.linalg.norm(v)


@lru_cache(maxsize=4096)
def _embed_cached(label: str, d: int, seed: int, category: str) -> np.ndarray:
    v = _SHARED_WEIGHT * _unit(("category", category, seed), d) + _OWN_WEIGHT * _unit(("label", label, seed), d)
    v = v / np.linalg.norm(v)
    v.setflags(write=False)
    return v


def embed_label(label: str, d: int = DEFAULT_DIM, seed: int = 0, vocabulary: Mapping[str, tuple[str, ...]] | None = None) -> np.ndarray:
    """Unit-norm embedding of ``label``; a pure function of its arguments."""
    if not label:
        raise ValueError("label must be non-empty")
    return _embed_cached(label, d, seed, category_of(label, vocabulary))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
