"""Dynamic time warping: exact, FastDTW, and the entity-alignment score."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import DEFAULT_DIM, embed_label

DEFAULT_RADIUS = 2
DEFAULT_MIN_SIZE = 16

LENGTH_PRODUCT = "length_product"
NORM_PRODUCT = "norm_product"


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DtwResult:
    cost: float
    path: list[tuple[int, int]]


def as_sequence(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or len(arr) == 0:
        raise ValueError("sequence must be a non-empty list of scalars or vectors")
    return arr


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_sequence(a), as_sequence(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    return a, b


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def _dtw(a: np.ndarray, b: np.ndarray, window: list[tuple[int, int]] | None = None) -> DtwResult:
    return dtw_from_matrix(_distances(a, b), window)


def dtw_from_matrix(cost_matrix, window: list[tuple[int, int]] | None = None) -> DtwResult:
    """DTW over a precomputed ``n x m`` local-distance matrix."""
    dist = np.asarray(cost_matrix, dtype=float).tolist()
    n, m = len(dist), len(dist[0])
    if window is None:
        window = [(0, m - 1)] * n
    inf = math.inf
    acc = [[inf] * m for _ in range(n)]
    for i in range(n):
        lo, hi = window[i]
        row, drow = acc[i], dist[i]
        prev = acc[i - 1] if i else None
        for j in range(lo, hi + 1):
            if i == 0 and j == 0:
                row[0] = drow[0]
                continue
            best = inf
            if prev is not None:
                if j and prev[j - 1] < best:
                    best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
            if j and row[j - 1] < best:
                best = row[j - 1]
            row[j] = best + drow[j]
    cost = acc[n - 1][m - 1]
    if math.isinf(cost):
        raise RuntimeError("warping window does not connect the corners")
    # tie-break on the way back: diagonal, then vertical, then horizontal
    i, j = n - 1, m - 1
    path = [(i, j)]
    while i or j:
        options = []
        if i and j:
            options.append((acc[i - 1][j - 1], 0, i - 1, j - 1))
        if i:
            options.append((acc[i - 1][j], 1, i - 1, j))
        if j:
            options.append((acc[i][j - 1], 2, i, j - 1))
        _, _, i, j = min(options)
        path.append((i, j))
    path.reverse()
    return DtwResult(cost, path)


def dtw_exact(a, b) -> DtwResult:
    a, b = _pair(a, b)
    return _dtw(a, b)


def _coarsen(x: np.ndarray) -> np.ndarray:
    n = len(x)
    half = n // 2
    out = (x[: 2 * half : 2] + x[1 : 2 * half : 2]) / 2.0
    if n % 2:
        out = np.vstack([out, x[-1:]])
    return out


def _expand_window(path: list[tuple[int, int]], n: int, m: int, radius: int) -> list[tuple[int, int]]:
    lo = [m] * n
    hi = [-1] * n
    cn, cm = (n + 1) // 2, (m + 1) // 2
    for ci, cj in path:
        for di in range(-radius, radius + 1):
            ii = ci + di
            if not 0 <= ii < cn:
                continue
            jlo = max(cj - radius, 0) * 2
            jhi = min(min(cj + radius, cm - 1) * 2 + 1, m - 1)
            for i in (2 * ii, 2 * ii + 1):
                if i < n:
                    lo[i] = min(lo[i], jlo)
                    hi[i] = max(hi[i], jhi)
    lo[0] = 0
    hi[n - 1] = m - 1
    for i in range(n - 1):
        # rows must stay connected by a vertical or diagonal step
        if lo[i + 1] > hi[i] + 1:
            lo[i + 1] = hi[i] + 1
        if hi[i + 1] < lo[i]:
            hi[i + 1] = lo[i]
    return list(zip(lo, hi))


def _fastdtw(a: np.ndarray, b: np.ndarray, radius: int, min_size: int) -> DtwResult:
    if len(a) < min_size or len(b) < min_size:
        return _dtw(a, b)
    low = _fastdtw(_coarsen(a), _coarsen(b), radius, min_size)
    window = _expand_window(low.path, len(a), len(b), radius)
    return _dtw(a, b, window)


def fastdtw(a, b, radius: int = DEFAULT_RADIUS, min_size: int = DEFAULT_MIN_SIZE) -> DtwResult:
    """Approximate DTW by coarsening, projecting the coarse path, and refining
    inside a ``radius`` window. Falls back to exact DTW below ``min_size``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    a, b = _pair(a, b)
    return _fastdtw(a, b, radius, max(min_size, radius + 2))


def alignment_score(
    path_knowledge: Sequence,
    entities: Sequence,
    align_norm: str = LENGTH_PRODUCT,
    radius: int = DEFAULT_RADIUS,
    min_size: int = DEFAULT_MIN_SIZE,
) -> float:
    a, b = _pair(path_knowledge, entities)
    cost = fastdtw(a, b, radius, min_size).cost
    if align_norm == LENGTH_PRODUCT:
        scale = len(a) * len(b)
    elif align_norm == NORM_PRODUCT:
        scale = float(np.linalg.norm(a.sum(axis=0)) * np.linalg.norm(b.sum(axis=0)))
        if scale <= 1e-12:
            scale = len(a) * len(b)
    else:
        raise ValueError(f"unknown align_norm {align_norm!r}")
    return math.exp(-cost / scale)


class NoEntities(ValueError):
    pass


def match_entities(text: str, vocabulary: Sequence[str]) -> list[str]:
    """Vocabulary labels found in ``text``, in order, preferring the longest
    multi-token label at each position."""
    tokens = re.findall(r"[a-z0-9]+", text.lower())
    by_tokens = {}
    for label in vocabulary:
        key = tuple(re.findall(r"[a-z0-9]+", label.lower()))
        if key:
            by_tokens.setdefault(key, label)
    longest = max((len(k) for k in by_tokens), default=0)
    found = []
    i = 0
    while i < len(tokens):
        for size in range(min(longest, len(tokens) - i), 0, -1):
            key = tuple(tokens[i : i + size])
            if key in by_tokens:
                found.append(by_tokens[key])
                i += size
                break
        else:
            i += 1
    return found


def extract_entities(instr, vocabulary: Sequence[str] = (), d: int = DEFAULT_DIM, seed: int = 0) -> list[np.ndarray]:
    labels = list(instr.entities) or match_entities(instr.text, vocabulary)
    if not labels:
        raise NoEntities(f"instruction {instr.id!r} has no recognisable entities")
    return [embed_label(label, d, seed) for label in labels]
