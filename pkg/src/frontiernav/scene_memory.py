"""Object-centric knowledge buffer with novelty-gated insertion."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .embedding import DEFAULT_DIM, embed_label
from .world import Node, WorldGraph

NOVELTY_CAP = 10.0
NOVELTY_THRESHOLD = 2.0
_EPS = 1e-9

VISITED_ROLE = "visited"
FRONTIER_ROLE = "frontier"


class SceneMemoryError(ValueError):
    pass


def _objects_knowledge(objects: Iterable[str], d: int, seed: int, top_k: int | None) -> np.ndarray:
    objs = list(objects)
    if top_k is not None:
        objs = objs[:top_k]
    k = np.zeros(d)
    for label in objs:
        k = k + embed_label(label, d, seed)
    return k


def build_knowledge(
    node: Node,
    role: str = VISITED_ROLE,
    target: str | None = None,
    *,
    d: int = DEFAULT_DIM,
    seed: int = 0,
    top_k: int | None = None,
) -> np.ndarray:
    """Summed label embeddings of a viewpoint.

    ``role="visited"`` sums the non-candidate views of ``node``; ``role="frontier"``
    sums the single view of ``node`` that points at ``target``.
    """
    if role == VISITED_ROLE:
        k = np.zeros(d)
        for view in node.non_candidate_views():
            k = k + _objects_knowledge(view.objects, d, seed, top_k)
        return k
    if role == FRONTIER_ROLE:
        if target is None:
            raise SceneMemoryError("frontier observation needs a target node")
        view = node.view_towards(target)
        if view is None:
            return np.zeros(d)
        return _objects_knowledge(view.objects, d, seed, top_k)
    raise SceneMemoryError(f"unknown role {role!r}")


def novelty(k: np.ndarray, m: np.ndarray | None, cap: float = NOVELTY_CAP) -> float:
    """Inverse cosine similarity ``|k||m| / (k.m)``, clamped to [0, cap].

    Empty reference (``m is None``) and non-positive dot products return the
    cap; a zero ``k`` against a non-empty reference is not novel (0).
    """
    if m is None:
        return cap
    nk = float(np.linalg.norm(k))
    if nk == 0.0:
        return 0.0
    dot = float(np.dot(k, m))
    if dot <= _EPS:
        return cap
    value = nk * float(np.linalg.norm(m)) / dot
    return min(max(value, 0.0), cap)


class SceneObjectMemory:
    def __init__(self, d: int = DEFAULT_DIM, seed: int = 0, cap: float = NOVELTY_CAP,
                 threshold: float = NOVELTY_THRESHOLD, top_k: int | None = None):
        self.d = d
        self.seed = seed
        self.cap = cap
        self.threshold = threshold
        self.top_k = top_k
        self.entries: list[tuple[str, np.ndarray]] = []
        self.frontier_knowledge: dict[str, np.ndarray] = {}
        self._observed: set[tuple[str, str]] = set()

    def __contains__(self, node: object) -> bool:
        return any(n == node for n, _ in self.entries)

    def knowledge(self, node: Node, role: str = VISITED_ROLE, target: str | None = None) -> np.ndarray:
        return build_knowledge(node, role, target, d=self.d, seed=self.seed, top_k=self.top_k)

    def memory_sum(self, exclude: str | None = None) -> np.ndarray | None:
        vecs = [k for n, k in self.entries if n != exclude]
        if not vecs:
            return None
        return np.sum(vecs, axis=0)

    def novelty_score(self, k: np.ndarray, exclude: str | None = None) -> float:
        if not np.all(np.isfinite(k)):
            raise SceneMemoryError("knowledge vector has non-finite entries")
        return novelty(k, self.memory_sum(exclude), self.cap)

    def maybe_insert(self, node: str, k: np.ndarray) -> bool:
        if node in self:
            raise SceneMemoryError(f"node {node!r} already has an entry")
        if not self.entries or self.novelty_score(k) > self.threshold:
            self.entries.append((node, np.asarray(k, dtype=float)))
            return True
        return False

    def observe_frontier(self, observer: Node, frontier: str) -> None:
        """Add the objects seen from ``observer`` towards ``frontier``; each
        (observer, frontier) pair contributes once."""
        key = (observer.id, frontier)
        if key in self._observed:
            return
        self._observed.add(key)
        k = self.knowledge(observer, FRONTIER_ROLE, frontier)
        self.frontier_knowledge[frontier] = self.frontier_knowledge.get(frontier, np.zeros(self.d)) + k

    def knowledge_sequence(self, world: WorldGraph, path: list[str], visited: Iterable[str] = ()) -> list[np.ndarray]:
        """Knowledge vectors along a test path: visited viewpoints contribute
        their own knowledge, the terminal frontier its accumulated partial view."""
        if not path:
            raise SceneMemoryError("empty path")
        for n in path:
            if n not in world.nodes:
                raise SceneMemoryError(f"path node {n!r} not in world")
        visited = set(visited)
        seq = []
        for i, n in enumerate(path):
            last = i == len(path) - 1
            if last and n not in visited and n in self.frontier_knowledge:
                seq.append(self.frontier_knowledge[n])
            else:
                seq.append(self.knowledge(world.nodes[n]))
        return seq

    def to_dict(self) -> dict:
        return {
            "entries": [[n, [round(float(x), 9) for x in k]] for n, k in self.entries],
            "frontiers": sorted(self.frontier_knowledge),
        }

