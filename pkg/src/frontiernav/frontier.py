"""Frontier ranking by action, recency, novelty and instruction alignment."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .action_memory import ActionMemory
from .dtw import DEFAULT_MIN_SIZE, DEFAULT_RADIUS, LENGTH_PRODUCT, alignment_score, extract_entities
from .scene_memory import SceneObjectMemory, novelty
from .world import InstructionCase, WorldGraph, shortest_path

MEMORY_SUM = "memory_sum"
CURRENT_VIEWPOINT = "current_viewpoint"


class NoFrontier(ValueError):
    pass


class FrontierUnreachable(RuntimeError):
    pass


@dataclass
class SelectorParams:
    gamma: float = 0.1
    act_filter: float = 0.5
    novelty_reference: str = MEMORY_SUM
    align_norm: str = LENGTH_PRODUCT
    radius: int = DEFAULT_RADIUS
    min_size: int = DEFAULT_MIN_SIZE

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.act_filter < 0:
            raise ValueError("act_filter must be >= 0")
        if self.novelty_reference not in (MEMORY_SUM, CURRENT_VIEWPOINT):
            raise ValueError(f"unknown novelty_reference {self.novelty_reference!r}")


@dataclass
class FrontierScore:
    node: str
    s_act: float
    s_recency: float
    s_novel: float
    s_align: float
    s_final: float = 0.0
    s_norm: float = 0.0
    test_path: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def recency_score(t_i: int, t: int, gamma: float = 0.1) -> float:
    if t_i > t:
        raise ValueError(f"observation step {t_i} is after query step {t}")
    return math.exp(gamma * (t_i - t))


def combine_scores(scores: list[FrontierScore]) -> list[FrontierScore]:
    """Fill ``s_final``/``s_norm`` and sort descending (ties by node id).

    If every product is zero the ranking falls back to recency alone.
    """
    for s in scores:
        s.s_final = s.s_act * s.s_recency * (s.s_novel + s.s_align)
    total = sum(s.s_final for s in scores)
    if total > 0:
        for s in scores:
            s.s_norm = s.s_final / total
        key = lambda s: (-s.s_final, s.node)
    else:
        rec = sum(s.s_recency for s in scores)
        for s in scores:
            s.s_norm = s.s_recency / rec
        key = lambda s: (-s.s_recency, s.node)
    return sorted(scores, key=key)


def route_to_frontier(am: ActionMemory, world: WorldGraph, start: str, frontier: str) -> list[str]:
    allowed = set(am.visited()) | {frontier}
    if start not in allowed:
        return [frontier]
    found = shortest_path(am.graph(world, allowed), start, frontier)
    return found.path if found.found else [frontier]


def rank_frontiers(
    am: ActionMemory,
    som: SceneObjectMemory,
    world: WorldGraph,
    instr: InstructionCase,
    start: str,
    t: int,
    params: SelectorParams | None = None,
    current: str | None = None,
    entities: list[np.ndarray] | None = None,
) -> list[FrontierScore]:
    params = params or SelectorParams()
    eligible = am.frontiers(t)
    if not eligible:
        raise NoFrontier(f"no frontier observed before step {t}")
    if entities is None:
        entities = extract_entities(instr, world.vocabulary, som.d, som.seed)
    if params.novelty_reference == CURRENT_VIEWPOINT and current is not None:
        reference = som.knowledge(world.nodes[current])
    else:
        reference = None

    best_act = max(a for _, _, a in eligible)
    # alignment only for frontiers within act_filter of the strongest one
    aligned = {n for n, _, a in eligible if best_act > 0 and a > params.act_filter * best_act}
    if not aligned:
        aligned = {n for n, _, _ in eligible}

    visited = am.visited()
    scores = []
    for node, t_obs, s_act in eligible:
        k = som.frontier_knowledge.get(node, np.zeros(som.d))
        if params.novelty_reference == CURRENT_VIEWPOINT and reference is not None:
            s_novel = novelty(k, reference, som.cap)
        else:
            s_novel = som.novelty_score(k, exclude=node)
        s = FrontierScore(node, s_act, recency_score(t_obs, t, params.gamma), s_novel, 0.0)
        if node in aligned:
            s.test_path = route_to_frontier(am, world, start, node)
            seq = som.knowledge_sequence(world, s.test_path, visited)
            s.s_align = alignment_score(seq, entities, params.align_norm, params.radius, params.min_size)
        scores.append(s)
    floor = min(s.s_align for s in scores if s.node in aligned)
    for s in scores:
        if s.node not in aligned:
            s.s_align = floor
    return combine_scores(scores)


def transit_plan(am: ActionMemory, world: WorldGraph, current: str, target: str) -> list[str]:
    allowed = set(am.visited()) | {current, target}
    found = shortest_path(am.graph(world, allowed), current, target) if current in am and target in am else None
    if found is None or not found.found:
        raise FrontierUnreachable(f"{target!r} is not reachable from {current!r} through observed nodes")
    return found.path


def select_optimal_frontier(ranked: list[FrontierScore], am: ActionMemory, world: WorldGraph, current: str) -> tuple[str, list[str]]:
    if not ranked:
        raise NoFrontier("empty ranking")
    top = ranked[0].node
    return top, transit_plan(am, world, current, top)
