"""Directed action-score graph over visited viewpoints and frontiers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

VISITED = "visited"
FRONTIER = "frontier"


class ActionMemoryError(ValueError):
    pass


@dataclass
class MemNode:
    id: str
    t_obs: int
    flag: str = FRONTIER


class ActionMemory:
    def __init__(self):
        self.nodes: dict[str, MemNode] = {}
        self.edges: dict[tuple[str, str], float] = {}
        self._in: dict[str, set[str]] = {}
        self.last_visit: int | None = None
        self.last_decision: int | None = None

    def __contains__(self, node: object) -> bool:
        return node in self.nodes

    def is_visited(self, node: str) -> bool:
        n = self.nodes.get(node)
        return n is not None and n.flag == VISITED

    def visited(self) -> list[str]:
        return sorted(n for n, m in self.nodes.items() if m.flag == VISITED)

    def _check_step(self, t: int, decision: bool) -> None:
        # passive visits may share a step; scored visits must advance
        if self.last_visit is not None and t < self.last_visit:
            raise ActionMemoryError(f"visit step {t} is before previous step {self.last_visit}")
        if decision and self.last_decision is not None and t <= self.last_decision:
            raise ActionMemoryError(f"visit step {t} is not after previous scored step {self.last_decision}")

    def _touch(self, node: str, t: int) -> MemNode:
        m = self.nodes.get(node)
        if m is None:
            m = self.nodes[node] = MemNode(node, t)
            self._in[node] = set()
        else:
            m.t_obs = max(m.t_obs, t)
        return m

    def _mark_visited(self, node: str, t: int) -> None:
        self._touch(node, t).flag = VISITED
        for src in self._in[node]:
            self.edges[(src, node)] = 0.0

    def _set_edge(self, u: str, v: str, score: float) -> None:
        self.edges[(u, v)] = 0.0 if self.is_visited(v) else score
        self._in[v].add(u)

    def record_visit(self, current: str, neighbors: Iterable[tuple[str, float]], t: int) -> "ActionMemory":
        """Visit ``current`` at step ``t`` and store the proposal score of each
        outgoing candidate; edges into visited nodes are pinned to zero."""
        neighbors = list(neighbors)
        for nbr, score in neighbors:
            if score < 0:
                raise ActionMemoryError(f"negative action score {score} for edge ({current}, {nbr})")
        self._check_step(t, decision=True)
        self._mark_visited(current, t)
        for nbr, score in neighbors:
            self._touch(nbr, t)
            self._set_edge(current, nbr, float(score))
        self.last_visit = self.last_decision = t
        return self

    def observe(self, current: str, neighbors: Iterable[str], t: int) -> "ActionMemory":
        """Visit without new action scores (plan execution): timestamps and
        frontier flags refresh, existing edge scores are kept."""
        self._check_step(t, decision=False)
        self._mark_visited(current, t)
        for nbr in neighbors:
            self._touch(nbr, t)
            if (current, nbr) not in self.edges:
                self._set_edge(current, nbr, 0.0)
        self.last_visit = t
        return self

    def accumulated_action_score(self, f: str) -> float:
        m = self.nodes.get(f)
        if m is None or m.flag != FRONTIER:
            raise ActionMemoryError(f"{f!r} is not a frontier")
        return sum(self.edges[(u, f)] for u in sorted(self._in[f]))

    def frontiers(self, t: int) -> list[tuple[str, int, float]]:
        return [
            (n, m.t_obs, self.accumulated_action_score(n))
            for n, m in sorted(self.nodes.items())
            if m.flag == FRONTIER and m.t_obs < t
        ]

    def graph(self, world, allowed: Iterable[str] | None = None) -> "MemoryGraph":
        return MemoryGraph(self, world, allowed)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": m.id, "t_obs": m.t_obs, "flag": m.flag} for _, m in sorted(self.nodes.items())],
            "edges": [[u, v, s] for (u, v), s in sorted(self.edges.items())],
        }


class MemoryGraph:
    """Undirected view of the observed adjacency, weighted by world distances."""

    def __init__(self, mem: ActionMemory, world, allowed: Iterable[str] | None = None):
        self.world = world
        self.allowed = set(mem.nodes) if allowed is None else set(allowed) & set(mem.nodes)
        adj: dict[str, set[str]] = {n: set() for n in self.allowed}
        for u, v in mem.edges:
            if u in self.allowed and v in self.allowed:
                adj[u].add(v)
                adj[v].add(u)
        self.adj = adj

    def __contains__(self, node: object) -> bool:
        return node in self.allowed

    def neighbors(self, node: str) -> list[tuple[str, float]]:
        return [(v, self.world.weight(node, v)) for v in sorted(self.adj[node])]
