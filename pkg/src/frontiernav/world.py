"""Graph-world environment: types, JSON interchange, seeded generation, geodesics."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Protocol, Sequence

import numpy as np

from .embedding import DEFAULT_VOCABULARY


class WorldError(ValueError):
    """Raised for malformed world files or invariant violations."""


class InfeasibleConfig(ValueError):
    pass


@dataclass(frozen=True)
class View:
    heading: float
    target: str | None = None
    objects: tuple[str, ...] = ()

    @property
    def is_candidate(self) -> bool:
        return self.target is not None


@dataclass(frozen=True)
class Node:
    id: str
    position: tuple[float, float, float]
    views: tuple[View, ...] = ()
    room: str | None = None

    def view_towards(self, target: str) -> View | None:
        for view in self.views:
            if view.target == target:
                return view
        return None

    def non_candidate_views(self) -> tuple[View, ...]:
        return tuple(v for v in self.views if v.target is None)


@dataclass(frozen=True)
class InstructionCase:
    id: str
    text: str
    entities: tuple[str, ...]
    gt_path: tuple[str, ...]

    @property
    def goal(self) -> str:
        return self.gt_path[-1]

    @property
    def start(self) -> str:
        return self.gt_path[0]


class PathResult(NamedTuple):
    path: list[str]
    length: float

    @property
    def found(self) -> bool:
        return bool(self.path)


NO_PATH = PathResult([], math.inf)


class Graph(Protocol):
    def neighbors(self, node: str) -> Iterable[tuple[str, float]]: ...

    def __contains__(self, node: object) -> bool: ...


@dataclass(frozen=True, eq=True)
class WorldGraph:
    nodes: dict[str, Node]
    adjacency: dict[str, dict[str, float]]
    instructions: tuple[InstructionCase, ...] = ()
    name: str = ""

    def __post_init__(self):
        validate_world(self)

    def __contains__(self, node: object) -> bool:
        return node in self.nodes

    def neighbors(self, node: str) -> list[tuple[str, float]]:
        return sorted(self.adjacency[node].items())

    def weight(self, a: str, b: str) -> float:
        return self.adjacency[a][b]

    def edges(self) -> list[tuple[str, str, float]]:
        return [
            (a, b, w)
            for a in sorted(self.adjacency)
            for b, w in sorted(self.adjacency[a].items())
            if a < b
        ]

    @cached_property
    def _geodesics(self) -> dict[str, dict[str, float]]:
        return {n: _dijkstra_lengths(self, n) for n in self.nodes}

    def geodesic(self, a: str, b: str) -> float:
        return self._geodesics[a].get(b, math.inf)

    @cached_property
    def diameter(self) -> float:
        return max(max(row.values()) for row in self._geodesics.values())

    @cached_property
    def _hops(self) -> dict[str, dict[str, int]]:
        table = {}
        for src in self.nodes:
            seen = {src: 0}
            frontier = [src]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in self.adjacency[u]:
                        if v not in seen:
                            seen[v] = seen[u] + 1
                            nxt.append(v)
                frontier = nxt
            table[src] = seen
        return table

    def hops(self, a: str, b: str) -> int:
        return self._hops[a].get(b, -1)

    def path_length(self, path: list[str]) -> float:
        return sum(self.adjacency[u][v] for u, v in zip(path, path[1:]))

    def instruction(self, instr_id: str) -> InstructionCase:
        for instr in self.instructions:
            if instr.id == instr_id:
                return instr
        raise KeyError(instr_id)

    @property
    def vocabulary(self) -> list[str]:
        labels = set()
        for node in self.nodes.values():
            for view in node.views:
                labels.update(view.objects)
        return sorted(labels)


def validate_world(world: WorldGraph) -> None:
    nodes, adj = world.nodes, world.adjacency
    if set(adj) - set(nodes):
        raise WorldError(f"adjacency references unknown node {sorted(set(adj) - set(nodes))[0]!r}")
    for node_id, node in nodes.items():
        if node.id != node_id:
            raise WorldError(f"node key {node_id!r} does not match id {node.id!r}")
        for nbr, w in adj.get(node_id, {}).items():
            if nbr not in nodes:
                raise WorldError(f"edge ({node_id}, {nbr}) points to missing node {nbr!r}")
            if not (w > 0 and math.isfinite(w)):
                raise WorldError(f"edge ({node_id}, {nbr}) has non-positive weight {w}")
            if adj.get(nbr, {}).get(node_id) != w:
                raise WorldError(f"edge ({node_id}, {nbr}) is not symmetric")
        targets = [v.target for v in node.views if v.target is not None]
        neighbors = set(adj.get(node_id, {}))
        if sorted(targets) != sorted(neighbors):
            raise WorldError(f"node {node_id!r}: candidate views {sorted(targets)} do not match neighbors {sorted(neighbors)}")
        for v in node.views:
            if not 0.0 <= v.heading < 2 * math.pi:
                raise WorldError(f"node {node_id!r}: heading {v.heading} outside [0, 2pi)")
    if nodes:
        start = next(iter(nodes))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj.get(u, {}):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(nodes):
            missing = sorted(set(nodes) - seen)[0]
            raise WorldError(f"graph is not connected: {missing!r} unreachable")
    for instr in world.instructions:
        if not instr.gt_path:
            raise WorldError(f"instruction {instr.id!r} has an empty gt_path")
        for n in instr.gt_path:
            if n not in nodes:
                raise WorldError(f"instruction {instr.id!r} references missing node {n!r}")
        for u, v in zip(instr.gt_path, instr.gt_path[1:]):
            if v not in adj.get(u, {}):
                raise WorldError(f"instruction {instr.id!r}: {u!r} and {v!r} are not adjacent")


# -- shortest paths ----------------------------------------------------------

_TIE_EPS = 1e-9


def _dijkstra_lengths(g: Graph, src: str) -> dict[str, float]:
    dist = {src: 0.0}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in g.neighbors(u):
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path(g: Graph, a: str, b: str) -> PathResult:
    """Minimal-weight path from ``a`` to ``b``.

    Equal-length paths (within 1e-9) are resolved by the lexicographically
    smallest node-id sequence. Returns ``NO_PATH`` when ``b`` is unreachable.
    """
    if a not in g or b not in g:
        raise KeyError(a if a not in g else b)
    if a == b:
        return PathResult([a], 0.0)
    best: dict[str, tuple[float, tuple[str, ...]]] = {a: (0.0, (a,))}
    done: set[str] = set()
    heap = [(0.0, (a,))]
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        bd, bp = best[u]
        if path != bp:
            continue
        done.add(u)
        if u == b:
            return PathResult(list(path), d)
        for v, w in g.neighbors(u):
            if v in done:
                continue
            nd = d + w
            cand = path + (v,)
            if v not in best:
                better = True
            else:
                od, op = best[v]
                better = nd < od - _TIE_EPS or (abs(nd - od) <= _TIE_EPS and cand < op)
            if better:
                best[v] = (nd, cand)
                heapq.heappush(heap, (nd, cand))
    return NO_PATH


class SubGraph:
    """Restriction of a graph to an allowed node set."""

    def __init__(self, g: Graph, allowed: Iterable[str]):
        self.g = g
        self.allowed = set(allowed)

    def __contains__(self, node: object) -> bool:
        return node in self.allowed

    def neighbors(self, node: str) -> list[tuple[str, float]]:
        return [(v, w) for v, w in self.g.neighbors(node) if v in self.allowed]


# -- JSON interchange ----------------------------------------------------------

def world_to_dict(world: WorldGraph) -> dict:
    nodes = []
    for node_id in sorted(world.nodes):
        node = world.nodes[node_id]
        entry = {
            "id": node.id,
            "pos": list(node.position),
            "views": [
                {"heading": v.heading, "target": v.target, "objects": list(v.objects)}
                for v in node.views
            ],
        }
        if node.room is not None:
            entry["room"] = node.room
        nodes.append(entry)
    return {
        "name": world.name,
        "nodes": nodes,
        "edges": [[a, b, w] for a, b, w in world.edges()],
        "instructions": [
            {
                "id": i.id,
                "text": i.text,
                "entities": list(i.entities),
                "gt_path": list(i.gt_path),
            }
            for i in world.instructions
        ],
    }


def world_from_dict(data: dict) -> WorldGraph:
    try:
        nodes = {}
        for raw in data["nodes"]:
            node_id = str(raw["id"])
            if node_id in nodes:
                raise WorldError(f"duplicate node id {node_id!r}")
            pos = tuple(float(x) for x in raw["pos"])
            if len(pos) != 3:
                raise WorldError(f"node {node_id!r}: pos must have 3 coordinates")
            views = tuple(
                View(
                    heading=float(v["heading"]),
                    target=None if v.get("target") is None else str(v["target"]),
                    objects=tuple(str(o) for o in v.get("objects", [])),
                )
                for v in raw.get("views", [])
            )
            nodes[node_id] = Node(node_id, pos, views, raw.get("room"))
        adjacency: dict[str, dict[str, float]] = {n: {} for n in nodes}
        for edge in data["edges"]:
            a, b, w = str(edge[0]), str(edge[1]), float(edge[2])
            for end in (a, b):
                if end not in nodes:
                    raise WorldError(f"edge ({a}, {b}) references missing node {end!r}")
            if a == b:
                raise WorldError(f"self-loop on node {a!r}")
            adjacency[a][b] = w
            adjacency[b][a] = w
        instructions = []
        for raw in data.get("instructions", []):
            entities = tuple(str(e) for e in raw.get("entities", []))
            if not entities:
                raise WorldError(f"instruction {raw.get('id')!r} has no entities")
            instructions.append(
                InstructionCase(
                    id=str(raw["id"]),
                    text=str(raw.get("text", "")),
                    entities=entities,
                    gt_path=tuple(str(n) for n in raw["gt_path"]),
                )
            )
    except (KeyError, TypeError, IndexError) as exc:
        raise WorldError(f"malformed world data: {exc!r}") from exc
    return WorldGraph(nodes, adjacency, tuple(instructions), str(data.get("name", "")))


def build_world(
    positions: Mapping[str, Sequence[float]],
    edges: Iterable[Sequence],
    objects: Mapping[str, Sequence[str]] | None = None,
    instructions: Iterable[InstructionCase] = (),
    name: str = "world",
) -> WorldGraph:
    """Hand-built world. Edges are ``(a, b)`` or ``(a, b, weight)``; the
    weight defaults to the Euclidean distance. Each node gets one candidate
    view per neighbour (showing that neighbour's objects) and one
    non-candidate view holding its own objects."""
    objects = objects or {}
    pos = {n: tuple(float(x) for x in (list(p) + [0.0, 0.0, 0.0])[:3]) for n, p in positions.items()}
    adjacency: dict[str, dict[str, float]] = {n: {} for n in pos}
    for e in edges:
        a, b = e[0], e[1]
        w = float(e[2]) if len(e) > 2 else float(np.linalg.norm(np.subtract(pos[a], pos[b])))
        adjacency[a][b] = adjacency[b][a] = w
    nodes = {}
    for n, p in pos.items():
        views = [View(_heading(np.asarray(p), np.asarray(pos[m])), m, tuple(objects.get(m, ()))) for m in sorted(adjacency[n])]
        views.append(View(0.0, None, tuple(objects.get(n, ()))))
        nodes[n] = Node(n, p, tuple(views))
    return WorldGraph(nodes, adjacency, tuple(instructions), name)


def load_world(path: str | Path) -> WorldGraph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorldError(f"{path}: not valid JSON ({exc})") from exc
    return world_from_dict(data)


def save_world(world: WorldGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(world_to_dict(world), indent=1) + "\n", encoding="utf-8")


# -- generation ----------------------------------------------------------------

@dataclass
class WorldGenConfig:
    nodes: int = 30
    rooms: int = 6
    instructions: int = 3
    vocabulary: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_VOCABULARY))
    room_size: float = 6.0
    extra_views: int = 2
    objects_per_node: tuple[int, int] = (2, 4)
    extra_edge_prob: float = 0.15
    extra_door_prob: float = 0.25
    min_hops: int = 4
    max_hops: int = 7
    max_entities: int = 5


def _validate_config(cfg: WorldGenConfig) -> None:
    if cfg.nodes < 2:
        raise InfeasibleConfig(f"need at least 2 nodes, got {cfg.nodes}")
    if cfg.rooms < 1:
        raise InfeasibleConfig(f"need at least 1 room, got {cfg.rooms}")
    if cfg.rooms > cfg.nodes:
        raise InfeasibleConfig(f"{cfg.rooms} rooms cannot hold {cfg.nodes} nodes")
    if cfg.instructions < 1:
        raise InfeasibleConfig("need at least 1 instruction per world")
    if not cfg.vocabulary or not all(cfg.vocabulary.values()):
        raise InfeasibleConfig("object vocabulary is empty")
    lo, hi = cfg.objects_per_node
    if lo < 1 or hi < lo:
        raise InfeasibleConfig(f"bad objects_per_node {cfg.objects_per_node}")


def _mst_edges(points: np.ndarray) -> list[tuple[int, int]]:
    n = len(points)
    if n < 2:
        return []
    in_tree = [0]
    best = np.linalg.norm(points - points[0], axis=1)
    parent = np.zeros(n, dtype=int)
    best[0] = np.inf
    edges = []
    remaining = set(range(1, n))
    while remaining:
        j = min(remaining, key=lambda k: (best[k], k))
        edges.append((int(parent[j]), j))
        remaining.discard(j)
        in_tree.append(j)
        best[j] = np.inf
        d = np.linalg.norm(points - points[j], axis=1)
        for k in remaining:
            if d[k] < best[k]:
                best[k] = d[k]
                parent[k] = j
    return edges


def _heading(src: np.ndarray, dst: np.ndarray) -> float:
    h = math.atan2(dst[1] - src[1], dst[0] - src[0]) % (2 * math.pi)
    return 0.0 if h >= 2 * math.pi else h


def generate_world(config: WorldGenConfig | None = None, seed: int = 0, name: str | None = None) -> WorldGraph:
    """Seeded synthetic house: rooms on a grid, nodes scattered in each room,
    intra-room spanning trees plus doors between neighbouring rooms."""
    cfg = config or WorldGenConfig()
    _validate_config(cfg)
    rng = np.random.default_rng(seed)
    categories = sorted(cfg.vocabulary)

    cols = math.ceil(math.sqrt(cfg.rooms))
    order = list(rng.permutation(len(categories)))
    room_cat = [categories[order[r % len(order)]] for r in range(cfg.rooms)]
    room_center = [np.array([(r % cols) * cfg.room_size, (r // cols) * cfg.room_size, 0.0]) for r in range(cfg.rooms)]

    counts = np.ones(cfg.rooms, dtype=int)
    for r in rng.integers(0, cfg.rooms, cfg.nodes - cfg.rooms):
        counts[r] += 1
    width = len(str(cfg.nodes - 1))
    ids: list[str] = []
    room_of: list[int] = []
    pos: list[np.ndarray] = []
    half = cfg.room_size / 2 - 0.5
    for r in range(cfg.rooms):
        for _ in range(counts[r]):
            ids.append(f"n{len(ids):0{width}d}")
            room_of.append(r)
            offset = rng.uniform(-half, half, 2)
            pos.append(room_center[r] + np.array([offset[0], offset[1], 0.0]))
    points = np.array(pos)
    members = [[i for i in range(cfg.nodes) if room_of[i] == r] for r in range(cfg.rooms)]

    edge_set: set[tuple[int, int]] = set()
    for r, idx in enumerate(members):
        local = _mst_edges(points[idx])
        for a, b in local:
            edge_set.add((min(idx[a], idx[b]), max(idx[a], idx[b])))
        for i in range(len(idx)):
            for j in range(i + 1, len(idx)):
                if rng.random() < cfg.extra_edge_prob:
                    edge_set.add((idx[i], idx[j]))

    def door(ra: int, rb: int) -> tuple[int, int]:
        pairs = [(float(np.linalg.norm(points[i] - points[j])), min(i, j), max(i, j)) for i in members[ra] for j in members[rb]]
        _, i, j = min(pairs)
        return i, j

    room_pairs = []
    for r in range(cfg.rooms):
        if (r % cols) + 1 < cols and r + 1 < cfg.rooms:
            room_pairs.append((r, r + 1))
        if r + cols < cfg.rooms:
            room_pairs.append((r, r + cols))
    keys = rng.random(len(room_pairs))
    comp = list(range(cfg.rooms))

    def find(x: int) -> int:
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for k in np.argsort(keys, kind="stable"):
        ra, rb = room_pairs[k]
        if find(ra) != find(rb):
            comp[find(ra)] = find(rb)
            edge_set.add(door(ra, rb))
        elif rng.random() < cfg.extra_door_prob:
            edge_set.add(door(ra, rb))

    adjacency: dict[str, dict[str, float]] = {i: {} for i in ids}
    for a, b in sorted(edge_set):
        w = round(float(np.linalg.norm(points[a] - points[b])), 6)
        w = max(w, 1e-3)
        adjacency[ids[a]][ids[b]] = w
        adjacency[ids[b]][ids[a]] = w

    lo, hi = cfg.objects_per_node
    local_objects = []
    for i in range(cfg.nodes):
        vocab = cfg.vocabulary[room_cat[room_of[i]]]
        k = int(rng.integers(lo, hi + 1))
        local_objects.append(tuple(str(o) for o in rng.choice(vocab, size=min(k, len(vocab)), replace=False)))

    nodes: dict[str, Node] = {}
    index = {n: i for i, n in enumerate(ids)}
    for i, node_id in enumerate(ids):
        views = []
        for nbr in sorted(adjacency[node_id]):
            j = index[nbr]
            seen = local_objects[j]
            k = int(rng.integers(1, min(2, len(seen)) + 1))
            objs = tuple(sorted(str(o) for o in rng.choice(seen, size=k, replace=False)))
            views.append(View(_heading(points[i], points[j]), nbr, objs))
        own = list(local_objects[i])
        n_extra = max(cfg.extra_views, 1)
        buckets: list[list[str]] = [[] for _ in range(n_extra)]
        for o in own:
            buckets[int(rng.integers(0, n_extra))].append(o)
        for b in buckets:
            views.append(View(float(rng.uniform(0, 2 * math.pi)) % (2 * math.pi), None, tuple(sorted(b))))
        nodes[node_id] = Node(
            node_id,
            tuple(round(float(x), 6) for x in points[i]),
            tuple(views),
            room_cat[room_of[i]],
        )

    world = WorldGraph(nodes, adjacency, (), name or f"world-{seed}")
    instructions = _sample_instructions(world, cfg, rng)
    return WorldGraph(nodes, adjacency, tuple(instructions), world.name)


def _sample_instructions(world: WorldGraph, cfg: WorldGenConfig, rng: np.random.Generator) -> list[InstructionCase]:
    ids = sorted(world.nodes)
    pairs = [
        (a, b)
        for a in ids
        for b in ids
        if a != b and cfg.min_hops <= world.hops(a, b) <= cfg.max_hops
    ]
    if not pairs:
        longest = max(world.hops(a, b) for a in ids for b in ids)
        pairs = [(a, b) for a in ids for b in ids if a != b and world.hops(a, b) == longest]
    out = []
    for k in range(cfg.instructions):
        a, b = pairs[int(rng.integers(0, len(pairs)))]
        path = shortest_path(world, a, b).path
        entities: list[str] = []
        for node_id in path[1:]:
            own = sorted({o for v in world.nodes[node_id].non_candidate_views() for o in v.objects})
            if not own:
                continue
            if node_id == path[-1] or rng.random() < 0.6:
                label = str(own[int(rng.integers(0, len(own)))])
                if not entities or entities[-1] != label:
                    entities.append(label)
        if not entities:
            entities = [str(world.vocabulary[0])]
        if len(entities) > cfg.max_entities:
            keep = sorted(rng.choice(len(entities) - 1, size=cfg.max_entities - 1, replace=False))
            entities = [entities[i] for i in keep] + [entities[-1]]
        out.append(InstructionCase(f"i{k}", _instruction_text(entities), tuple(entities), tuple(path)))
    return out


def _instruction_text(entities: list[str]) -> str:
    if len(entities) == 1:
        return f"Go to the {entities[0]} and stop."
    middle = ", then ".join(f"walk past the {e}" for e in entities[:-1])
    return f"{middle[0].upper()}{middle[1:]}, and stop by the {entities[-1]}."
