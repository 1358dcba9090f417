"""Perturbed ground-truth paths with on-track / deviated / recovering labels.

A perturbation leaves the route at a branch node, walks an outbound detour
over off-route nodes and then returns:

* ``revisit`` ends on an already traversed route node and continues along the
  route from there (no reconnection segment);
* ``frontier`` ends on a node one hop off the route;
* ``vicinity`` ends on a node between ``vicinity_min`` and ``vicinity_max``
  hops off the route.

The last two reconnect by shortest path to the route node following the branch.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embedding import stable_seed
from .world import WorldGraph, shortest_path

ON_TRACK, DEVIATED, RECOVERING = 0, 1, 2
REVISIT, FRONTIER, VICINITY = "revisit", "frontier", "vicinity"
DETOUR_TYPES = (REVISIT, FRONTIER, VICINITY)


class NoDetourEndpoint(ValueError):
    """The world offers no endpoint of the requested type within the bounds."""


class SpanError(ValueError):
    pass


@dataclass(frozen=True)
class DetourParams:
    min_hops: int = 1
    max_hops: int = 4
    vicinity_min: int = 2
    vicinity_max: int = 4

    def __post_init__(self):
        if not 0 <= self.min_hops <= self.max_hops:
            raise ValueError("need 0 <= min_hops <= max_hops")
        if not 2 <= self.vicinity_min <= self.vicinity_max:
            raise ValueError("need 2 <= vicinity_min <= vicinity_max")


@dataclass
class PerturbedPath:
    path: list[str]
    labels: list[int]
    detour_type: str
    detour_span: tuple[int, int] | None

    @property
    def degenerate(self) -> bool:
        return self.detour_span is None

    def to_dict(self) -> dict:
        return {
            "path": list(self.path),
            "labels": list(self.labels),
            "detour_type": self.detour_type,
            "detour_span": None if self.detour_span is None else list(self.detour_span),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PerturbedPath":
        span = data.get("detour_span")
        return cls(list(data["path"]), [int(x) for x in data["labels"]], data["detour_type"],
                   None if span is None else (int(span[0]), int(span[1])))


def label_path(gt_path: Sequence[str], path: Sequence[str], detour_span: tuple[int, int] | None) -> list[int]:
    """Labels for ``path`` given the outbound detour ``detour_span`` (inclusive
    indices of the first off-route node and of the detour endpoint).

    The branch node and everything before it are on track. Outbound nodes are
    deviated. A revisit endpoint is itself the rejoin node; otherwise the nodes
    between the endpoint and the first occurrence of the route node after the
    branch are recovering.
    """
    gt, path = list(gt_path), list(path)
    if detour_span is None:
        if path != gt:
            raise SpanError("a path without a detour must equal the route")
        return [ON_TRACK] * len(path)
    s, e = detour_span
    if not 1 <= s <= e < len(path) or s >= len(gt):
        raise SpanError(f"span {detour_span} out of range")
    if path[:s] != gt[:s]:
        raise SpanError("path before the detour must follow the route")
    route = set(gt)
    if any(n in route for n in path[s:e]):
        raise SpanError("outbound detour crosses the route")
    if path[e] in route:
        j = gt.index(path[e])
        if e == s or j >= s or path[e:] != gt[j:]:
            raise SpanError("revisit detour must return to a traversed route node and follow the route")
        return [ON_TRACK] * s + [DEVIATED] * (e - s) + [ON_TRACK] * (len(path) - e)
    rejoin = next((r for r in range(e + 1, len(path)) if path[r] == gt[s]), None)
    if rejoin is None or path[rejoin:] != gt[s:]:
        raise SpanError("path never rejoins the route after the branch")
    return ([ON_TRACK] * s + [DEVIATED] * (e - s + 1) + [RECOVERING] * (rejoin - e - 1)
            + [ON_TRACK] * (len(path) - rejoin))


def _off_route_tree(world: WorldGraph, root: str, route: set[str], depth: int) -> dict[str, tuple[int, str]]:
    """BFS over off-route nodes from ``root``: node -> (hops, parent)."""
    tree: dict[str, tuple[int, str]] = {}
    layer = [root]
    for hop in range(1, depth + 1):
        nxt = []
        for u in layer:
            for v, _ in world.neighbors(u):
                if v not in route and v not in tree:
                    tree[v] = (hop, u)
                    nxt.append(v)
        layer = nxt
    return tree


def _walk(tree: dict[str, tuple[int, str]], root: str, node: str) -> list[str]:
    out = []
    while node != root:
        out.append(node)
        node = tree[node][1]
    return out[::-1]


def _route_hops(world: WorldGraph, gt: Sequence[str], limit: int) -> dict[str, int]:
    hops = {n: 0 for n in gt}
    layer = list(dict.fromkeys(gt))
    for hop in range(1, limit + 1):
        nxt = []
        for u in layer:
            for v, _ in world.neighbors(u):
                if v not in hops:
                    hops[v] = hop
                    nxt.append(v)
        layer = nxt
    return hops


def _endpoints(world: WorldGraph, gt: Sequence[str], b: int, kind: str, params: DetourParams,
               route_hops: dict[str, int]) -> list[tuple[list[str], str | None]]:
    """Candidate (outbound off-route nodes, revisit node or None) for branch ``b``."""
    route = set(gt)
    tree = _off_route_tree(world, gt[b], route, params.max_hops)
    found = []
    for node in sorted(tree):
        hops = tree[node][0]
        if hops < params.min_hops:
            continue
        if kind == REVISIT:
            for back, _ in world.neighbors(node):
                if back in route and gt.index(back) <= b:
                    found.append((_walk(tree, gt[b], node), back))
        elif kind == FRONTIER:
            if route_hops.get(node) == 1:
                found.append((_walk(tree, gt[b], node), None))
        elif kind == VICINITY:
            if params.vicinity_min <= route_hops.get(node, params.vicinity_max + 1) <= params.vicinity_max:
                found.append((_walk(tree, gt[b], node), None))
        else:
            raise ValueError(f"unknown detour type {kind!r}")
    return found


def perturb_path(world: WorldGraph, gt_path: Sequence[str], detour_type: str,
                 params: DetourParams | None = None, seed: int = 0, branch: int | None = None) -> PerturbedPath:
    """Detour ``gt_path`` once; ``branch`` pins the route index the detour leaves from."""
    params = params or DetourParams()
    gt = list(gt_path)
    if len(gt) < 3:
        raise ValueError("route must have at least 3 nodes")
    if detour_type not in DETOUR_TYPES:
        raise ValueError(f"unknown detour type {detour_type!r}")
    if params.max_hops == 0:
        return PerturbedPath(gt, [ON_TRACK] * len(gt), detour_type, None)
    rng = np.random.default_rng(seed)
    route_hops = _route_hops(world, gt, params.vicinity_max)
    branches = [branch] if branch is not None else list(range(len(gt) - 1))
    options = {b: _endpoints(world, gt, b, detour_type, params, route_hops) for b in branches}
    viable = [b for b in branches if options[b]]
    if not viable:
        raise NoDetourEndpoint(f"no {detour_type} detour within {params.min_hops}-{params.max_hops} hops")
    b = viable[int(rng.integers(0, len(viable)))]
    outbound, back = options[b][int(rng.integers(0, len(options[b])))]
    s = b + 1
    if back is not None:
        j = gt.index(back)
        path = gt[:s] + outbound + gt[j:]
        span = (s, s + len(outbound))
    else:
        rejoin = shortest_path(world, outbound[-1], gt[s])
        path = gt[:s] + outbound + rejoin.path[1:] + gt[s + 1:]
        span = (s, s + len(outbound) - 1)
    return PerturbedPath(path, label_path(gt, path, span), detour_type, span)


def validate_perturbed(world: WorldGraph, gt_path: Sequence[str], pp: PerturbedPath,
                       params: DetourParams | None = None) -> None:
    """Raise ``ValueError`` unless ``pp`` satisfies every structural invariant."""
    params = params or DetourParams()
    gt, path = list(gt_path), pp.path
    if len(pp.labels) != len(path):
        raise ValueError("one label per node is required")
    if path[0] != gt[0] or path[-1] != gt[-1]:
        raise ValueError("path must start and end with the route")
    for a, b in zip(path, path[1:]):
        if b not in world.adjacency[a]:
            raise ValueError(f"{a} -> {b} is not an edge")
    if label_path(gt, path, pp.detour_span) != pp.labels:
        raise ValueError("labels disagree with the labelling rule")
    on_track = [n for n, lab in zip(path, pp.labels) if lab == ON_TRACK]
    it = iter(on_track)
    if not all(any(n == m for m in it) for n in gt):
        raise ValueError("route is not a subsequence of the on-track nodes")
    if any(n not in gt for n in on_track):
        raise ValueError("an on-track node lies off the route")
    if pp.degenerate:
        return
    if DEVIATED not in pp.labels:
        raise ValueError("a detour needs at least one deviated node")
    s, e = pp.detour_span
    route_hops = _route_hops(world, gt, params.vicinity_max)
    if pp.detour_type == REVISIT:
        if path[e] not in gt or gt.index(path[e]) > s - 1:
            raise ValueError("revisit must end on a traversed route node")
    elif pp.detour_type == FRONTIER:
        if route_hops.get(path[e]) != 1:
            raise ValueError("frontier endpoint must be one hop off the route")
    elif pp.detour_type == VICINITY:
        if not params.vicinity_min <= route_hops.get(path[e], params.vicinity_max + 1) <= params.vicinity_max:
            raise ValueError("vicinity endpoint outside the allowed ring")


def _mix(mix: Mapping[str, float] | Sequence[float] | None) -> tuple[list[str], np.ndarray]:
    if mix is None:
        weights = dict.fromkeys(DETOUR_TYPES, 1.0 / 3)
    elif isinstance(mix, Mapping):
        weights = dict(mix)
    else:
        weights = dict(zip(DETOUR_TYPES, mix, strict=True))
    if any(k not in DETOUR_TYPES for k in weights) or any(v < 0 for v in weights.values()):
        raise ValueError(f"invalid mix {weights}")
    p = np.array([weights.get(k, 0.0) for k in DETOUR_TYPES], dtype=float)
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("mix ratios must sum to 1")
    return list(DETOUR_TYPES), p


def generate_dataset(worlds: Sequence[WorldGraph], per_world: int, mix=None, seed: int = 0,
                     params: DetourParams | None = None) -> tuple[list[dict], dict]:
    """Records plus a summary of type and label counts.

    A type is drawn per sample; instructions are tried in seeded order until
    one admits that detour type. Samples no instruction admits are counted as
    ``unsatisfied``.
    """
    types, p = _mix(mix)
    records: list[dict] = []
    by_type: Counter = Counter()
    labels: Counter = Counter()
    unsatisfied = 0
    for w_index, world in enumerate(worlds):
        rng = np.random.default_rng(stable_seed("devgen", seed, w_index, world.name))
        for k in range(per_world):
            kind = types[int(rng.choice(len(types), p=p))]
            order = rng.permutation(len(world.instructions))
            sample_seed = stable_seed("devgen-sample", seed, w_index, k)
            for idx in order:
                instr = world.instructions[int(idx)]
                try:
                    pp = perturb_path(world, instr.gt_path, kind, params, sample_seed)
                except NoDetourEndpoint:
                    continue
                records.append({"world": world.name, "instr": instr.id, **pp.to_dict()})
                by_type[kind] += 1
                labels.update(pp.labels)
                break
            else:
                unsatisfied += 1
    summary = {
        "samples": len(records),
        "unsatisfied": unsatisfied,
        "by_type": {k: by_type.get(k, 0) for k in DETOUR_TYPES},
        "labels": {str(k): labels.get(k, 0) for k in (ON_TRACK, DEVIATED, RECOVERING)},
    }
    return records, summary


def write_jsonl(records: Iterable[dict], out: str | Path) -> None:
    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def emit_dataset(worlds: Sequence[WorldGraph], per_world: int, mix=None, seed: int = 0,
                 out: str | Path = "deviation.jsonl", params: DetourParams | None = None) -> dict:
    records, summary = generate_dataset(worlds, per_world, mix, seed, params)
    write_jsonl(records, out)
    return summary


def load_dataset(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
