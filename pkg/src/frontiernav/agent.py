"""Exploit/explore episode driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .action_memory import ActionMemory
from .dtw import extract_entities
from .frontier import FrontierUnreachable, SelectorParams, rank_frontiers, transit_plan
from .oracles import ActionProposalOracle, ConfidenceOracle, validate_confidence, validate_proposal
from .scene_memory import NOVELTY_CAP, NOVELTY_THRESHOLD, SceneObjectMemory
from .world import InstructionCase, WorldGraph

EXPLOIT = "exploit"
TRANSIT = "explore-transit"
HOMING = "explore-homing"
TELEPORT = "teleport"
START = "start"

FRONTIER_AGENT = "frontier"
GREEDY_AGENT = "greedy"
BACKTRACK_AGENT = "backtrack"
AGENTS = (FRONTIER_AGENT, GREEDY_AGENT, BACKTRACK_AGENT)


@dataclass
class AgentConfig:
    c_thresh: float = 0.5
    max_steps: int = 15
    explore_cooldown: int = 1
    selector: SelectorParams = field(default_factory=SelectorParams)
    seed: int = 0
    kind: str = FRONTIER_AGENT
    dim: int = 32
    novelty_threshold: float = NOVELTY_THRESHOLD
    novelty_cap: float = NOVELTY_CAP
    top_k: int | None = None
    count_transit_hops: bool = False

    def __post_init__(self):
        if not 0.0 <= self.c_thresh <= 1.0:
            raise ValueError("c_thresh must be in [0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.kind not in AGENTS:
            raise ValueError(f"unknown agent kind {self.kind!r}")


@dataclass
class Step:
    node: str
    t: int
    mode: str


@dataclass
class Trajectory:
    steps: list[Step] = field(default_factory=list)
    length: float = 0.0
    stopped: bool = False

    @property
    def nodes(self) -> list[str]:
        return [s.node for s in self.steps]

    def move(self, world: WorldGraph, node: str, t: int, mode: str) -> None:
        if mode != TELEPORT:
            prev = self.steps[-1].node
            if node not in world.adjacency[prev]:
                raise RuntimeError(f"move {prev} -> {node} is not along an edge")
            self.length += world.weight(prev, node)
        self.steps.append(Step(node, t, mode))

    def to_dict(self) -> dict:
        return {
            "steps": [[s.node, s.t, s.mode] for s in self.steps],
            "length": self.length,
            "stopped": self.stopped,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        return cls([Step(n, int(t), m) for n, t, m in data["steps"]], float(data["length"]), bool(data["stopped"]))


@dataclass
class Kidnap:
    step: int
    target: str


@dataclass
class EpisodeResult:
    trajectory: Trajectory
    action_memory: ActionMemory
    scene_memory: SceneObjectMemory
    trace: list[dict]
    kidnapped: bool = False


def should_explore(conf: Sequence[float], c_thresh: float) -> bool:
    return all(c < c_thresh for c in conf)


def _r(x: float) -> float:
    return round(float(x), 10)


def run_episode(
    world: WorldGraph,
    instr: InstructionCase,
    cfg: AgentConfig,
    proposal: ActionProposalOracle,
    conf: ConfidenceOracle,
    kidnap: Kidnap | None = None,
) -> EpisodeResult:
    """Drive one episode.

    Each decision consumes one step of the ``max_steps`` budget. A transit to
    a chosen frontier is one decision walked hop by hop along observed nodes,
    unless ``cfg.count_transit_hops`` charges every hop. A kidnap teleports the agent at the start of step
    ``kidnap.step`` without resetting either memory.
    """
    am = ActionMemory()
    som = SceneObjectMemory(cfg.dim, cfg.seed, cfg.novelty_cap, cfg.novelty_threshold, cfg.top_k)
    entities = extract_entities(instr, world.vocabulary, cfg.dim, cfg.seed)
    start = instr.start
    traj = Trajectory([Step(start, 0, START)])
    trace: list[dict] = []
    current, t = start, 0
    last_explore = -math.inf
    masked: str | None = None
    kidnapped = False

    def observe(node_id: str, scores: Sequence[float] | None) -> None:
        node = world.nodes[node_id]
        cands = [n for n, _ in world.neighbors(node_id)]
        if scores is None:
            am.observe(node_id, cands, t)
        else:
            am.record_visit(node_id, zip(cands, scores), t)
        if node_id not in som:
            som.maybe_insert(node_id, som.knowledge(node))
        for c in cands:
            som.observe_frontier(node, c)

    while True:
        if kidnap is not None and not kidnapped and t >= kidnap.step:
            current = kidnap.target
            traj.move(world, current, t, TELEPORT)
            kidnapped = True
            masked = None
        node = world.nodes[current]
        cands = [n for n, _ in world.neighbors(current)]
        scores = validate_proposal(proposal.score(instr, traj.nodes, node, cands), len(cands))
        observe(current, scores[:-1])
        confs = validate_confidence(conf.confidence(instr, traj.nodes, cands), len(cands))
        explore = should_explore(confs, cfg.c_thresh)
        record = {
            "t": t,
            "node": current,
            "mode": traj.steps[-1].mode,
            "candidates": cands,
            "scores": [_r(s) for s in scores[:-1]],
            "stop_score": _r(scores[-1]),
            "confidence": [_r(c) for c in confs],
            "explore_trigger": explore,
            "action": None,
            "frontiers": [],
        }
        trace.append(record)
        if t >= cfg.max_steps:
            record["action"] = "budget"
            break

        ready = t - last_explore >= cfg.explore_cooldown
        if cfg.kind == FRONTIER_AGENT and explore and ready and am.frontiers(t):
            ranked = rank_frontiers(am, som, world, instr, start, t, cfg.selector, current, entities)
            # the optimal frontier must connect to here through observed
            # nodes; after a kidnap it may not until the agent finds its way
            try:
                plan = transit_plan(am, world, current, ranked[0].node)
            except FrontierUnreachable:
                plan = None
            record["frontiers"] = [
                {
                    "node": s.node,
                    "s_act": _r(s.s_act),
                    "s_recency": _r(s.s_recency),
                    "s_novel": _r(s.s_novel),
                    "s_align": _r(s.s_align),
                    "s_final": _r(s.s_final),
                    "s_norm": _r(s.s_norm),
                    "chosen": plan is not None and s.node == plan[-1],
                }
                for s in ranked
            ]
            if plan is None:
                # disconnected from memory: step towards the frontier's
                # recorded position until the graphs join up again (homing
                # continues the same explore decision, so no cooldown)
                goal = np.asarray(world.nodes[ranked[0].node].position)
                seen = traj.nodes
                nxt = min(cands, key=lambda c: (seen.count(c), float(np.linalg.norm(np.asarray(world.nodes[c].position) - goal)), c))
                record["action"] = f"home:{ranked[0].node}"
                t += 1
                traj.move(world, nxt, t, HOMING)
                current = nxt
                continue
            else:
                record["action"] = f"explore:{plan[-1]}"
                if not cfg.count_transit_hops:
                    t += 1
                for nxt in plan[1:]:
                    if cfg.count_transit_hops:
                        t += 1
                    traj.move(world, nxt, t, TRANSIT)
                    current = nxt
                    if nxt == plan[-1] or (cfg.count_transit_hops and t >= cfg.max_steps):
                        break
                    observe(nxt, None)
                last_explore = t
                continue

        if cfg.kind == BACKTRACK_AGENT and explore and ready:
            prev = next(
                (s.node for s in reversed(traj.steps[:-1]) if s.node != current and s.node in world.adjacency[current]),
                None,
            )
            if prev is not None and traj.steps[-1].mode != TELEPORT:
                record["action"] = f"backtrack:{prev}"
                masked = current
                t += 1
                traj.move(world, prev, t, TRANSIT)
                current = prev
                last_explore = t
                continue

        options = list(range(len(cands) + 1))
        if masked is not None and masked in cands and len(cands) > 1:
            options.remove(cands.index(masked))
        masked = None
        best = max(options, key=lambda i: (scores[i], -i))
        if best == len(cands):
            record["action"] = "stop"
            traj.stopped = True
            break
        record["action"] = f"move:{cands[best]}"
        t += 1
        traj.move(world, cands[best], t, EXPLOIT)
        current = cands[best]

    return EpisodeResult(traj, am, som, trace, kidnapped)
