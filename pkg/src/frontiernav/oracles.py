"""Pluggable action-proposal and recovery-confidence oracles.

A proposal oracle returns one score per candidate plus a trailing stop score,
summing to 1. A confidence oracle returns one value in [0, 1] per candidate.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np

from .embedding import cosine, embed_label, stable_seed
from .losses import confidence_target
from .scene_memory import build_knowledge
from .world import InstructionCase, Node, WorldGraph


class ActionProposalOracle(Protocol):
    def score(self, instr: InstructionCase, trajectory: Sequence[str], current: Node,
              candidates: Sequence[str]) -> list[float]: ...


class ConfidenceOracle(Protocol):
    def confidence(self, instr: InstructionCase, trajectory: Sequence[str],
                   candidates: Sequence[str]) -> list[float]: ...


def softmax(logits: Sequence[float]) -> list[float]:
    x = np.asarray(logits, dtype=float)
    x = np.exp(x - x.max())
    return (x / x.sum()).tolist()


class GeodesicTeacher:
    """Softmax over negative geodesic distance to the goal, with seeded mistakes.

    On its first visit to a ground-truth node the teacher errs with probability
    ``p_err``: an off-route neighbour is boosted above the correct move. The
    teacher tracks instruction progress (highest ground-truth index reached in
    order); whenever the agent stands off the route, or on a route node behind
    that progress, it is disoriented and heads, less confidently, for a decoy
    viewpoint away from the route until it is back on track. The decoy is
    anchored at the furthest route node reached, so a lost teacher keeps
    heading the same wrong way.

    ``disorient`` defaults to ``p_err > 0``: an error-free teacher always
    heads for the goal, even after a kidnap.
    """

    def __init__(self, world: WorldGraph, noise: float = 0.05, p_err: float = 0.0, seed: int = 0,
                 temperature: float = 1.0, lost_temperature: float = 3.0, confusion_margin: float = 0.5,
                 disorient: bool | None = None):
        self.world = world
        self.noise = noise
        self.p_err = p_err
        self.disorient = p_err > 0 if disorient is None else disorient
        self.seed = seed
        self.temperature = temperature
        self.lost_temperature = lost_temperature
        self.confusion_margin = confusion_margin
        self._decoys: dict[tuple[str, str], str | None] = {}

    def _rng(self, *key) -> np.random.Generator:
        return np.random.default_rng(stable_seed("teacher", self.seed, *key))

    @staticmethod
    def progress(instr: InstructionCase, trajectory: Sequence[str]) -> int:
        index = {n: i for i, n in enumerate(instr.gt_path)}
        return max((index[n] for n in trajectory if n in index), default=0)

    def oriented(self, instr: InstructionCase, trajectory: Sequence[str]) -> bool:
        current = trajectory[-1]
        if current not in instr.gt_path:
            return False
        return instr.gt_path.index(current) >= self.progress(instr, trajectory[:-1])

    def decoy(self, instr: InstructionCase, anchor: str) -> str | None:
        key = (instr.id, anchor)
        if key not in self._decoys:
            world = self.world
            route = set(instr.gt_path)
            near = route | {v for n in route for v in world.adjacency[n]}
            far = sorted((n for n in world.nodes if n not in near), key=lambda n: (world.geodesic(anchor, n), n))
            if not far:
                far = sorted((n for n in world.nodes if n not in route), key=lambda n: (world.geodesic(anchor, n), n))
            pool = far[:3]
            self._decoys[key] = pool[int(self._rng("decoy", instr.id, anchor).integers(0, len(pool)))] if pool else None
        return self._decoys[key]

    def mistake(self, instr: InstructionCase, trajectory: Sequence[str], candidates: Sequence[str]) -> str | None:
        current = trajectory[-1]
        if self.p_err <= 0 or current == instr.goal or current in trajectory[:-1]:
            return None
        rng = self._rng("mistake", instr.id, current)
        if rng.random() >= self.p_err:
            return None
        wrong = [c for c in candidates if c not in instr.gt_path]
        if not wrong:
            return None
        return wrong[int(rng.integers(0, len(wrong)))]

    def score(self, instr, trajectory, current, candidates):
        world = self.world
        here = current.id
        target, temp = instr.goal, self.temperature
        lure = None
        if not self.disorient or self.oriented(instr, trajectory):
            lure = self.mistake(instr, trajectory, candidates)
        else:
            decoy = self.decoy(instr, instr.gt_path[self.progress(instr, trajectory)])
            if decoy is not None:
                target, temp = decoy, self.lost_temperature
        # moving costs the edge plus what remains; stopping short forfeits
        # the remainder twice over
        logits = [-(world.weight(here, c) + world.geodesic(c, target)) / temp for c in candidates]
        logits.append(-2.0 * world.geodesic(here, target) / temp)
        if self.noise > 0:
            rng = self._rng("noise", instr.id, len(trajectory), here)
            logits = [x + self.noise * e for x, e in zip(logits, rng.standard_normal(len(logits)))]
        if lure is not None:
            i = list(candidates).index(lure)
            logits[i] = max(logits) + self.confusion_margin
        return softmax(logits)


class EntityGreedy:
    """Scores candidates by how well the view towards them matches the next
    instruction entity not yet seen along the trajectory."""

    def __init__(self, world: WorldGraph, seed: int = 0, d: int = 32, temperature: float = 0.25,
                 match_threshold: float = 0.6):
        self.world = world
        self.seed = seed
        self.d = d
        self.temperature = temperature
        self.match_threshold = match_threshold

    def matched(self, instr: InstructionCase, trajectory: Sequence[str]) -> int:
        k = 0
        for n in trajectory:
            if k >= len(instr.entities):
                break
            know = build_knowledge(self.world.nodes[n], d=self.d, seed=self.seed)
            if cosine(know, embed_label(instr.entities[k], self.d, self.seed)) >= self.match_threshold:
                k += 1
        return k

    def score(self, instr, trajectory, current, candidates):
        k = self.matched(instr, trajectory)
        if k >= len(instr.entities):
            logits = [0.0] * len(candidates) + [1.0 / self.temperature]
            return softmax(logits)
        goal = embed_label(instr.entities[k], self.d, self.seed)
        visited = set(trajectory)
        logits = []
        for c in candidates:
            view = build_knowledge(current, "frontier", c, d=self.d, seed=self.seed)
            bonus = -0.5 if c in visited else 0.0
            logits.append((cosine(view, goal) + bonus) / self.temperature)
        logits.append(-1.0 / self.temperature)
        return softmax(logits)


class ExactConfidence:
    def __init__(self, world: WorldGraph, d_max: float | None = None):
        self.world = world
        self.d_max = d_max

    def confidence(self, instr, trajectory, candidates):
        return [confidence_target(c, instr.gt_path, self.world, self.d_max) for c in candidates]


class NoisyConfidence(ExactConfidence):
    def __init__(self, world: WorldGraph, sigma: float = 0.1, seed: int = 0, d_max: float | None = None):
        super().__init__(world, d_max)
        self.sigma = sigma
        self.seed = seed

    def confidence(self, instr, trajectory, candidates):
        exact = super().confidence(instr, trajectory, candidates)
        rng = np.random.default_rng(stable_seed("conf", self.seed, instr.id, len(trajectory), trajectory[-1] if trajectory else ""))
        noise = rng.normal(0.0, self.sigma, len(exact))
        return [min(max(y + e, 0.0), 1.0) for y, e in zip(exact, noise)]


def validate_proposal(scores: Sequence[float], n_candidates: int) -> list[float]:
    scores = [float(s) for s in scores]
    if len(scores) != n_candidates + 1:
        raise ValueError(f"proposal returned {len(scores)} scores for {n_candidates} candidates plus stop")
    if any(not math.isfinite(s) or s < 0 for s in scores) or abs(sum(scores) - 1.0) > 1e-6:
        raise ValueError(f"proposal scores must be non-negative and sum to 1: {scores}")
    return scores


def validate_confidence(values: Sequence[float], n_candidates: int) -> list[float]:
    values = [float(v) for v in values]
    if len(values) != n_candidates or any(not 0.0 <= v <= 1.0 for v in values):
        raise ValueError(f"confidence values must be one per candidate in [0, 1]: {values}")
    return values
