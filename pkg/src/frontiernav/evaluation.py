"""Navigation metrics, kidnapping study, and report aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .agent import AgentConfig, Kidnap, Trajectory, run_episode
from .dtw import dtw_from_matrix
from .embedding import stable_seed
from .losses import DEFAULT_LAMBDA, combined_loss, confidence_target, recovery_loss
from .world import InstructionCase, WorldGraph

SUCCESS_DISTANCE = 3.0

VISITED = "visited"
GUIDING = "guiding"
NEIGHBORHOOD3 = "neighborhood3"
CLOSE = "close"
SCENARIOS = (VISITED, GUIDING, NEIGHBORHOOD3, CLOSE)

METRIC_KEYS = ("sr", "spl", "tl", "ne", "ndtw", "sdtw", "cls")


class ScenarioUnsatisfiable(ValueError):
    pass


@dataclass
class EpisodeMetrics:
    tl: float
    ne: float
    sr: float
    spl: float
    ndtw: float
    sdtw: float
    cls: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(traj: Trajectory, instr: InstructionCase, world: WorldGraph, d_th: float = SUCCESS_DISTANCE) -> EpisodeMetrics:
    path = traj.nodes
    gt = list(instr.gt_path)
    tl = traj.length
    ne = world.geodesic(path[-1], instr.goal)
    sr = 1.0 if ne < d_th else 0.0
    ref_len = world.path_length(gt)
    if sr and max(ref_len, tl) > 0:
        spl = sr * ref_len / max(ref_len, tl)
    else:
        spl = sr
    dist = [[world.geodesic(r, q) for q in path] for r in gt]
    ndtw = math.exp(-dtw_from_matrix(dist).cost / (len(gt) * d_th))
    pc = sum(math.exp(-min(row) / d_th) for row in dist) / len(gt)
    expected = pc * ref_len
    denom = expected + abs(expected - tl)
    ls = expected / denom if denom > 0 else 1.0
    return EpisodeMetrics(tl=tl, ne=ne, sr=sr, spl=spl, ndtw=ndtw, sdtw=sr * ndtw, cls=pc * ls)


# -- kidnapping ------------------------------------------------------------------

@dataclass
class KidnapScenario:
    kind: str
    trigger_step: int


@dataclass
class KidnapOutcome:
    scenario: KidnapScenario
    status: str
    target: str | None
    metrics: EpisodeMetrics | None
    baseline: EpisodeMetrics

    @property
    def delta_sr(self) -> float | None:
        return None if self.metrics is None else self.metrics.sr - self.baseline.sr

    @property
    def delta_spl(self) -> float | None:
        return None if self.metrics is None else self.metrics.spl - self.baseline.spl


def sample_trigger(max_steps: int, rng: np.random.Generator) -> int:
    hi = max(max_steps - 2, 2)
    return int(rng.integers(2, hi + 1))


def _ring(world: WorldGraph, sources: Sequence[str], radius: int) -> dict[str, int]:
    """Hop distance from the source set for every node within ``radius`` hops."""
    out = {s: 0 for s in sources}
    frontier = list(sources)
    for hop in range(1, radius + 1):
        nxt = []
        for u in frontier:
            for v in world.adjacency[u]:
                if v not in out:
                    out[v] = hop
                    nxt.append(v)
        frontier = nxt
    return out


def kidnap_target(kind: str, world: WorldGraph, instr: InstructionCase, trajectory: Sequence[str],
                  rng: np.random.Generator, close_radius: int = 5) -> str:
    current = trajectory[-1]
    visited = list(dict.fromkeys(trajectory))
    route = set(instr.gt_path)
    if kind == VISITED:
        pool = [n for n in visited if n != current]
    elif kind == GUIDING:
        index = {n: i for i, n in enumerate(instr.gt_path)}
        progress = max((index[n] for n in trajectory if n in index), default=0)
        pool = [instr.gt_path[progress + 1]] if progress + 1 < len(instr.gt_path) else []
        pool = [n for n in pool if n != current]
    elif kind == NEIGHBORHOOD3:
        hops = _ring(world, visited, 3)
        pool = sorted(n for n, h in hops.items() if 1 <= h <= 3 and n not in route)
    elif kind == CLOSE:
        hops = _ring(world, visited, close_radius)
        pool = sorted(n for n, h in hops.items() if 2 <= h <= close_radius and n not in route)
    else:
        raise ValueError(f"unknown kidnap scenario {kind!r}")
    if not pool:
        raise ScenarioUnsatisfiable(f"no {kind} target from {current!r}")
    return pool[int(rng.integers(0, len(pool)))]


def kidnap_run(world: WorldGraph, instr: InstructionCase, cfg: AgentConfig,
               oracles: Callable[[], tuple], scenario: KidnapScenario, seed: int,
               close_radius: int = 5, d_th: float = SUCCESS_DISTANCE,
               baseline_traj: Trajectory | None = None) -> KidnapOutcome:
    """Run an unperturbed episode and one teleported at ``scenario.trigger_step``.

    ``oracles`` builds a fresh ``(proposal, confidence)`` pair per episode.
    """
    if baseline_traj is None:
        proposal, conf = oracles()
        baseline_traj = run_episode(world, instr, cfg, proposal, conf).trajectory
    baseline = compute_metrics(baseline_traj, instr, world, d_th)
    if baseline_traj.steps[-1].t < scenario.trigger_step:
        return KidnapOutcome(scenario, "skipped", None, None, baseline)
    # the teleport happens at the first decision at or after the trigger
    when = min(s.t for s in baseline_traj.steps if s.t >= scenario.trigger_step)
    before = [s.node for s in baseline_traj.steps if s.t <= when]
    rng = np.random.default_rng(stable_seed("kidnap", seed, instr.id, scenario.kind, scenario.trigger_step))
    target = kidnap_target(scenario.kind, world, instr, before, rng, close_radius)
    proposal, conf = oracles()
    result = run_episode(world, instr, cfg, proposal, conf, Kidnap(when, target))
    if not result.kidnapped:
        return KidnapOutcome(scenario, "skipped", target, None, baseline)
    return KidnapOutcome(scenario, "ok", target, compute_metrics(result.trajectory, instr, world, d_th), baseline)


# -- aggregation -------------------------------------------------------------------

def aggregate(runs: Sequence[EpisodeMetrics]) -> dict:
    if not runs:
        raise ValueError("nothing to aggregate")
    report = {"count": len(runs)}
    for f in fields(EpisodeMetrics):
        report[f.name] = float(np.mean([getattr(r, f.name) for r in runs]))
    return report


def kidnap_table(outcomes: Sequence[KidnapOutcome]) -> dict[str, dict]:
    """Per-scenario mean change in SR/SPL (in points) over non-skipped runs,
    with the mean SR of those runs before and after the kidnap."""
    table = {}
    for kind in SCENARIOS:
        done = [o for o in outcomes if o.scenario.kind == kind and o.status == "ok"]
        table[kind] = {
            "runs": len(done),
            "skipped": sum(1 for o in outcomes if o.scenario.kind == kind and o.status != "ok"),
            "delta_sr": 100.0 * float(np.mean([o.delta_sr for o in done])) if done else None,
            "delta_spl": 100.0 * float(np.mean([o.delta_spl for o in done])) if done else None,
            "sr_before": 100.0 * float(np.mean([o.baseline.sr for o in done])) if done else None,
            "sr_after": 100.0 * float(np.mean([o.metrics.sr for o in done])) if done else None,
        }
    return table


CSV_COLUMNS = ["world", "instr", "scenario", "SR", "SPL", "TL", "NE", "nDTW", "SDTW", "CLS", "ΔSR", "ΔSPL"]


def metrics_row(world: str, instr: str, scenario: str, m: EpisodeMetrics,
                delta_sr: float | None = None, delta_spl: float | None = None) -> list:
    def fmt(x):
        return "" if x is None else f"{x:.6f}"
    return [world, instr, scenario, fmt(m.sr), fmt(m.spl), fmt(m.tl), fmt(m.ne), fmt(m.ndtw),
            fmt(m.sdtw), fmt(m.cls), fmt(delta_sr), fmt(delta_spl)]


def to_csv(rows: Sequence[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# -- training-signal diagnostics ---------------------------------------------------

def trace_losses(trace: Sequence[dict], instr: InstructionCase, world: WorldGraph,
                 lam: float = DEFAULT_LAMBDA, d_max: float | None = None) -> dict:
    """Losses the oracles would incur against the supervised targets along a trace.

    Action targets exist only at steps taken on the ground-truth route: the
    next route node, or stop at the goal. Recovery targets cover every
    candidate of every step.
    """
    gt = list(instr.gt_path)
    onehots, probs, targets, preds = [], [], [], []
    for rec in trace:
        cands = rec["candidates"]
        targets += [confidence_target(c, gt, world, d_max) for c in cands]
        preds += rec["confidence"]
        node = rec["node"]
        if node not in gt:
            continue
        i = gt.index(node)
        want = len(cands) if i == len(gt) - 1 else (cands.index(gt[i + 1]) if gt[i + 1] in cands else None)
        if want is None:
            continue
        dist = rec["scores"] + [rec["stop_score"]]
        if dist[want] <= 0:
            continue
        onehots.append([1 if k == want else 0 for k in range(len(dist))])
        probs.append(dist)
    l_rcr = recovery_loss(targets, preds)
    return {
        "l_rcr": l_rcr,
        "ce_steps": len(onehots),
        "combined": combined_loss(onehots, probs, l_rcr, lam),
    }
