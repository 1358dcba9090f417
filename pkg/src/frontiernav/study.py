"""Batch recovery-efficacy study: baseline agents plus the kidnapping sweep.

Shared by the ``eval`` CLI subcommand and the acceptance suite so both report
the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .agent import AGENTS, FRONTIER_AGENT, GREEDY_AGENT, AgentConfig, run_episode
from .embedding import stable_seed
from .evaluation import (
    SCENARIOS,
    SUCCESS_DISTANCE,
    EpisodeMetrics,
    KidnapOutcome,
    KidnapScenario,
    ScenarioUnsatisfiable,
    aggregate,
    compute_metrics,
    kidnap_run,
    kidnap_table,
    sample_trigger,
)
from .oracles import ExactConfidence, GeodesicTeacher
from .world import WorldGenConfig, generate_world

# confidence reaches zero about one typical edge away from the route
STUDY_D_MAX = 2.0


@dataclass
class StudyConfig:
    worlds: int = 500
    seed: int = 0
    p_err: float = 0.3
    noise: float = 0.05
    d_max: float = STUDY_D_MAX
    d_th: float = SUCCESS_DISTANCE
    close_radius: int = 5
    agents: Sequence[str] = AGENTS
    kidnap_agents: Sequence[str] = (FRONTIER_AGENT, GREEDY_AGENT)
    scenarios: Sequence[str] = SCENARIOS
    agent: AgentConfig = field(default_factory=AgentConfig)
    world: WorldGenConfig = field(default_factory=WorldGenConfig)


@dataclass
class StudyRow:
    world: str
    instr: str
    agent: str
    scenario: str
    metrics: EpisodeMetrics
    delta_sr: float | None = None
    delta_spl: float | None = None


@dataclass
class StudyReport:
    config: StudyConfig
    baseline: dict[str, dict]
    kidnap: dict[str, dict[str, dict]]
    rows: list[StudyRow]

    def summary(self) -> dict:
        return {
            "worlds": self.config.worlds,
            "seed": self.config.seed,
            "p_err": self.config.p_err,
            "d_max": self.config.d_max,
            "baseline": self.baseline,
            "kidnap": self.kidnap,
        }


def study_world(i: int, cfg: StudyConfig):
    return generate_world(cfg.world, stable_seed("study-world", cfg.seed, i), name=f"w{i:04d}")


def run_world(i: int, cfg: StudyConfig) -> tuple[list[StudyRow], dict[str, list[KidnapOutcome]]]:
    """Every agent on every instruction of world ``i``; kidnap outcomes per agent."""
    world = study_world(i, cfg)
    rows: list[StudyRow] = []
    outcomes: dict[str, list[KidnapOutcome]] = {a: [] for a in cfg.kidnap_agents}
    for instr in world.instructions:
        ep_seed = stable_seed("study-episode", cfg.seed, i, instr.id)
        trigger = sample_trigger(cfg.agent.max_steps, np.random.default_rng(stable_seed("trigger", ep_seed)))

        def oracles():
            return (GeodesicTeacher(world, noise=cfg.noise, p_err=cfg.p_err, seed=ep_seed),
                    ExactConfidence(world, d_max=cfg.d_max))

        for kind in cfg.agents:
            acfg = replace(cfg.agent, kind=kind, seed=ep_seed)
            proposal, conf = oracles()
            traj = run_episode(world, instr, acfg, proposal, conf).trajectory
            rows.append(StudyRow(world.name, instr.id, kind, "none", compute_metrics(traj, instr, world, cfg.d_th)))
            if kind not in cfg.kidnap_agents:
                continue
            for scenario in cfg.scenarios:
                try:
                    out = kidnap_run(world, instr, acfg, oracles, KidnapScenario(scenario, trigger), ep_seed,
                                     cfg.close_radius, cfg.d_th, baseline_traj=traj)
                except ScenarioUnsatisfiable:
                    continue
                outcomes[kind].append(out)
                if out.status == "ok":
                    rows.append(StudyRow(world.name, instr.id, kind, scenario, out.metrics, out.delta_sr, out.delta_spl))
    return rows, outcomes


def efficacy_study(cfg: StudyConfig | None = None) -> StudyReport:
    cfg = cfg or StudyConfig()
    rows: list[StudyRow] = []
    outcomes: dict[str, list[KidnapOutcome]] = {a: [] for a in cfg.kidnap_agents}
    for i in range(cfg.worlds):
        r, o = run_world(i, cfg)
        rows.extend(r)
        for kind, outs in o.items():
            outcomes[kind].extend(outs)
    baseline = {
        kind: aggregate([r.metrics for r in rows if r.agent == kind and r.scenario == "none"])
        for kind in cfg.agents
    }
    kidnap = {kind: kidnap_table(outs) for kind, outs in outcomes.items()}
    return StudyReport(cfg, baseline, kidnap, rows)
