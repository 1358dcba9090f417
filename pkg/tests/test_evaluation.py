import csv
import io
import math

import networkx as nx
import numpy as np
import pytest

from frontiernav.agent import AgentConfig, Step, Trajectory, run_episode
from frontiernav.evaluation import (
    CLOSE,
    CSV_COLUMNS,
    GUIDING,
    NEIGHBORHOOD3,
    SCENARIOS,
    VISITED,
    EpisodeMetrics,
    KidnapOutcome,
    KidnapScenario,
    ScenarioUnsatisfiable,
    aggregate,
    compute_metrics,
    kidnap_run,
    kidnap_table,
    kidnap_target,
    metrics_row,
    sample_trigger,
    to_csv,
    trace_losses,
)
from frontiernav.oracles import ExactConfidence, GeodesicTeacher
from frontiernav.world import InstructionCase, build_world


def walk(world, nodes, stopped=True):
    return Trajectory([Step(n, i, "exploit") for i, n in enumerate(nodes)], world.path_length(nodes), stopped)


def ndtw_oracle(world, gt, path, d_th=3.0):
    n, m = len(gt), len(path)
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = world.geodesic(gt[i - 1], path[j - 1]) + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return math.exp(-acc[n, m] / (n * d_th))


def random_walks(worlds, count, seed=0):
    rng = np.random.default_rng(seed)
    for k in range(count):
        world = worlds[k % len(worlds)]
        instr = world.instructions[k % len(world.instructions)]
        nodes = [instr.start]
        for _ in range(int(rng.integers(0, 12))):
            nbrs = sorted(world.adjacency[nodes[-1]])
            nodes.append(nbrs[int(rng.integers(0, len(nbrs)))])
        yield world, instr, walk(world, nodes)


def test_ground_truth_scores_perfectly(small_worlds):
    for world in small_worlds:
        for instr in world.instructions:
            m = compute_metrics(walk(world, list(instr.gt_path)), instr, world)
            assert (m.sr, m.spl, m.ndtw, m.sdtw, m.cls, m.ne) == (1.0, pytest.approx(1.0), 1.0, 1.0, pytest.approx(1.0), 0.0)


def test_metric_relations_on_random_walks(small_worlds):
    for world, instr, traj in random_walks(small_worlds, 200):
        m = compute_metrics(traj, instr, world)
        assert m.sdtw == pytest.approx(m.sr * m.ndtw)
        assert m.spl <= m.sr
        assert m.ndtw == pytest.approx(ndtw_oracle(world, list(instr.gt_path), traj.nodes))
        assert 0 <= m.cls <= 1 and 0 < m.ndtw <= 1
        assert m.sr == (1.0 if world.geodesic(traj.nodes[-1], instr.goal) < 3.0 else 0.0)


def test_success_cutoff_is_three_metres():
    instr = InstructionCase("i", "x", (), ("S", "G"))
    world = build_world({"G": (0, 0), "S": (0, 5), "P": (2.999, 0), "Q": (-3.001, 0)},
                        [("G", "S"), ("G", "P"), ("G", "Q")], instructions=[instr])
    assert compute_metrics(walk(world, ["S", "G", "P"]), instr, world).sr == 1.0
    assert compute_metrics(walk(world, ["S", "G", "Q"]), instr, world).sr == 0.0
    assert compute_metrics(walk(world, ["S", "G", "Q"]), instr, world).ne == pytest.approx(3.001)


def test_spl_and_cls_hand_values(line_world):
    instr = line_world.instructions[0]
    m = compute_metrics(walk(line_world, ["A", "B", "C", "F", "C", "D", "E"]), instr, line_world)
    assert m.tl == pytest.approx(6.0)
    assert m.spl == pytest.approx(4.0 / 6.0)
    # every route node is covered; length score 4 / (4 + 2)
    assert m.cls == pytest.approx(4.0 / 6.0)


@pytest.mark.parametrize("kind", SCENARIOS)
def test_kidnap_targets_respect_scenario(small_worlds, kind):
    rng = np.random.default_rng(0)
    for world in small_worlds:
        g = nx.Graph([(a, b) for a, b, _ in world.edges()])
        for instr in world.instructions:
            prefix = list(instr.gt_path[:3])
            try:
                target = kidnap_target(kind, world, instr, prefix, rng)
            except ScenarioUnsatisfiable:
                continue
            hop = min(nx.shortest_path_length(g, target, v) for v in prefix)
            assert target != prefix[-1]
            if kind == VISITED:
                assert target in prefix
            elif kind == GUIDING:
                assert target == instr.gt_path[3]
            else:
                assert target not in instr.gt_path
                assert (1 <= hop <= 3) if kind == NEIGHBORHOOD3 else (2 <= hop <= 5)


def test_unsatisfiable_and_unknown(line_world):
    instr = line_world.instructions[0]
    rng = np.random.default_rng(0)
    with pytest.raises(ScenarioUnsatisfiable):
        kidnap_target(VISITED, line_world, instr, ["A"], rng)
    with pytest.raises(ScenarioUnsatisfiable):
        kidnap_target(CLOSE, line_world, instr, ["A", "B", "C"], rng)  # F is one hop away
    with pytest.raises(ValueError):
        kidnap_target("teleport", line_world, instr, ["A"], rng)


def _oracles(world):
    return lambda: (GeodesicTeacher(world, noise=0.0), ExactConfidence(world))


def test_kidnap_run_visited(line_world):
    instr = line_world.instructions[0]
    out = kidnap_run(line_world, instr, AgentConfig(), _oracles(line_world), KidnapScenario(VISITED, 2), seed=1)
    assert out.status == "ok" and out.target in {"A", "B"}
    assert out.baseline.sr == 1.0
    assert out.delta_sr == out.metrics.sr - 1.0


def test_kidnap_skipped_after_episode_end(line_world):
    instr = line_world.instructions[0]
    out = kidnap_run(line_world, instr, AgentConfig(), _oracles(line_world), KidnapScenario(GUIDING, 9), seed=1)
    assert out.status == "skipped" and out.delta_sr is None
    table = kidnap_table([out])
    assert table[GUIDING] == {"runs": 0, "skipped": 1, "delta_sr": None, "delta_spl": None,
                              "sr_before": None, "sr_after": None}


def test_trigger_range():
    rng = np.random.default_rng(0)
    draws = {sample_trigger(15, rng) for _ in range(500)}
    assert draws == set(range(2, 14))
    assert sample_trigger(1, rng) == 2


def test_kidnap_table_means():
    base = EpisodeMetrics(5, 0, 1.0, 0.8, 1, 1, 1)
    fail = EpisodeMetrics(9, 6, 0.0, 0.0, 0.2, 0, 0.1)
    outs = [KidnapOutcome(KidnapScenario(CLOSE, 3), "ok", "x", fail, base),
            KidnapOutcome(KidnapScenario(CLOSE, 3), "ok", "y", base, base)]
    row = kidnap_table(outs)[CLOSE]
    assert row["delta_sr"] == pytest.approx(-50.0) and row["delta_spl"] == pytest.approx(-40.0)
    assert (row["sr_before"], row["sr_after"]) == (100.0, 50.0)


def test_aggregate_and_csv():
    a = EpisodeMetrics(1, 2, 1, 0.5, 0.9, 0.9, 0.7)
    b = EpisodeMetrics(3, 4, 0, 0, 0.1, 0, 0.3)
    agg = aggregate([a, b])
    assert agg["count"] == 2 and agg["tl"] == 2 and agg["sr"] == 0.5
    with pytest.raises(ValueError):
        aggregate([])
    rows = list(csv.reader(io.StringIO(to_csv([metrics_row("w", "i", "none", a)]))))
    assert rows[0] == CSV_COLUMNS
    assert rows[1][:4] == ["w", "i", "none", "1.000000"] and rows[1][-2:] == ["", ""]


def test_trace_losses_for_perfect_oracles(line_world):
    instr = line_world.instructions[0]
    res = run_episode(line_world, instr, AgentConfig(), GeodesicTeacher(line_world, noise=0.0), ExactConfidence(line_world))
    out = trace_losses(res.trace, instr, line_world, lam=0.4)
    assert out["l_rcr"] == 0.0
    assert out["ce_steps"] == len(instr.gt_path)
    ce = 0.0
    for rec in res.trace:
        i = instr.gt_path.index(rec["node"])
        p = rec["stop_score"] if i == len(instr.gt_path) - 1 else rec["scores"][rec["candidates"].index(instr.gt_path[i + 1])]
        ce -= math.log(p)
    assert out["combined"] == pytest.approx(0.4 * ce)


def test_documented_metric_examples():
    instr = InstructionCase("i", "x", (), ("S", "M", "G"))
    # route S-M-G is 2 m; the detour S-X-S-M-G doubles it
    world = build_world({"S": (0, 0), "M": (1, 0), "G": (2, 0), "X": (0, 1), "Z": (2, 3.5)},
                        [("S", "M"), ("M", "G"), ("S", "X"), ("G", "Z")], instructions=[instr])
    m = compute_metrics(walk(world, ["S", "X", "S", "M", "G"]), instr, world)
    assert m.sr == 1.0 and m.tl == pytest.approx(4.0) and m.spl == pytest.approx(0.5)
    far = compute_metrics(walk(world, ["S", "M", "G", "Z"]), instr, world)
    assert far.ne == pytest.approx(3.5) and far.sr == 0.0 and far.sdtw == 0.0
    assert aggregate([m]) == {"count": 1, **m.to_dict()}
    assert aggregate([m, far])["sr"] == 0.5


@pytest.mark.parametrize("trigger", [1, 2, 3])
def test_visited_kidnap_with_perfect_oracles_keeps_success(line_world, trigger):
    instr = line_world.instructions[0]
    for seed in range(4):
        out = kidnap_run(line_world, instr, AgentConfig(), _oracles(line_world), KidnapScenario(VISITED, trigger), seed)
        assert out.status == "ok" and out.delta_sr == 0.0


def test_guiding_kidnap_does_not_hurt_on_average(small_worlds):
    deltas = []
    for world in small_worlds:
        oracles = lambda: (GeodesicTeacher(world, p_err=0.3, seed=3), ExactConfidence(world, d_max=2.0))
        for instr in world.instructions:
            out = kidnap_run(world, instr, AgentConfig(), oracles, KidnapScenario(GUIDING, 2), seed=3)
            if out.status == "ok":
                deltas.append(out.delta_sr)
    assert deltas and np.mean(deltas) >= 0
