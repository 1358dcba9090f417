import pytest

from frontiernav.oracles import (
    EntityGreedy,
    ExactConfidence,
    GeodesicTeacher,
    NoisyConfidence,
    softmax,
    validate_confidence,
    validate_proposal,
)


def _cands(world, node):
    return [n for n, _ in world.neighbors(node)]


def test_softmax_sums_to_one():
    p = softmax([1.0, 2.0, 3.0])
    assert sum(p) == pytest.approx(1.0) and p[2] > p[1] > p[0]


def test_teacher_prefers_route_and_stops_at_goal(line_world):
    instr = line_world.instructions[0]
    teacher = GeodesicTeacher(line_world, noise=0.0)
    traj = []
    for node in instr.gt_path:
        traj.append(node)
        cands = _cands(line_world, node)
        scores = teacher.score(instr, traj, line_world.nodes[node], cands)
        best = max(range(len(scores)), key=scores.__getitem__)
        if node == instr.goal:
            assert best == len(cands)
        else:
            nxt = instr.gt_path[instr.gt_path.index(node) + 1]
            assert cands[best] == nxt


def test_teacher_mistakes_are_seeded(small_worlds):
    world = small_worlds[0]
    instr = world.instructions[0]
    node = instr.gt_path[1]
    cands = _cands(world, node)
    traj = list(instr.gt_path[:2])
    a = GeodesicTeacher(world, p_err=1.0, seed=3).score(instr, traj, world.nodes[node], cands)
    b = GeodesicTeacher(world, p_err=1.0, seed=3).score(instr, traj, world.nodes[node], cands)
    assert a == b
    if any(c not in instr.gt_path for c in cands):
        best = max(range(len(cands)), key=a.__getitem__)
        assert cands[best] not in instr.gt_path


def test_orientation_tracks_progress(line_world):
    instr = line_world.instructions[0]
    t = GeodesicTeacher(line_world)
    assert t.progress(instr, ["A", "B", "C"]) == 2
    assert t.oriented(instr, ["A", "B", "C"])
    assert not t.oriented(instr, ["A", "B", "C", "F"])
    assert not t.oriented(instr, ["A", "B", "C", "B"])


def test_exact_and_noisy_confidence_ranges(small_worlds):
    world = small_worlds[1]
    instr = world.instructions[0]
    cands = _cands(world, instr.start)
    exact = ExactConfidence(world).confidence(instr, [instr.start], cands)
    noisy = NoisyConfidence(world, sigma=0.3, seed=1).confidence(instr, [instr.start], cands)
    assert validate_confidence(exact, len(cands)) == exact
    assert all(0 <= v <= 1 for v in noisy)
    assert exact[cands.index(instr.gt_path[1])] == 1.0


def test_entity_greedy_is_a_distribution(small_worlds):
    world = small_worlds[2]
    instr = world.instructions[0]
    cands = _cands(world, instr.start)
    scores = EntityGreedy(world).score(instr, [instr.start], world.nodes[instr.start], cands)
    assert validate_proposal(scores, len(cands)) == scores


def test_validators_reject_malformed():
    with pytest.raises(ValueError):
        validate_proposal([0.5, 0.5], 2)
    with pytest.raises(ValueError):
        validate_proposal([0.6, 0.6, -0.2], 2)
    with pytest.raises(ValueError):
        validate_confidence([1.2], 1)
    with pytest.raises(ValueError):
        validate_confidence([0.5], 2)
