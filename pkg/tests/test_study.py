from frontiernav.agent import AGENTS
from frontiernav.evaluation import SCENARIOS
from frontiernav.study import StudyConfig, efficacy_study, study_world


def test_small_study_shape_and_determinism():
    cfg = StudyConfig(worlds=4, seed=5)
    a, b = efficacy_study(cfg), efficacy_study(cfg)
    assert a.summary() == b.summary()
    assert set(a.baseline) == set(AGENTS)
    assert all(v["count"] == 4 * cfg.world.instructions for v in a.baseline.values())
    for table in a.kidnap.values():
        assert set(table) == set(SCENARIOS)
        for row in table.values():
            assert row["runs"] + row["skipped"] <= 4 * cfg.world.instructions
    kidnapped = [r for r in a.rows if r.scenario != "none"]
    assert all(r.agent in cfg.kidnap_agents and r.delta_sr is not None for r in kidnapped)


def test_worlds_depend_on_seed_and_index():
    cfg = StudyConfig(worlds=2)
    assert study_world(0, cfg).name == "w0000"
    assert study_world(0, cfg).nodes.keys() == study_world(0, cfg).nodes.keys()
    assert study_world(0, cfg).edges() != study_world(1, cfg).edges()
