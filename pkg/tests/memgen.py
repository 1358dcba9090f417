"""Random exploration memories over generated worlds, for ranking checks."""

import numpy as np

from frontiernav.action_memory import ActionMemory
from frontiernav.scene_memory import SceneObjectMemory
from frontiernav.world import WorldGenConfig, generate_world


def random_memory(seed: int, steps: int = 8, scale: float = 1.0):
    """Random walk on a generated world, recording random action scores.

    Returns ``(world, instr, am, som, t)``; ``scale`` multiplies every score.
    """
    world = generate_world(WorldGenConfig(), seed)
    instr = world.instructions[0]
    rng = np.random.default_rng(seed)
    am, som = ActionMemory(), SceneObjectMemory()
    here = instr.start
    for t in range(steps):
        node = world.nodes[here]
        cands = [n for n, _ in world.neighbors(here)]
        am.record_visit(here, [(c, scale * float(s)) for c, s in zip(cands, rng.random(len(cands)))], t)
        if here not in som:
            som.maybe_insert(here, som.knowledge(node))
        for c in cands:
            som.observe_frontier(node, c)
        here = cands[int(rng.integers(0, len(cands)))]
    return world, instr, am, som, steps
