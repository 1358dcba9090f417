"""Recovery-confidence targets and training losses for external learners."""

from __future__ import annotations

import math
from typing import Sequence

from .world import WorldGraph

DEFAULT_LAMBDA = 0.4


def confidence_target(candidate: str, gt_path: Sequence[str], world: WorldGraph, d_max: float | None = None) -> float:
    """``1 - min_geodesic(candidate, gt_path) / d_max``, clipped to [0, 1].

    ``d_max`` defaults to the world's geodesic diameter.
    """
    d_max = world.diameter if d_max is None else d_max
    if not d_max > 0:
        raise ValueError("d_max must be > 0")
    nearest = min(world.geodesic(candidate, g) for g in gt_path)
    if math.isinf(nearest):
        raise ValueError(f"{candidate!r} cannot reach the ground-truth path")
    return 1.0 - min(max(nearest / d_max, 0.0), 1.0)


def recovery_loss(targets: Sequence[float], preds: Sequence[float]) -> float:
    if len(targets) != len(preds):
        raise ValueError(f"length mismatch: {len(targets)} targets vs {len(preds)} predictions")
    return float(sum((y - p) ** 2 for y, p in zip(targets, preds)))


def combined_loss(action_targets: Sequence[Sequence[int]], action_probs: Sequence[Sequence[float]],
                  l_rcr: float, lam: float = DEFAULT_LAMBDA) -> float:
    """``lam * CE(actions) + (1 - lam) * l_rcr`` with CE summed over steps."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if len(action_targets) != len(action_probs):
        raise ValueError("one target per step is required")
    ce = 0.0
    for onehot, probs in zip(action_targets, action_probs):
        if len(onehot) != len(probs) or sum(onehot) != 1 or any(y not in (0, 1) for y in onehot):
            raise ValueError(f"invalid one-hot target {list(onehot)}")
        p = probs[list(onehot).index(1)]
        if p <= 0:
            raise ValueError("zero probability at the target action")
        ce -= math.log(p)
    return lam * ce + (1.0 - lam) * l_rcr
