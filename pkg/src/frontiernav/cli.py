"""``frontiernav`` command line: world generation, episodes, kidnapping,
deviation datasets, DTW checks and the efficacy study."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .agent import AGENTS, FRONTIER_AGENT, AgentConfig, run_episode
from .deviation import DETOUR_TYPES, DetourParams, emit_dataset
from .dtw import dtw_exact, fastdtw
from .embedding import stable_seed
from .evaluation import (
    SCENARIOS,
    SUCCESS_DISTANCE,
    KidnapScenario,
    ScenarioUnsatisfiable,
    aggregate,
    compute_metrics,
    kidnap_run,
    kidnap_table,
    metrics_row,
    sample_trigger,
    to_csv,
    to_json,
    trace_losses,
)
from .frontier import SelectorParams
from .losses import DEFAULT_LAMBDA
from .oracles import EntityGreedy, ExactConfidence, GeodesicTeacher, NoisyConfidence
from .scene_memory import NOVELTY_THRESHOLD
from .study import STUDY_D_MAX, StudyConfig, efficacy_study
from .world import WorldError, WorldGenConfig, generate_world, load_world, save_world

OUTPUT_ENV = "FRONTIERNAV_OUTPUT_DIR"


class CliError(Exception):
    pass


# -- shared options ----------------------------------------------------------------

def _world_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--world", help="world JSON file (default: generate one)")
    p.add_argument("--nodes", type=int, default=30, help="nodes of a generated world")
    p.add_argument("--rooms", type=int, default=6, help="rooms of a generated world")
    p.add_argument("--instructions", type=int, default=3, help="instructions of a generated world")
    p.add_argument("--world-seed", type=int, default=0, help="seed of a generated world")


def _agent_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--agent", choices=AGENTS, default=FRONTIER_AGENT, help="agent kind")
    p.add_argument("--gamma", type=float, default=0.1, help="recency decay rate")
    p.add_argument("--c-thresh", type=float, default=0.5, help="confidence threshold that triggers exploration")
    p.add_argument("--novelty-thresh", type=float, default=NOVELTY_THRESHOLD, help="scene-memory insertion threshold")
    p.add_argument("--act-filter", type=float, default=0.5,
                   help="alignment is computed for frontiers above this fraction of the best action score")
    p.add_argument("--max-steps", type=int, default=15, help="decision budget per episode")
    p.add_argument("--cooldown", type=int, default=1, help="steps between explore decisions")
    p.add_argument("--count-transit-hops", action="store_true", help="charge every transit hop to the budget")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help="weight of the action loss in the combined training loss")
    p.add_argument("--d-th", type=float, default=SUCCESS_DISTANCE, help="success radius in meters")


def _d_max_arg(text: str) -> float | None:
    if text == "diameter":
        return None
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0 or 'diameter'")
    return value


def _oracle_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--proposal", choices=("teacher", "entity"), default="teacher", help="action-proposal oracle")
    p.add_argument("--p-err", type=float, default=0.3, help="teacher mistake probability")
    p.add_argument("--noise", type=float, default=0.05, help="teacher logit noise")
    p.add_argument("--confidence", choices=("exact", "noisy"), default="exact", help="recovery-confidence oracle")
    p.add_argument("--sigma", type=float, default=0.1, help="noise of the noisy confidence oracle")
    p.add_argument("--d-max", type=_d_max_arg, default=STUDY_D_MAX,
                   help="distance in meters at which recovery confidence reaches 0, or 'diameter'")


def _output_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=None, help=f"output directory (default: ${OUTPUT_ENV} or ./out)")


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _world(args):
    if args.world:
        if not Path(args.world).is_file():
            raise CliError(f"world file not found: {args.world}")
        return load_world(args.world)
    cfg = WorldGenConfig(nodes=args.nodes, rooms=args.rooms, instructions=args.instructions)
    return generate_world(cfg, args.world_seed)


def _agent_config(args, seed: int) -> AgentConfig:
    selector = SelectorParams(gamma=args.gamma, act_filter=args.act_filter)
    return AgentConfig(c_thresh=args.c_thresh, max_steps=args.max_steps, explore_cooldown=args.cooldown,
                       selector=selector, seed=seed, kind=args.agent, novelty_threshold=args.novelty_thresh,
                       count_transit_hops=args.count_transit_hops)


def _oracles(args, world, seed: int) -> Callable[[], tuple]:
    def build():
        if args.proposal == "teacher":
            proposal = GeodesicTeacher(world, noise=args.noise, p_err=args.p_err, seed=seed)
        else:
            proposal = EntityGreedy(world, seed=seed)
        if args.confidence == "exact":
            conf = ExactConfidence(world, d_max=args.d_max)
        else:
            conf = NoisyConfidence(world, sigma=args.sigma, seed=seed, d_max=args.d_max)
        return proposal, conf
    return build


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def _parallel(fn, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- gen-world ----------------------------------------------------------------------

def cmd_gen_world(args) -> int:
    cfg = WorldGenConfig(nodes=args.nodes, rooms=args.rooms, instructions=args.instructions)
    world = generate_world(cfg, args.seed)
    out = Path(args.output) if args.output else _out_dir(args) / "world.json"
    save_world(world, out)
    print(f"wrote {out} ({len(world.nodes)} nodes, {len(world.edges())} edges, {len(world.instructions)} instructions)")
    return 0


# -- run ----------------------------------------------------------------------------

def _run_one(job):
    args, world, i = job
    instr = world.instructions[i % len(world.instructions)]
    seed = stable_seed("episode", args.seed, i)
    proposal, conf = _oracles(args, world, seed)()
    result = run_episode(world, instr, _agent_config(args, seed), proposal, conf)
    metrics = compute_metrics(result.trajectory, instr, world, args.d_th)
    losses = trace_losses(result.trace, instr, world, args.lam, args.d_max)
    return instr.id, result.trajectory.to_dict(), result.trace, metrics, losses


def cmd_run(args) -> int:
    world = _world(args)
    if not world.instructions:
        raise CliError("world has no instructions")
    out = _out_dir(args)
    results = _parallel(_run_one, [(args, world, i) for i in range(args.episodes)], args.jobs)
    rows, traces, trajs, metrics, losses = [], [], [], [], []
    for i, (instr_id, traj, trace, m, loss) in enumerate(results):
        rows.append(metrics_row(world.name, instr_id, "none", m))
        traces.extend(_dump({"episode": i, "instr": instr_id, **rec}) for rec in trace)
        trajs.append(_dump({"episode": i, "instr": instr_id, **traj}))
        metrics.append(m)
        losses.append(loss)
    (out / "metrics.csv").write_text(to_csv(rows), encoding="utf-8")
    (out / "trace.jsonl").write_text("".join(t + "\n" for t in traces), encoding="utf-8")
    (out / "trajectories.jsonl").write_text("".join(t + "\n" for t in trajs), encoding="utf-8")
    summary = {
        "world": world.name,
        "agent": args.agent,
        "episodes": args.episodes,
        "seed": args.seed,
        "metrics": aggregate(metrics) if metrics else {"count": 0},
        "losses": {
            "lambda": args.lam,
            "l_rcr": float(np.mean([x["l_rcr"] for x in losses])) if losses else None,
            "combined": float(np.mean([x["combined"] for x in losses])) if losses else None,
        },
    }
    (out / "summary.json").write_text(to_json(summary), encoding="utf-8")
    print(to_json(summary), end="")
    return 0


# -- kidnap -------------------------------------------------------------------------

def _kidnap_one(job):
    args, world, i = job
    instr = world.instructions[i % len(world.instructions)]
    seed = stable_seed("episode", args.seed, i)
    cfg = _agent_config(args, seed)
    trigger = sample_trigger(cfg.max_steps, np.random.default_rng(stable_seed("trigger", seed)))
    oracles = _oracles(args, world, seed)
    proposal, conf = oracles()
    base = run_episode(world, instr, cfg, proposal, conf).trajectory
    outs = []
    for kind in args.scenarios:
        try:
            outs.append(kidnap_run(world, instr, cfg, oracles, KidnapScenario(kind, trigger), seed,
                                   args.close_radius, args.d_th, baseline_traj=base))
        except ScenarioUnsatisfiable:
            continue
    return instr.id, outs


def cmd_kidnap(args) -> int:
    world = _world(args)
    out = _out_dir(args)
    results = _parallel(_kidnap_one, [(args, world, i) for i in range(args.episodes)], args.jobs)
    rows, outcomes, status = [], [], []
    for i, (instr_id, outs) in enumerate(results):
        for o in outs:
            outcomes.append(o)
            status.append(_dump({"episode": i, "instr": instr_id, "scenario": o.scenario.kind,
                                 "trigger": o.scenario.trigger_step, "status": o.status, "target": o.target}))
            if o.status == "ok":
                rows.append(metrics_row(world.name, instr_id, o.scenario.kind, o.metrics, o.delta_sr, o.delta_spl))
    (out / "kidnap.csv").write_text(to_csv(rows), encoding="utf-8")
    (out / "kidnap_runs.jsonl").write_text("".join(s + "\n" for s in status), encoding="utf-8")
    summary = {"world": world.name, "agent": args.agent, "episodes": args.episodes, "seed": args.seed,
               "scenarios": kidnap_table(outcomes)}
    (out / "kidnap_summary.json").write_text(to_json(summary), encoding="utf-8")
    print(to_json(summary), end="")
    return 0


# -- devgen ---------------------------------------------------------------------------

def _mix_arg(text: str) -> dict:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != len(DETOUR_TYPES):
        raise argparse.ArgumentTypeError(f"expected {len(DETOUR_TYPES)} comma-separated ratios")
    return dict(zip(DETOUR_TYPES, parts))


def cmd_devgen(args) -> int:
    if args.world:
        worlds = []
        for path in args.world:
            if not Path(path).is_file():
                raise CliError(f"world file not found: {path}")
            worlds.append(load_world(path))
    else:
        cfg = WorldGenConfig(nodes=args.nodes, rooms=args.rooms, instructions=args.instructions)
        worlds = [generate_world(cfg, stable_seed("devgen-world", args.seed, k), name=f"w{k:03d}")
                  for k in range(args.worlds)]
    params = DetourParams(args.min_hops, args.max_hops, args.vicinity_min, args.vicinity_max)
    out = Path(args.output) if args.output else _out_dir(args) / "deviation.jsonl"
    summary = emit_dataset(worlds, args.per_world, args.mix, args.seed, out, params)
    print(to_json({"output": str(out), **summary}), end="")
    return 0


# -- dtw-check ------------------------------------------------------------------------

def dtw_pairs(n: int, max_len: int, dim: int, seed: int) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Seeded random-walk sequence pairs with lengths in [1, max_len]."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        la, lb = rng.integers(1, max_len + 1, size=2)
        yield (np.cumsum(rng.standard_normal((la, dim)), axis=0),
               np.cumsum(rng.standard_normal((lb, dim)), axis=0))


def cmd_dtw_check(args) -> int:
    rows = ["pair,len_a,len_b,exact,fast,ratio"]
    within = below = 0
    t0 = time.perf_counter()
    for k, (a, b) in enumerate(dtw_pairs(args.pairs, args.max_len, args.dim, args.seed)):
        exact = dtw_exact(a, b).cost
        fast = fastdtw(a, b, radius=args.radius).cost
        ratio = fast / exact if exact > 0 else (1.0 if fast == 0 else float("inf"))
        below += fast < exact - 1e-9
        within += ratio <= 1.05
        rows.append(f"{k},{len(a)},{len(b)},{exact:.9f},{fast:.9f},{ratio:.9f}")
    out = Path(args.output) if args.output else _out_dir(args) / "dtw_check.csv"
    out.write_text("\n".join(rows) + "\n", encoding="utf-8")
    summary = {"pairs": args.pairs, "radius": args.radius, "below_exact": int(below),
               "within_5pct": int(within), "seconds": round(time.perf_counter() - t0, 3), "output": str(out)}
    print(json.dumps(summary, sort_keys=True))
    return 0 if below == 0 else 1


# -- eval ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    agent = AgentConfig(c_thresh=args.c_thresh, max_steps=args.max_steps, explore_cooldown=args.cooldown,
                        selector=SelectorParams(gamma=args.gamma, act_filter=args.act_filter),
                        novelty_threshold=args.novelty_thresh, count_transit_hops=args.count_transit_hops)
    cfg = StudyConfig(worlds=args.worlds, seed=args.seed, p_err=args.p_err, noise=args.noise,
                      d_max=args.d_max, d_th=args.d_th, close_radius=args.close_radius, agent=agent)
    report = efficacy_study(cfg)
    out = _out_dir(args)
    rows = [metrics_row(r.world, r.instr, f"{r.agent}:{r.scenario}", r.metrics, r.delta_sr, r.delta_spl)
            for r in report.rows]
    (out / "study.csv").write_text(to_csv(rows), encoding="utf-8")
    (out / "study_summary.json").write_text(to_json(report.summary()), encoding="utf-8")
    print(to_json(report.summary()), end="")
    return 0


# -- parser -------------------------------------------------------------------------

class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Shows defaults unless the help text already describes them."""

    def _get_help_string(self, action):
        text = action.help or ""
        if action.required or action.default is None or "default" in text:
            return text
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = argparse.ArgumentParser(prog="frontiernav", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world", help="generate a seeded world JSON", formatter_class=fmt)
    p.add_argument("--nodes", type=int, default=30, help="nodes per world")
    p.add_argument("--rooms", type=int, default=6, help="rooms per world")
    p.add_argument("--instructions", type=int, default=3, help="instructions per world")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("-o", "--output", help="output file (default: <out-dir>/world.json)")
    _output_options(p)
    p.set_defaults(func=cmd_gen_world)

    p = sub.add_parser("run", help="run episodes and write metrics, traces and trajectories", formatter_class=fmt)
    _world_options(p)
    _agent_options(p)
    _oracle_options(p)
    p.add_argument("--episodes", type=int, default=10, help="number of episodes (instructions are cycled)")
    p.add_argument("--seed", type=int, required=True, help="episode seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output order is unaffected")
    _output_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("kidnap", help="kidnapping perturbation study on one world", formatter_class=fmt)
    _world_options(p)
    _agent_options(p)
    _oracle_options(p)
    p.add_argument("--episodes", type=int, default=10, help="number of episodes (instructions are cycled)")
    p.add_argument("--seed", type=int, required=True, help="episode seed")
    p.add_argument("--scenarios", nargs="+", choices=SCENARIOS, default=list(SCENARIOS), help="kidnap scenarios")
    p.add_argument("--close-radius", type=int, default=5, help="hop radius of close kidnap targets")
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output order is unaffected")
    _output_options(p)
    p.set_defaults(func=cmd_kidnap)

    p = sub.add_parser("devgen", help="emit a labelled deviation dataset (JSONL)", formatter_class=fmt)
    p.add_argument("--world", nargs="+", help="world JSON files (default: generate --worlds worlds)")
    p.add_argument("--worlds", type=int, default=20, help="generated worlds")
    p.add_argument("--nodes", type=int, default=30, help="nodes per world")
    p.add_argument("--rooms", type=int, default=6, help="rooms per world")
    p.add_argument("--instructions", type=int, default=3, help="instructions per world")
    p.add_argument("--per-world", type=int, default=50, help="samples per world")
    p.add_argument("--mix", type=_mix_arg, default=None, help="revisit,frontier,vicinity ratios (default uniform)")
    p.add_argument("--min-hops", type=int, default=1, help="shortest outbound detour")
    p.add_argument("--max-hops", type=int, default=4, help="longest outbound detour (0 disables detours)")
    p.add_argument("--vicinity-min", type=int, default=2, help="closest vicinity endpoint, hops off the route")
    p.add_argument("--vicinity-max", type=int, default=4, help="farthest vicinity endpoint, hops off the route")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("-o", "--output", help="output file (default: <out-dir>/deviation.jsonl)")
    _output_options(p)
    p.set_defaults(func=cmd_devgen)

    p = sub.add_parser("dtw-check", help="compare FastDTW against exact DTW on random pairs", formatter_class=fmt)
    p.add_argument("--pairs", type=int, default=1000, help="random sequence pairs")
    p.add_argument("--max-len", type=int, default=64, help="longest sequence")
    p.add_argument("--dim", type=int, default=1, help="sequence dimension")
    p.add_argument("--radius", type=int, default=2, help="FastDTW search radius")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("-o", "--output", help="CSV file (default: <out-dir>/dtw_check.csv)")
    _output_options(p)
    p.set_defaults(func=cmd_dtw_check)

    p = sub.add_parser("eval", help="recovery-efficacy study across generated worlds", formatter_class=fmt)
    p.add_argument("--worlds", type=int, default=500, help="generated worlds")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--p-err", type=float, default=0.3, help="teacher mistake probability")
    p.add_argument("--noise", type=float, default=0.05, help="teacher logit noise")
    p.add_argument("--d-max", type=_d_max_arg, default=STUDY_D_MAX,
                   help="distance at which recovery confidence reaches 0")
    p.add_argument("--d-th", type=float, default=SUCCESS_DISTANCE, help="success radius in meters")
    p.add_argument("--close-radius", type=int, default=5, help="hop radius of close kidnap targets")
    p.add_argument("--gamma", type=float, default=0.1, help="recency decay rate")
    p.add_argument("--c-thresh", type=float, default=0.5, help="confidence threshold that triggers exploration")
    p.add_argument("--novelty-thresh", type=float, default=NOVELTY_THRESHOLD, help="scene-memory insertion threshold")
    p.add_argument("--act-filter", type=float, default=0.5, help="relative action-score filter for alignment")
    p.add_argument("--max-steps", type=int, default=15, help="decision budget per episode")
    p.add_argument("--cooldown", type=int, default=1, help="steps between explore decisions")
    p.add_argument("--count-transit-hops", action="store_true", help="charge every transit hop to the budget")
    _output_options(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, WorldError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"frontiernav {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
