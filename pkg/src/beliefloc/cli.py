"""Command line entry point: ``bench``, ``run``, ``gen-map`` and ``plan``."""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .baselines import PolicyKind, run_policy
from .belief import BeliefState, entropy, max_belief
from .bench import BenchConfig, cmd_bench, format_summary
from .executor import SimActor, write_trace
from .mapio import ParseError, load_map, save_map
from .planner import NoPlan, Planner, PlannerConfig
from .world import SpecError, ValidationError, compile_grid_world, grid_for_states, random_world

BUNDLED_MAPS = ("two_by_two", "kitchen", "hallway")


def _int_list(text: str) -> list[int]:
    return [int(float(t)) for t in text.replace(" ", "").split(",") if t]


def _grid_dims(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None


def _noise_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p-goal", type=float, default=0.95, help="localization threshold on the max belief")
    p.add_argument("--fp", type=float, default=0.01, help="false-positive probability of Look")
    p.add_argument("--fn", type=float, default=0.01, help="false-negative probability of Look")
    p.add_argument("--fail-prob", type=float, default=0.02, help="actuation failure probability")
    p.add_argument("--cost-act", type=float, default=10.0)
    p.add_argument("--cost-perc", type=float, default=1.0)
    p.add_argument("--orientations", type=int, default=4, choices=(4, 8))
    p.add_argument("--view-range", type=int, default=2, help="sight range in cells, 0 for unlimited")
    p.add_argument(
        "--view-cone",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="see a 90 degree wedge (default) or, with --no-view-cone, a straight line",
    )


def _world_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("map", nargs="?", help=f"map file or one of {', '.join(BUNDLED_MAPS)}")
    p.add_argument("--grid", type=_grid_dims, help="random WIDTHxHEIGHT world instead of a map file")
    p.add_argument("--seed", type=int, default=0)
    _noise_args(p)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beliefloc", description="Active localization by planning in belief space.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="batch episodes over sizes and policies")
    b.add_argument("--sizes", type=_int_list, default=[100], help="comma-separated state-space sizes")
    b.add_argument("--episodes", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--policy", default="ours,uniform,random", help="comma-separated subset of ours,uniform,random")
    _noise_args(b)
    b.add_argument("--max-expansions", type=int, default=1_000_000)
    b.add_argument("--time-limit", type=float, default=None, help="per plan call, seconds")
    b.add_argument("--no-memo", action="store_true", help="disable successor memoization across replans")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", help="CSV output path (default: print summary only)")
    b.add_argument("--quiet", action="store_true")

    r = sub.add_parser("run", help="one simulated episode with a step trace")
    _world_args(r)
    r.add_argument("--policy", default="ours", choices=[p.value for p in PolicyKind])
    r.add_argument("--initial", default="uniform", help="'uniform' or 'state:K' for the initial belief")
    r.add_argument("--true-state", type=int, help="hidden start state (default: drawn from the seed)")
    r.add_argument("--out", help="write the trace as JSON lines")

    g = sub.add_parser("gen-map", help="write a random grid world map file")
    g.add_argument("--size", type=int, default=100, help="target number of states")
    g.add_argument("--grid", type=_grid_dims, help="explicit WIDTHxHEIGHT")
    g.add_argument("--seed", type=int, default=0)
    _noise_args(g)
    g.add_argument("--out", required=True)

    p = sub.add_parser("plan", help="plan from a belief and print the actions with expected beliefs")
    _world_args(p)
    p.add_argument("--policy", default="ours", choices=("ours", "uniform"))
    p.add_argument("--initial", default="uniform")
    p.add_argument("--max-expansions", type=int, default=1_000_000)
    return ap


def _spec_overrides(args) -> dict:
    return dict(
        p_fp=args.fp,
        p_fn=args.fn,
        p_fail=args.fail_prob,
        actuation_cost=args.cost_act,
        perception_cost=args.cost_perc,
        view_range=args.view_range,
        view_cone=args.view_cone,
    )


def _object_count_range(w: int, h: int) -> dict:
    """Same objects-per-cell density as the benchmark worlds."""
    lo, hi = BenchConfig.object_density
    return dict(min_objects=max(round(lo * w * h), 1), max_objects=max(round(hi * w * h), 1))


def _load_world(args):
    """(world, default true state or None)."""
    if args.grid:
        spec, start = random_world(
            *args.grid, args.seed, orientations=args.orientations, **_object_count_range(*args.grid), **_spec_overrides(args)
        )
        return compile_grid_world(spec), start
    if not args.map:
        raise SystemExit("error: give a map file or --grid WxH")
    if args.map in BUNDLED_MAPS:
        with resources.as_file(resources.files("beliefloc") / "maps" / f"{args.map}.json") as path:
            return load_map(path), None
    return load_map(args.map), None


def _initial(text: str, n: int) -> BeliefState:
    if text == "uniform":
        return BeliefState.uniform(n)
    if text.startswith("state:"):
        return BeliefState.point(n, int(text.split(":", 1)[1]))
    raise SystemExit(f"error: --initial must be 'uniform' or 'state:K', got {text!r}")


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        sizes=tuple(args.sizes),
        episodes=args.episodes,
        seed=args.seed,
        policies=tuple(PolicyKind.parse(p) for p in args.policy.split(",") if p),
        p_goal=args.p_goal,
        p_fp=args.fp,
        p_fn=args.fn,
        p_fail=args.fail_prob,
        actuation_cost=args.cost_act,
        perception_cost=args.cost_perc,
        orientations=args.orientations,
        view_range=args.view_range,
        view_cone=args.view_cone,
        max_expansions=args.max_expansions,
        time_limit=args.time_limit,
        memoize=not args.no_memo,
        workers=args.workers,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    def progress(row):
        if not args.quiet:
            print(
                f"size={row.size} policy={row.policy} seed={row.seed} success={int(row.success)} "
                f"cost={row.cost:g} replans={row.replans}",
                file=sys.stderr,
            )

    report = cmd_bench(cfg, progress)
    if args.out:
        Path(args.out).write_text(report.to_csv())
    print(format_summary(report))
    return 0


def _cmd_run(args) -> int:
    world, start = _load_world(args)
    cfg = PlannerConfig(p_goal=args.p_goal)
    true_state = args.true_state if args.true_state is not None else start
    if true_state is None:
        import numpy as np

        true_state = int(np.random.default_rng(args.seed).integers(world.state_count))
    actor = SimActor(world, true_state, rng_seed=args.seed)
    rec = run_policy(args.policy, world, _initial(args.initial, world.state_count), actor, cfg, rng_seed=args.seed)
    print(f"{'step':>4}  {'action':<14} {'observation':<28} {'max_b':>7} {'entropy':>8}")
    for s in rec.steps:
        mark = "  (replanned)" if s.replanned else ""
        print(f"{s.index:>4}  {s.action:<14} {str(s.observation or '-'):<28} {s.max_belief:>7.4f} {s.entropy:>8.4f}{mark}")
    if args.out:
        with open(args.out, "w") as fh:
            write_trace(rec, fh)
    if rec.success:
        print(
            f"localized at {world.label(rec.localized_state)} (true {world.label(rec.true_state)}), "
            f"cost {rec.executed_cost:g}, {rec.replans} replans"
        )
        return 0
    print(f"failed: {rec.reason}, cost {rec.executed_cost:g}, {rec.replans} replans")
    return 1


def _cmd_gen_map(args) -> int:
    w, h = args.grid or grid_for_states(args.size, args.orientations)
    spec, start = random_world(
        w, h, args.seed, orientations=args.orientations, **_object_count_range(w, h), **_spec_overrides(args)
    )
    save_map(spec, args.out)
    print(f"wrote {args.out}: {w}x{h}x{args.orientations} = {spec.state_count} states, "
          f"{len(spec.object_placements)} objects, suggested start state {start}")
    return 0


def _cmd_plan(args) -> int:
    world, _ = _load_world(args)
    cfg = PlannerConfig(p_goal=args.p_goal, max_expansions=args.max_expansions, use_heuristic=args.policy == "ours")
    planner = Planner(world, cfg)
    result = planner.plan(_initial(args.initial, world.state_count))
    st = planner.last_stats
    if isinstance(result, NoPlan):
        print(f"no plan ({result.reason}) after {st.expansions} expansions")
        return 1
    for i, step in enumerate(result.steps):
        s, p = max_belief(step.belief)
        obs = f" -> {step.observation}" if step.observation is not None else ""
        print(f"{i:>3}  {step.action}{obs:<30} p={step.probability:.4f}  max_b={p:.4f} at {world.label(s)}  "
              f"H={entropy(step.belief):.4f}")
    print(f"cost {result.total_cost:g}, {st.expansions} expansions, {st.duration:.3f} s")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"bench": _cmd_bench, "run": _cmd_run, "gen-map": _cmd_gen_map, "plan": _cmd_plan}
    try:
        return handlers[args.command](args)
    except (ParseError, ValidationError, SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
