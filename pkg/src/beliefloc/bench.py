"""Seeded batch runs over world sizes and policies, with CSV output and summary tables."""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .baselines import PolicyKind, run_policy
from .executor import EpisodeRecord, SimActor
from .planner import PlannerConfig
from .world import compile_grid_world, grid_for_states, random_world

CSV_FIELDS = ("size", "policy", "seed", "success", "cost", "replans", "plan_time_total", "expansions", "plan_times_json")
TIMING_FIELDS = ("plan_time_total", "plan_times_json")


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = (100,)
    episodes: int = 100
    seed: int = 0
    policies: tuple[PolicyKind, ...] = (PolicyKind.OURS, PolicyKind.UNIFORM, PolicyKind.RANDOM)
    p_goal: float = 0.95
    p_fp: float = 0.01
    p_fn: float = 0.01
    p_fail: float = 0.02
    actuation_cost: float = 10.0
    perception_cost: float = 1.0
    orientations: int = 4
    # objects per cell; a 5x5 grid gets 4 to 8 objects and larger grids keep the same density
    object_density: tuple[float, float] = (0.16, 0.32)
    view_range: int = 2
    view_cone: bool = True
    max_expansions: int = 1_000_000
    time_limit: float | None = None  # per plan call, seconds
    memoize: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(
            self, "policies", tuple(PolicyKind.parse(p) if isinstance(p, str) else p for p in self.policies)
        )

    def validate(self) -> None:
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not self.sizes or not self.policies:
            raise ValueError("need at least one size and one policy")
        if self.orientations not in (4, 8):
            raise ValueError("orientations must be 4 or 8")
        for s in self.sizes:
            w, h = grid_for_states(s, self.orientations)
            if w * h < 4:
                raise ValueError(f"size {s} is too small for a grid world")
        if not 0 < self.p_goal <= 1:
            raise ValueError("p_goal must lie in (0, 1]")
        for name in ("p_fp", "p_fn", "p_fail"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not (self.actuation_cost > 0 and self.perception_cost > 0):
            raise ValueError("costs must be positive")
        lo, hi = self.object_density
        if not 0 <= lo <= hi <= 1:
            raise ValueError("object_density must satisfy 0 <= low <= high <= 1")

    def grid(self, size: int) -> tuple[int, int]:
        return grid_for_states(size, self.orientations)

    def object_range(self, size: int) -> tuple[int, int]:
        w, h = self.grid(size)
        lo, hi = self.object_density
        return max(round(lo * w * h), 1), max(round(hi * w * h), 1)

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(p_goal=self.p_goal, max_expansions=self.max_expansions, time_limit=self.time_limit)


@dataclass
class EpisodeRow:
    size: int
    policy: str
    seed: int
    success: bool
    cost: float
    replans: int
    plan_time_total: float
    expansions: int
    plan_times: list[float] = field(default_factory=list)
    correct: bool = False
    reason: str = ""

    def csv_row(self) -> dict:
        return {
            "size": self.size,
            "policy": self.policy,
            "seed": self.seed,
            "success": int(self.success),
            "cost": repr(float(self.cost)),
            "replans": self.replans,
            "plan_time_total": repr(float(self.plan_time_total)),
            "expansions": self.expansions,
            "plan_times_json": json.dumps(self.plan_times),
        }

    @classmethod
    def from_csv(cls, d: dict) -> EpisodeRow:
        return cls(
            int(d["size"]),
            d["policy"],
            int(d["seed"]),
            bool(int(d["success"])),
            float(d["cost"]),
            int(d["replans"]),
            float(d["plan_time_total"]),
            int(d["expansions"]),
            json.loads(d["plan_times_json"]),
        )


@dataclass
class SummaryRow:
    size: int
    policy: str
    episodes: int
    success_rate: float
    mean_plan_time: float  # planning seconds per episode, all calls included
    mean_call_time: float  # seconds per plan call, pooled over episodes
    mean_replans: float
    mean_cost: float
    mean_expansions: float
    median_expansions: float


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list[EpisodeRow]
    summary: list[SummaryRow]
    replan_ordinals: dict[tuple[int, str], list[float]]

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)

    def summary_for(self, size: int, policy: PolicyKind | str) -> SummaryRow:
        name = policy.value if isinstance(policy, PolicyKind) else policy
        for r in self.summary:
            if r.size == size and r.policy == name:
                return r
        raise KeyError((size, name))

    def rows_for(self, size: int, policy: PolicyKind | str) -> list[EpisodeRow]:
        name = policy.value if isinstance(policy, PolicyKind) else policy
        return [r for r in self.rows if r.size == size and r.policy == name]


def child_seed(master: int, size: int, episode: int) -> int:
    """Seed shared by every policy for one (size, episode) so policies face the same worlds."""
    return int(np.random.SeedSequence([master, size, episode]).generate_state(1, dtype=np.uint32)[0])


def episode_world(cfg: BenchConfig, size: int, seed: int):
    w, h = cfg.grid(size)
    lo, hi = cfg.object_range(size)
    spec, start = random_world(
        w,
        h,
        seed,
        orientations=cfg.orientations,
        min_objects=lo,
        max_objects=hi,
        p_fp=cfg.p_fp,
        p_fn=cfg.p_fn,
        p_fail=cfg.p_fail,
        actuation_cost=cfg.actuation_cost,
        perception_cost=cfg.perception_cost,
        view_range=cfg.view_range,
        view_cone=cfg.view_cone,
    )
    return compile_grid_world(spec), start


def run_one(cfg: BenchConfig, size: int, policy: PolicyKind, seed: int) -> tuple[EpisodeRow, EpisodeRecord]:
    world, start = episode_world(cfg, size, seed)
    actor = SimActor(world, start, rng_seed=seed)
    rec = run_policy(policy, world, None, actor, cfg.planner_config(), memoize=cfg.memoize, rng_seed=seed)
    row = EpisodeRow(
        size,
        policy.value,
        seed,
        rec.success,
        rec.executed_cost,
        rec.replans,
        float(sum(rec.plan_times)),
        int(sum(rec.expansions)),
        list(rec.plan_times),
        rec.correct,
        rec.reason,
    )
    return row, rec


def _job(args) -> EpisodeRow:
    return run_one(*args)[0]


def cmd_bench(cfg: BenchConfig, progress=None) -> BenchReport:
    cfg.validate()
    jobs = [
        (cfg, size, policy, child_seed(cfg.seed, size, ep))
        for size in cfg.sizes
        for policy in cfg.policies
        for ep in range(cfg.episodes)
    ]
    rows: list[EpisodeRow] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for row in pool.map(_job, jobs):  # map preserves job order
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for job in jobs:
            row = _job(job)
            rows.append(row)
            if progress:
                progress(row)
    return build_report(cfg, rows)


def build_report(cfg: BenchConfig, rows: Sequence[EpisodeRow]) -> BenchReport:
    rows = list(rows)
    summary = summarize(rows)
    ordinals = {}
    for s in summary:
        ordinals[(s.size, s.policy)] = replan_ordinal_means([r for r in rows if (r.size, r.policy) == (s.size, s.policy)])
    return BenchReport(cfg, rows, summary, ordinals)


def _mean(xs) -> float:
    xs = list(xs)
    return float(statistics.fmean(xs)) if xs else float("nan")


def summarize(rows: Iterable[EpisodeRow]) -> list[SummaryRow]:
    """Per (size, policy) means over successful episodes; pure function of the CSV columns."""
    groups: dict[tuple[int, str], list[EpisodeRow]] = {}
    for r in rows:
        groups.setdefault((r.size, r.policy), []).append(r)
    out = []
    for (size, policy), rs in groups.items():
        ok = [r for r in rs if r.success]
        out.append(
            SummaryRow(
                size,
                policy,
                len(rs),
                len(ok) / len(rs),
                _mean(r.plan_time_total for r in ok),
                _mean(t for r in ok for t in r.plan_times),
                _mean(r.replans for r in ok),
                _mean(r.cost for r in ok),
                _mean(r.expansions for r in ok),
                float(statistics.median([r.expansions for r in ok])) if ok else float("nan"),
            )
        )
    return out


def replan_ordinal_means(rows: Iterable[EpisodeRow], upto: int | None = None, min_replans: int | None = None) -> list[float]:
    """Mean duration of the k-th replanning call, k = 1, 2, ...

    By default the k-th mean is over successful episodes with at least k replans.
    ``min_replans`` restricts every ordinal to the same set of episodes.
    """
    ok = [r for r in rows if r.success]
    if min_replans is not None:
        ok = [r for r in ok if r.replans >= min_replans]
    depth = max((r.replans for r in ok), default=0)
    if upto is not None:
        depth = min(depth, upto)
    out = []
    for k in range(1, depth + 1):
        vals = [r.plan_times[k] for r in ok if r.replans >= k and len(r.plan_times) > k]
        out.append(_mean(vals))
    return out


def rows_to_csv(rows: Iterable[EpisodeRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def rows_from_csv(text: str) -> list[EpisodeRow]:
    return [EpisodeRow.from_csv(d) for d in csv.DictReader(io.StringIO(text))]


def strip_timing(csv_text: str) -> str:
    """CSV with the wall-clock columns removed, for determinism comparisons."""
    rows = list(csv.DictReader(io.StringIO(csv_text)))
    keep = [f for f in CSV_FIELDS if f not in TIMING_FIELDS]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keep, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def format_summary(report: BenchReport, ordinals: int = 3) -> str:
    head = f"{'size':>6} {'policy':<8} {'succ':>6} {'plan_t(s)':>10} {'call_t(s)':>10} {'replans':>8} {'cost':>8} {'exp_mean':>10} {'exp_med':>9}"
    lines = [head, "-" * len(head)]
    for s in report.summary:
        lines.append(
            f"{s.size:>6} {s.policy:<8} {s.success_rate:>6.2f} {s.mean_plan_time:>10.4f} {s.mean_call_time:>10.4f} {s.mean_replans:>8.2f} "
            f"{s.mean_cost:>8.2f} {s.mean_expansions:>10.1f} {s.median_expansions:>9.0f}"
        )
    planned = [k for k in report.replan_ordinals if k[1] != PolicyKind.RANDOM.value]
    if planned and ordinals:
        lines.append("")
        lines.append("mean k-th replanning time (s), over episodes with >= k replans")
        lines.append(f"{'size':>6} {'policy':<8} " + " ".join(f"{'k=' + str(k):>9}" for k in range(1, ordinals + 1)))
        for key in planned:
            vals = report.replan_ordinals[key][:ordinals]
            vals += [float("nan")] * (ordinals - len(vals))
            lines.append(f"{key[0]:>6} {key[1]:<8} " + " ".join(f"{v:>9.4f}" for v in vals))
    return "\n".join(lines)


def config_dict(cfg: BenchConfig) -> dict:
    d = asdict(cfg)
    d["policies"] = [p.value for p in cfg.policies]
    return d
