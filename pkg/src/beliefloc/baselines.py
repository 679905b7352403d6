"""Comparison policies: uniform cost search and a random act/perceive alternation."""

from __future__ import annotations

import enum
from dataclasses import replace

import numpy as np

from .belief import BeliefState, entropy, max_belief
from .executor import EpisodeRecord, TraceStep, _true_state, apply_step, run_episode
from .planner import ClosedList, Planner, PlannerConfig
from .world import WorldModel

RANDOM_STEP_CAP = 500


class PolicyKind(str, enum.Enum):
    OURS = "ours"
    UNIFORM = "uniform"
    RANDOM = "random"

    @classmethod
    def parse(cls, name: str) -> PolicyKind:
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; choose from {[p.value for p in cls]}") from None


def random_policy_step(rng: np.random.Generator, step_index: int, world: WorldModel) -> str:
    """Even steps draw an actuation action, odd steps a perception action."""
    if not world.actuation or not world.perception:
        raise ValueError("the random policy needs at least one actuation and one perception action")
    pool = world.actuation if step_index % 2 == 0 else world.perception
    return pool[int(rng.integers(len(pool)))].name


def run_random_episode(
    world: WorldModel,
    initial_belief: BeliefState | None,
    actor,
    cfg: PlannerConfig | None = None,
    *,
    rng_seed: int = 0,
    max_steps: int = RANDOM_STEP_CAP,
) -> EpisodeRecord:
    cfg = cfg or PlannerConfig()
    rng = np.random.default_rng(rng_seed)
    belief = initial_belief or BeliefState.uniform(world.state_count)
    rec = EpisodeRecord(success=False)
    while True:
        if max_belief(belief)[1] >= cfg.p_goal:
            rec.success, rec.reason = True, "goal"
            break
        if len(rec.steps) >= max_steps:
            rec.reason = "step-cap"
            break
        name = random_policy_step(rng, len(rec.steps), world)
        obs = actor.take_action(name)
        belief = apply_step(world, belief, name, obs)
        rec.executed_cost += world.cost(name)
        rec.steps.append(TraceStep(len(rec.steps), name, obs, max_belief(belief)[1], entropy(belief)))
    rec.localized_state = max_belief(belief)[0] if rec.success else None
    rec.true_state = _true_state(actor)
    rec.final_belief = belief
    return rec


def run_policy(
    policy: PolicyKind | str,
    world: WorldModel,
    initial_belief: BeliefState | None,
    actor,
    cfg: PlannerConfig | None = None,
    *,
    memoize: bool = True,
    rng_seed: int = 0,
) -> EpisodeRecord:
    policy = PolicyKind.parse(policy) if isinstance(policy, str) else policy
    cfg = cfg or PlannerConfig()
    if policy is PolicyKind.RANDOM:
        return run_random_episode(world, initial_belief, actor, cfg, rng_seed=rng_seed)
    cfg = replace(cfg, use_heuristic=policy is PolicyKind.OURS)
    planner = Planner(world, cfg, ClosedList(memoize=memoize))
    return run_episode(world, initial_belief, actor, cfg, planner=planner)
