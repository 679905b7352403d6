"""Interleaved plan / act / perceive / replan loop and a simulated robot."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import IO, Protocol, Sequence

import numpy as np

from .belief import BeliefState, entropy, max_belief, predict, same_belief, update
from .planner import ClosedList, NoPlan, Planner, PlannerConfig
from .world import PerceptionAction, WorldModel


class ActorError(RuntimeError):
    pass


class Actor(Protocol):
    def take_action(self, action: str) -> str | None:
        """Execute ``action``; perception actions return an observation, actuation returns None."""


def sample_transition(rng: np.random.Generator, true_state: int, a) -> int:
    cols, probs = a.row(true_state)
    if cols.size == 1:
        return int(cols[0])
    return int(cols[_draw(rng, probs)])


def sample_observation(rng: np.random.Generator, true_state: int, a: PerceptionAction) -> str:
    return a.observations[_draw(rng, a.likelihood[:, true_state])]


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    # inverse-CDF draw; one uniform per call keeps streams easy to replay
    c = np.cumsum(probs)
    k = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(k, probs.size - 1)


class SimActor:
    """Simulated robot with a hidden true state."""

    def __init__(self, world: WorldModel, true_state: int, rng_seed: int = 0):
        if not 0 <= true_state < world.state_count:
            raise ActorError(f"true state {true_state} outside [0, {world.state_count})")
        self.world = world
        self.true_state = int(true_state)
        self.rng = np.random.default_rng(rng_seed)
        self.trajectory = [self.true_state]

    def take_action(self, action: str) -> str | None:
        try:
            a = self.world.action(action)
        except KeyError as exc:
            raise ActorError(str(exc)) from None
        if isinstance(a, PerceptionAction):
            return sample_observation(self.rng, self.true_state, a)
        self.true_state = sample_transition(self.rng, self.true_state, a)
        self.trajectory.append(self.true_state)
        return None


class ScriptedActor:
    """Replays a fixed observation sequence; actuation actions are accepted and ignored."""

    def __init__(self, world: WorldModel, observations: Sequence[str]):
        self.world = world
        self.observations = list(observations)
        self.log: list[tuple[str, str | None]] = []

    def take_action(self, action: str) -> str | None:
        if not self.world.is_perception(action):
            self.log.append((action, None))
            return None
        if not self.observations:
            raise ActorError(f"script exhausted at {action!r}")
        obs = self.observations.pop(0)
        self.log.append((action, obs))
        return obs


@dataclass
class TraceStep:
    index: int
    action: str
    observation: str | None
    max_belief: float
    entropy: float
    replanned: bool = False


@dataclass
class EpisodeRecord:
    success: bool
    executed_cost: float = 0.0
    replans: int = 0
    plan_times: list[float] = field(default_factory=list)
    expansions: list[int] = field(default_factory=list)
    steps: list[TraceStep] = field(default_factory=list)
    localized_state: int | None = None
    true_state: int | None = None
    final_belief: BeliefState | None = field(default=None, repr=False)
    reason: str = ""

    @property
    def correct(self) -> bool:
        return self.success and self.localized_state == self.true_state

    @property
    def trace(self) -> list[tuple[str, str | None]]:
        return [(s.action, s.observation) for s in self.steps]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("final_belief")
        return d


def write_trace(record: EpisodeRecord, fh: IO[str]) -> None:
    """One JSON object per executed step."""
    for s in record.steps:
        fh.write(json.dumps(asdict(s), sort_keys=True) + "\n")


def fold_filter(world: WorldModel, initial: BeliefState, trace) -> BeliefState:
    """Replay a trace of (action, observation) pairs through the Bayes filter."""
    b = initial
    for action, obs in trace:
        a = world.action(action)
        b = update(b, a, obs) if isinstance(a, PerceptionAction) else predict(b, a)
    return b


def apply_step(
    world: WorldModel, belief: BeliefState, action: str, obs: str | None, *, propagate: bool = True
) -> BeliefState:
    """Live-belief filter step shared by every policy loop.

    ``propagate=False`` skips prediction after actuation actions.
    """
    a = world.action(action)
    if isinstance(a, PerceptionAction):
        if obs is None:
            raise ActorError(f"perception action {action!r} returned no observation")
        return update(belief, a, obs)
    if obs is not None:
        raise ActorError(f"actuation action {action!r} returned an observation")
    return predict(belief, a) if propagate else belief


def _true_state(actor) -> int | None:
    return getattr(actor, "true_state", None)


def run_episode(
    world: WorldModel,
    initial_belief: BeliefState | None,
    actor: Actor,
    cfg: PlannerConfig | None = None,
    *,
    planner: Planner | None = None,
    memoize: bool = True,
    perception_only_filter: bool = False,
    max_steps: int = 10_000,
) -> EpisodeRecord:
    """Plan from the current belief, execute, and replan whenever the live belief
    leaves the plan's expected beliefs.

    ``perception_only_filter`` reproduces the literal reading in which the live
    belief is updated after perception actions only (actuation is not propagated).
    """
    cfg = cfg or PlannerConfig()
    belief = initial_belief or BeliefState.uniform(world.state_count)
    planner = planner or Planner(world, cfg, ClosedList(memoize=memoize))
    rec = EpisodeRecord(success=False)

    def call_planner(b):
        result = planner.plan(b)
        rec.plan_times.append(planner.last_stats.duration)
        rec.expansions.append(planner.last_stats.expansions)
        return result

    state, pmax = max_belief(belief)
    if pmax >= cfg.p_goal:
        rec.success, rec.reason = True, "goal"
    else:
        path = call_planner(belief)
        i = 0
        replanned = False
        while True:
            if isinstance(path, NoPlan):
                rec.reason = path.reason
                break
            if i >= len(path):
                rec.success = max_belief(belief)[1] >= cfg.p_goal
                rec.reason = "goal" if rec.success else "plan-exhausted"
                break
            if len(rec.steps) >= max_steps:
                rec.reason = "step-cap"
                break
            step = path[i]
            obs = actor.take_action(step.action)
            a = world.action(step.action)
            rec.executed_cost += a.cost
            belief = apply_step(world, belief, step.action, obs, propagate=not perception_only_filter)
            _, pmax = max_belief(belief)
            rec.steps.append(TraceStep(len(rec.steps), step.action, obs, pmax, entropy(belief), replanned))
            replanned = False
            if pmax >= cfg.p_goal:
                rec.success, rec.reason = True, "goal"
                break
            diverged = not same_belief(belief, step.belief, cfg.belief_quantum)
            if diverged and (isinstance(a, PerceptionAction) or not perception_only_filter):
                rec.replans += 1
                replanned = True
                path = call_planner(belief)
                i = 0
                continue
            i += 1
    rec.localized_state = max_belief(belief)[0] if rec.success else None
    rec.true_state = _true_state(actor)
    rec.final_belief = belief
    return rec
