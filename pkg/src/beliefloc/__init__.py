"""Active localization by best-first search over discrete belief states."""

from .belief import BeliefState, ZeroMassError, entropy, max_belief, normalize, observation_probability, predict, update
from .executor import ActorError, EpisodeRecord, ScriptedActor, SimActor, run_episode
from .mapio import ParseError, load_map, save_map
from .planner import NoPlan, Plan, Planner, PlannerConfig, next_nodes, plan, uniform_plan
from .world import (
    ActuationAction,
    GridWorldSpec,
    PerceptionAction,
    SpecError,
    ValidationError,
    WorldModel,
    compile_grid_world,
    random_world,
)

__version__ = "0.1.0"

__all__ = [
    "ActorError",
    "ActuationAction",
    "BeliefState",
    "EpisodeRecord",
    "GridWorldSpec",
    "NoPlan",
    "ParseError",
    "PerceptionAction",
    "Plan",
    "Planner",
    "PlannerConfig",
    "ScriptedActor",
    "SimActor",
    "SpecError",
    "ValidationError",
    "WorldModel",
    "ZeroMassError",
    "compile_grid_world",
    "entropy",
    "load_map",
    "max_belief",
    "next_nodes",
    "normalize",
    "observation_probability",
    "plan",
    "predict",
    "random_world",
    "run_episode",
    "save_map",
    "uniform_plan",
    "update",
]
