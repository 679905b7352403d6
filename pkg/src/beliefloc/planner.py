"""Best-first search in belief space.

Nodes are scored with ``f = g + h`` where ``g`` is the accumulated action cost and
``h = entropy(b) / p`` with ``p`` the probability of the edge that produced the node
(1 for actuation edges). Setting ``use_heuristic=False`` gives uniform cost search.

Open-list entries keep only the key, scores and a parent link; the belief vector of
a node is rebuilt from its parent when the node is popped, which keeps memory flat
on large state spaces.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .belief import (
    BELIEF_QUANTUM,
    ZERO_MASS,
    BeliefState,
    _entropy_array,
    entropy,
    keys_of_rows,
)
from .world import WorldModel


@dataclass(frozen=True)
class PlannerConfig:
    p_goal: float = 0.95
    max_expansions: int = 1_000_000
    zero_mass_epsilon: float = ZERO_MASS
    belief_quantum: float = BELIEF_QUANTUM
    use_heuristic: bool = True
    time_limit: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p_goal <= 1.0:
            raise ValueError(f"p_goal must lie in (0, 1], got {self.p_goal}")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be positive")


class Successor(NamedTuple):
    belief: BeliefState
    action: str
    observation: str | None
    probability: float


class _Edges(NamedTuple):
    """Compact successor table of one belief; what the closed list memoizes."""

    kind: np.ndarray  # index into the world's edge table
    prob: np.ndarray
    ent: np.ndarray
    keys: tuple[bytes, ...]


class PlanNode:
    __slots__ = ("key", "parent", "edge", "g", "h", "f", "reach_prob", "b", "depth")

    def __init__(self, key, parent, edge, g, h, reach_prob, b=None):
        self.key = key
        self.parent = parent
        self.edge = edge  # index into the edge table, None at the root
        self.g = g
        self.h = h
        self.f = g + h
        self.reach_prob = reach_prob
        self.b = b
        self.depth = 0 if parent is None else parent.depth + 1

    def __repr__(self) -> str:
        return f"PlanNode(g={self.g:g}, h={self.h:.4g}, p={self.reach_prob:.3g}, depth={self.depth})"


@dataclass(frozen=True)
class PlanStep:
    action: str
    observation: str | None
    belief: BeliefState
    probability: float


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    total_cost: float
    initial: BeliefState | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    @property
    def actions(self) -> list[str]:
        return [s.action for s in self.steps]

    @property
    def terminal_belief(self) -> BeliefState | None:
        return self.steps[-1].belief if self.steps else self.initial


@dataclass(frozen=True)
class NoPlan:
    """Search ended without a goal node; ``reason`` is 'exhausted', 'budget' or 'timeout'."""

    reason: str
    expansions: int = 0

    @property
    def budget_exhausted(self) -> bool:
        return self.reason in ("budget", "timeout")

    def __bool__(self) -> bool:
        return False


@dataclass
class PlanStats:
    expansions: int = 0
    computed: int = 0
    cache_hits: int = 0
    generated: int = 0
    duration: float = 0.0
    open_size: int = 0
    closed_size: int = 0


class ClosedList:
    """Expanded belief keys and their successor tables, shared across replanning calls.

    With ``memoize=False`` only the key set is kept and successors are recomputed
    on every visit.
    """

    def __init__(self, memoize: bool = True, max_entries: int | None = 2_000_000):
        self.memoize = memoize
        self.max_entries = max_entries
        self._edges: dict[bytes, _Edges] = {}
        self._keys: set[bytes] = set()
        self.computed_keys: list[bytes] = []

    def __contains__(self, key: bytes) -> bool:
        return key in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def add(self, key: bytes) -> None:
        self._keys.add(key)

    def edges(self, key: bytes) -> _Edges | None:
        return self._edges.get(key)

    def store(self, key: bytes, edges: _Edges) -> None:
        self.computed_keys.append(key)
        if self.memoize and (self.max_entries is None or len(self._edges) < self.max_entries):
            self._edges[key] = edges

    def clear(self) -> None:
        self._edges.clear()
        self._keys.clear()
        self.computed_keys.clear()


class _EdgeTable:
    """Flat list of every (action, observation) edge of a world with fast batch evaluation."""

    def __init__(self, world: WorldModel):
        self.world = world
        self.n = world.state_count
        self.labels: list[tuple[str, str | None]] = [(a.name, None) for a in world.actuation]
        self.labels += list(world.stacked_perception_labels)
        self.costs = np.array(
            [a.cost for a in world.actuation]
            + [a.cost for a in world.perception for _ in a.observations],
            dtype=float,
        )
        self.n_act = len(world.actuation)
        self.T = world.stacked_transitions_t
        self.L = world.stacked_likelihood
        if self.L is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                self.LlogL = np.where(self.L > 0, self.L * np.log(np.where(self.L > 0, self.L, 1.0)), 0.0)
        self._act_t = [a.transition_t for a in world.actuation]

    def __len__(self) -> int:
        return len(self.labels)

    def successors(self, b: np.ndarray, eps: float):
        """Normalized successors of ``b`` along every surviving edge.

        Returns (edge indices, successor rows, edge probabilities, entropies).
        Entropies of perception branches come from
        H = ln m - (sum_s b L ln b + sum_s b L ln L) / m, which avoids a log per row.
        """
        kinds, blocks, probs, ents = [], [], [], []
        n = self.n
        if self.T is not None:
            nxt = (self.T @ b).reshape(self.n_act, n)
            nxt /= nxt.sum(axis=1, keepdims=True)
            kinds.append(np.arange(self.n_act))
            blocks.append(nxt)
            probs.append(np.ones(self.n_act))
            ents.append(_entropy_array(nxt))
        if self.L is not None:
            joint = self.L * b
            m = joint.sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                blogb = np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)), 0.0)
            cross = self.L @ blogb + self.LlogL @ b
            keep = m > eps
            if not keep.all():
                joint, m, cross = joint[keep], m[keep], cross[keep]
            joint /= m[:, None]
            kinds.append(np.flatnonzero(keep) + self.n_act)
            blocks.append(joint)
            probs.append(m)
            ents.append(np.log(m) - cross / m)
        if not blocks:
            z = np.zeros(0)
            return np.zeros(0, dtype=int), np.zeros((0, n)), z, z
        return (
            np.concatenate(kinds),
            np.vstack(blocks),
            np.concatenate(probs),
            np.maximum(np.concatenate(ents), 0.0),
        )

    def rebuild(self, b: np.ndarray, edge: int) -> np.ndarray | None:
        """The normalized successor of ``b`` along one edge, or None for a zero-mass branch."""
        if edge < self.n_act:
            v = self._act_t[edge] @ b
        else:
            v = self.L[edge - self.n_act] * b
        z = v.sum()
        return v / z if z > ZERO_MASS else None

    def probability(self, edge: int, mass: float) -> float:
        return 1.0 if edge < self.n_act else float(mass)


class Planner:
    """Belief-space planner bound to one world; reuse it across replans to share the closed list."""

    def __init__(
        self,
        world: WorldModel,
        cfg: PlannerConfig | None = None,
        closed: ClosedList | None = None,
        memoize: bool = True,
    ):
        self.world = world
        self.cfg = cfg or PlannerConfig()
        self.closed = closed if closed is not None else ClosedList(memoize=memoize)
        self.edges = _EdgeTable(world)
        self.last_stats = PlanStats()
        self.history: list[PlanStats] = []
        self.on_expand: Callable[[PlanNode, float], None] | None = None

    # successor generation

    def _compute_edges(self, b: np.ndarray) -> _Edges:
        kinds, post, prob, ent = self.edges.successors(b, self.cfg.zero_mass_epsilon)
        return _Edges(
            kinds,
            prob,
            ent,
            tuple(keys_of_rows(post, self.cfg.belief_quantum)) if len(kinds) else (),
        )

    def _edges_of(self, key: bytes, b: np.ndarray, stats: PlanStats) -> _Edges:
        cached = self.closed.edges(key)
        if cached is not None:
            stats.cache_hits += 1
            return cached
        e = self._compute_edges(b)
        stats.computed += 1
        self.closed.store(key, e)
        return e

    def next_nodes(self, b: BeliefState) -> list[Successor]:
        e = self._compute_edges(b.probs)
        out = []
        for k, p in zip(e.kind.tolist(), e.prob.tolist()):
            action, obs = self.edges.labels[k]
            vec = self.edges.rebuild(b.probs, k)
            out.append(Successor(BeliefState(vec, check=False), action, obs, p))
        return out

    # search

    def plan(self, initial: BeliefState) -> Plan | NoPlan:
        if len(initial) != self.world.state_count:
            raise ValueError(f"belief has {len(initial)} states, world has {self.world.state_count}")
        cfg = self.cfg
        stats = PlanStats()
        t0 = time.perf_counter()
        deadline = None if cfg.time_limit is None else t0 + cfg.time_limit
        try:
            return self._search(initial, stats, deadline)
        finally:
            stats.duration = time.perf_counter() - t0
            stats.closed_size = len(self.closed)
            self.last_stats = stats
            self.history.append(stats)

    def _search(self, initial: BeliefState, stats: PlanStats, deadline) -> Plan | NoPlan:
        cfg = self.cfg
        tab = self.edges
        b0 = initial.probs
        root = PlanNode(initial.key, None, None, 0.0, 0.0, 1.0, b0)
        if cfg.use_heuristic:
            root.h = root.f = entropy(initial)
        counter = itertools.count()
        open_heap = [(root.f, next(counter), root)]
        expanded: set[bytes] = set()
        while open_heap:
            f, _, node = heapq.heappop(open_heap)
            if node.key in expanded:
                continue
            # Successor tables are shared between beliefs with equal keys, so the goal
            # test runs on the belief rebuilt along this node's own parent chain.
            if node.b is None:
                node.b = tab.rebuild(node.parent.b, node.edge)
                if node.b is None:
                    # the shared table came from a key twin whose tiny entries kept this branch alive
                    continue
            if node.b.max() >= cfg.p_goal:
                stats.open_size = len(open_heap)
                return get_path(node, self)
            if stats.expansions >= cfg.max_expansions:
                stats.open_size = len(open_heap)
                return NoPlan("budget", stats.expansions)
            if deadline is not None and (stats.expansions & 63) == 0 and time.perf_counter() > deadline:
                stats.open_size = len(open_heap)
                return NoPlan("timeout", stats.expansions)
            if self.on_expand is not None:
                self.on_expand(node, open_heap[0][0] if open_heap else float("inf"))
            expanded.add(node.key)
            self.closed.add(node.key)
            stats.expansions += 1
            e = self._edges_of(node.key, node.b, stats)
            g = node.g
            costs = tab.costs[e.kind]
            if cfg.use_heuristic:
                hs = e.ent / e.prob
            else:
                hs = np.zeros(len(e.kind))
            for k, p, h, c, key in zip(e.kind.tolist(), e.prob.tolist(), hs.tolist(), costs.tolist(), e.keys):
                if key in expanded:
                    continue
                child = PlanNode(key, node, k, g + c, h, p)
                heapq.heappush(open_heap, (child.f, next(counter), child))
                stats.generated += 1
        stats.open_size = 0
        return NoPlan("exhausted", stats.expansions)


def get_path(goal: PlanNode, planner: Planner) -> Plan:
    """Walk parent links back to the root and return the steps in execution order."""
    chain = []
    node = goal
    while node.parent is not None:
        chain.append(node)
        node = node.parent
    chain.reverse()
    tab = planner.edges
    steps = []
    for nd in chain:
        if nd.b is None:
            nd.b = tab.rebuild(nd.parent.b, nd.edge)
        action, obs = tab.labels[nd.edge]
        steps.append(PlanStep(action, obs, BeliefState(nd.b, check=False), nd.reach_prob))
    root = node
    return Plan(tuple(steps), float(goal.g), BeliefState(root.b, check=False))


def next_nodes(b: BeliefState, world: WorldModel, cfg: PlannerConfig | None = None) -> list[Successor]:
    return Planner(world, cfg).next_nodes(b)


def plan(
    initial: BeliefState,
    world: WorldModel,
    cfg: PlannerConfig | None = None,
    closed: ClosedList | None = None,
) -> Plan | NoPlan:
    return Planner(world, cfg, closed).plan(initial)


def uniform_plan(
    initial: BeliefState,
    world: WorldModel,
    cfg: PlannerConfig | None = None,
    closed: ClosedList | None = None,
) -> Plan | NoPlan:
    cfg = replace(cfg or PlannerConfig(), use_heuristic=False)
    return Planner(world, cfg, closed).plan(initial)
