"""World models: actions, transition matrices, observation vectors, and the grid-world compiler."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

ROW_TOL = 1e-9

OBJECT_CLASSES = ("plant", "extinguisher", "chair", "screen")

# Edges in metres; the last bin is open-ended.
SCAN_BINS = (
    ("Wall<0.2m", 0.0, 0.2),
    ("Wall0.2-0.8m", 0.2, 0.8),
    ("Wall0.8-1.1m", 0.8, 1.1),
    ("Wall1.1-1.5m", 1.1, 1.5),
)
NO_WALL = "NoWall"
SCAN_OBSERVATIONS = (NO_WALL,) + tuple(b[0] for b in SCAN_BINS)

# unit grid steps (dx, dy) per heading, clockwise from north; y grows upward
HEADINGS = {
    4: ((0, 1), (1, 0), (0, -1), (-1, 0)),
    8: ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)),
}
HEADING_NAMES = {
    4: ("N", "E", "S", "W"),
    8: ("N", "NE", "E", "SE", "S", "SW", "W", "NW"),
}
ABSOLUTE_MOVES = {"Up": (0, 1), "Down": (0, -1), "Left": (-1, 0), "Right": (1, 0)}
GRID_MOVES = ("MoveForward", "MoveBackward", "RotateCW", "RotateCCW")


class SpecError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ActuationAction:
    name: str
    transition: sparse.csr_matrix
    cost: float

    def __post_init__(self):
        T = sparse.csr_matrix(self.transition, dtype=float)
        T.sum_duplicates()
        T.eliminate_zeros()
        T.sort_indices()
        object.__setattr__(self, "transition", T)

    @cached_property
    def transition_t(self) -> sparse.csr_matrix:
        return self.transition.T.tocsr()

    def row(self, state: int) -> tuple[np.ndarray, np.ndarray]:
        """Successor indices and probabilities for one source state."""
        T = self.transition
        lo, hi = T.indptr[state], T.indptr[state + 1]
        return T.indices[lo:hi], T.data[lo:hi]

    def validate(self, n: int) -> None:
        T = self.transition
        if T.shape != (n, n):
            raise ValidationError(f"actuation {self.name!r}: matrix shape {T.shape}, expected ({n}, {n})")
        if not self.cost > 0:
            raise ValidationError(f"actuation {self.name!r}: cost must be positive, got {self.cost}")
        if T.nnz and (T.data.min() < 0 or T.data.max() > 1 + ROW_TOL):
            raise ValidationError(f"actuation {self.name!r}: entries must lie in [0, 1]")
        sums = np.asarray(T.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"actuation {self.name!r}: row {i} sums to {sums[i]:.12g}, rows must be stochastic"
            )


@dataclass(frozen=True, eq=False)
class PerceptionAction:
    """A sensing action. ``likelihood[k, s]`` is P(observations[k] | s)."""

    name: str
    observations: tuple[str, ...]
    likelihood: np.ndarray
    cost: float

    def __post_init__(self):
        lik = np.array(self.likelihood, dtype=float)
        if lik.ndim != 2:
            raise ValidationError(f"perception {self.name!r}: likelihood must be a matrix")
        lik.flags.writeable = False
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "likelihood", lik)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {o: k for k, o in enumerate(self.observations)}

    def index_of(self, o: str) -> int:
        try:
            return self._index[o]
        except KeyError:
            raise KeyError(f"{o!r} is not an observation of {self.name!r}") from None

    def likelihood_of(self, o: str) -> np.ndarray:
        return self.likelihood[self.index_of(o)]

    def validate(self, n: int) -> None:
        lik = self.likelihood
        if lik.shape != (len(self.observations), n):
            raise ValidationError(
                f"perception {self.name!r}: likelihood shape {lik.shape}, "
                f"expected ({len(self.observations)}, {n})"
            )
        if len(set(self.observations)) != len(self.observations):
            raise ValidationError(f"perception {self.name!r}: duplicate observation labels")
        if not self.cost > 0:
            raise ValidationError(f"perception {self.name!r}: cost must be positive, got {self.cost}")
        if lik.min() < 0 or lik.max() > 1 + ROW_TOL:
            raise ValidationError(f"perception {self.name!r}: likelihoods must lie in [0, 1]")
        totals = lik.sum(axis=0)
        bad = np.flatnonzero(np.abs(totals - 1.0) > ROW_TOL)
        if bad.size:
            s = int(bad[0])
            raise ValidationError(
                f"perception {self.name!r}: observation likelihoods in state {s} sum to "
                f"{totals[s]:.12g}, expected 1"
            )


@dataclass(frozen=True, eq=False)
class WorldModel:
    state_count: int
    actuation: tuple[ActuationAction, ...] = ()
    perception: tuple[PerceptionAction, ...] = ()
    state_labels: tuple[str, ...] | None = None
    grid: GridWorldSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "actuation", tuple(self.actuation))
        object.__setattr__(self, "perception", tuple(self.perception))
        if self.state_labels is not None:
            object.__setattr__(self, "state_labels", tuple(self.state_labels))
        self.validate()

    def validate(self) -> None:
        n = self.state_count
        if n < 1:
            raise ValidationError("world must have at least one state")
        if not self.actuation and not self.perception:
            raise ValidationError("world must have at least one action")
        names = [a.name for a in self.actuation] + [a.name for a in self.perception]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate action names in {names}")
        for a in self.actuation:
            a.validate(n)
        for a in self.perception:
            a.validate(n)
        if self.state_labels is not None and len(self.state_labels) != n:
            raise ValidationError(f"{len(self.state_labels)} state labels for {n} states")

    @property
    def n(self) -> int:
        return self.state_count

    @cached_property
    def actions(self) -> dict:
        return {a.name: a for a in self.actuation + self.perception}

    @property
    def action_names(self) -> list[str]:
        return list(self.actions)

    def action(self, name: str):
        try:
            return self.actions[name]
        except KeyError:
            raise KeyError(f"unknown action {name!r}") from None

    def is_perception(self, name: str) -> bool:
        return isinstance(self.action(name), PerceptionAction)

    def cost(self, name: str) -> float:
        return self.action(name).cost

    def label(self, state: int) -> str:
        return self.state_labels[state] if self.state_labels else str(state)

    def with_actions(self, names: Sequence[str]) -> WorldModel:
        """Same world restricted to the named actions."""
        keep = set(names)
        missing = keep - set(self.actions)
        if missing:
            raise KeyError(f"unknown actions {sorted(missing)}")
        return WorldModel(
            self.state_count,
            tuple(a for a in self.actuation if a.name in keep),
            tuple(a for a in self.perception if a.name in keep),
            self.state_labels,
            None,
        )

    # stacked operators used by the planner's successor generator
    @cached_property
    def stacked_transitions_t(self) -> sparse.csr_matrix | None:
        if not self.actuation:
            return None
        return sparse.vstack([a.transition_t for a in self.actuation], format="csr")

    @cached_property
    def stacked_likelihood(self) -> np.ndarray | None:
        if not self.perception:
            return None
        return np.vstack([a.likelihood for a in self.perception])

    @cached_property
    def stacked_perception_labels(self) -> tuple[tuple[str, str], ...]:
        return tuple((a.name, o) for a in self.perception for o in a.observations)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WorldModel):
            return NotImplemented
        if self.state_count != other.state_count or self.state_labels != other.state_labels:
            return False
        if len(self.actuation) != len(other.actuation) or len(self.perception) != len(other.perception):
            return False
        for a, b in zip(self.actuation, other.actuation):
            if a.name != b.name or a.cost != b.cost or a.transition.shape != b.transition.shape:
                return False
            if (a.transition != b.transition).nnz:
                return False
        for a, b in zip(self.perception, other.perception):
            if a.name != b.name or a.cost != b.cost or a.observations != b.observations:
                return False
            if not np.array_equal(a.likelihood, b.likelihood):
                return False
        return True

    __hash__ = None


@dataclass(frozen=True)
class GridWorldSpec:
    """Compact parametric description of a grid world.

    States are ``cell * orientations_per_cell + heading`` with ``cell = y * width + x``
    and ``y = 0`` the bottom row. With ``orientations_per_cell == 1`` the robot has no
    heading: moves are absolute (``moves``) and Look inspects the robot's own cell.

    Visibility: with the defaults an object is seen only in the cell directly ahead.
    ``view_range`` extends the straight sight line to that many cells (0: up to the
    boundary); ``view_cone`` widens it to a 90 degree wedge around the heading.
    """

    width: int
    height: int
    orientations_per_cell: int = 4
    object_classes: tuple[str, ...] = OBJECT_CLASSES
    object_placements: tuple[tuple[str, int], ...] = ()
    p_fp: float | Mapping[str, float] = 0.01
    p_fn: float | Mapping[str, float] = 0.01
    p_fail: float = 0.02
    actuation_cost: float = 10.0
    perception_cost: float = 1.0
    wall_scan: bool = False
    cell_size: float = 1.2
    p_scan: float = 0.01
    view_range: int = 1
    view_cone: bool = False
    view_angles: bool = False
    moves: tuple[str, ...] = ("Up", "Down", "Left", "Right")

    def __post_init__(self):
        object.__setattr__(self, "object_classes", tuple(self.object_classes))
        object.__setattr__(
            self, "object_placements", tuple((str(c), int(k)) for c, k in self.object_placements)
        )
        object.__setattr__(self, "moves", tuple(self.moves))
        for name in ("p_fp", "p_fn"):
            v = getattr(self, name)
            if isinstance(v, Mapping):
                object.__setattr__(self, name, tuple(sorted((str(k), float(x)) for k, x in v.items())))

    @property
    def cells(self) -> int:
        return self.width * self.height

    @property
    def state_count(self) -> int:
        return self.cells * self.orientations_per_cell

    def noise(self, name: str, cls: str) -> float:
        v = getattr(self, name)
        if isinstance(v, tuple):
            return dict(v).get(cls, 0.0)
        return float(v)

    def decode(self, state: int) -> tuple[int, int, int]:
        """(x, y, heading) of a state id."""
        cell, h = divmod(state, self.orientations_per_cell)
        y, x = divmod(cell, self.width)
        return x, y, h

    def encode(self, x: int, y: int, heading: int = 0) -> int:
        return (y * self.width + x) * self.orientations_per_cell + heading

    def inside(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def state_label(self, state: int) -> str:
        x, y, h = self.decode(state)
        if self.orientations_per_cell == 1:
            return f"({x},{y})"
        return f"({x},{y},{HEADING_NAMES[self.orientations_per_cell][h]})"

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise SpecError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if self.orientations_per_cell not in (1, 4, 8):
            raise SpecError(f"orientations_per_cell must be 1, 4 or 8, got {self.orientations_per_cell}")
        if len(set(self.object_classes)) != len(self.object_classes):
            raise SpecError("duplicate object classes")
        for cls, cell in self.object_placements:
            if cls not in self.object_classes:
                raise SpecError(f"placement uses unknown class {cls!r}")
            if not 0 <= cell < self.cells:
                raise SpecError(f"placement of {cls!r} in cell {cell} is outside the {self.width}x{self.height} grid")
        probs = [("p_fail", self.p_fail), ("p_scan", self.p_scan)]
        probs += [(f"{k}[{c}]", self.noise(k, c)) for k in ("p_fp", "p_fn") for c in self.object_classes]
        for name, p in probs:
            if not 0.0 <= p < 1.0:
                raise SpecError(f"{name} = {p} must lie in [0, 1)")
        if not (self.actuation_cost > 0 and self.perception_cost > 0):
            raise SpecError("action costs must be positive")
        if self.cell_size <= 0:
            raise SpecError("cell_size must be positive")
        if self.orientations_per_cell == 1:
            unknown = set(self.moves) - set(ABSOLUTE_MOVES)
            if unknown:
                raise SpecError(f"unknown absolute moves {sorted(unknown)}")
        if self.view_angles and self.orientations_per_cell == 1:
            raise SpecError("viewing angles need oriented states")
        if self.view_range < 0:
            raise SpecError("view_range must be >= 0 (0 means unlimited)")


def _objects_by_cell(spec: GridWorldSpec) -> dict[int, set[str]]:
    out: dict[int, set[str]] = {}
    for cls, cell in spec.object_placements:
        out.setdefault(cell, set()).add(cls)
    return out


CENTRE_HALF_ANGLE = 15.0
CONE_HALF_ANGLE = 45.0


def sighting_angles(spec: GridWorldSpec, states=None) -> np.ndarray:
    """Signed viewing angle (degrees, positive to the left) of every object from every state.

    Returns an array of shape (len(states), len(object_placements)); NaN where the
    object is not visible.
    """
    states = np.arange(spec.state_count) if states is None else np.atleast_1d(np.asarray(states))
    k = spec.orientations_per_cell
    cell, h = np.divmod(states, k)
    y, x = np.divmod(cell, spec.width)
    out = np.full((states.size, len(spec.object_placements)), np.nan)
    if not spec.object_placements:
        return out
    ocell = np.array([c for _, c in spec.object_placements])
    oy, ox = np.divmod(ocell, spec.width)
    dx = ox[None, :] - x[:, None]
    dy = oy[None, :] - y[:, None]
    if k == 1:
        return np.where((dx == 0) & (dy == 0), 0.0, np.nan)
    steps = np.array(HEADINGS[k])
    hx, hy = steps[h, 0][:, None], steps[h, 1][:, None]
    rng = spec.view_range
    if spec.view_cone:
        dist = np.hypot(dx, dy)
        ang = np.degrees(np.arctan2(dy, dx) - np.arctan2(hy, hx))
        ang = (ang + 180.0) % 360.0 - 180.0
        ok = (dist > 0) & (np.abs(ang) <= CONE_HALF_ANGLE + 1e-9)
        if rng:
            ok &= np.maximum(np.abs(dx), np.abs(dy)) <= rng
        return np.where(ok, ang, np.nan)
    # straight sight line: object offset is a positive multiple of the heading step
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(hx != 0, dx / np.where(hx != 0, hx, 1), dy / np.where(hy != 0, hy, 1))
    ok = (r >= 1) & (dx == r * hx) & (dy == r * hy) & (r == np.round(r))
    if rng:
        ok &= r <= rng
    return np.where(ok, 0.0, np.nan)


def visible_classes(spec: GridWorldSpec, s: int) -> frozenset[str]:
    """Object classes seen from state ``s`` under the grid's visibility rule."""
    ang = sighting_angles(spec, [s])[0]
    return frozenset(c for (c, _), a in zip(spec.object_placements, ang) if not np.isnan(a))


def _angle_tag(a: float) -> str:
    if abs(a) < CENTRE_HALF_ANGLE:
        return "C"
    return "L" if a > 0 else "R"


def visible_with_angle(spec: GridWorldSpec, s: int) -> dict[str, str]:
    """Class -> viewing-angle bin ('C' near the optical axis, 'L' or 'R'); the most central sighting wins."""
    ang = sighting_angles(spec, [s])[0]
    best: dict[str, float] = {}
    for (c, _), a in zip(spec.object_placements, ang):
        if not np.isnan(a) and (c not in best or abs(a) < abs(best[c])):
            best[c] = float(a)
    return {c: _angle_tag(a) for c, a in best.items()}


def wall_distance(spec: GridWorldSpec, s: int) -> float:
    """Distance from the cell centre to the grid boundary along the heading, in metres."""
    x, y, h = spec.decode(s)
    dx, dy = HEADINGS[spec.orientations_per_cell][h]
    norm = math.hypot(dx, dy)
    ux, uy = dx / norm, dy / norm
    cx, cy = x + 0.5, y + 0.5
    ts = []
    if ux > 0:
        ts.append((spec.width - cx) / ux)
    elif ux < 0:
        ts.append(-cx / ux)
    if uy > 0:
        ts.append((spec.height - cy) / uy)
    elif uy < 0:
        ts.append(-cy / uy)
    return min(ts) * spec.cell_size


def scan_bin(distance: float) -> str:
    for label, lo, hi in SCAN_BINS:
        if lo <= distance < hi:
            return label
    return NO_WALL


def _move_target(spec: GridWorldSpec, s: int, name: str) -> int:
    x, y, h = spec.decode(s)
    k = spec.orientations_per_cell
    if k == 1:
        dx, dy = ABSOLUTE_MOVES[name]
    elif name == "RotateCW":
        return spec.encode(x, y, (h + 1) % k)
    elif name == "RotateCCW":
        return spec.encode(x, y, (h - 1) % k)
    else:
        dx, dy = HEADINGS[k][h]
        if name == "MoveBackward":
            dx, dy = -dx, -dy
    nx, ny = x + dx, y + dy
    if not spec.inside(nx, ny):
        return s
    return spec.encode(nx, ny, h)


def grid_transition(spec: GridWorldSpec, name: str) -> sparse.csr_matrix:
    n = spec.state_count
    rows, cols, vals = [], [], []
    for s in range(n):
        t = _move_target(spec, s, name)
        if t == s:
            rows.append(s), cols.append(s), vals.append(1.0)
        else:
            rows += [s, s]
            cols += [t, s]
            vals += [1.0 - spec.p_fail, spec.p_fail]
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _subset_label(subset: Sequence[str]) -> str:
    return "+".join(subset) if subset else "none"


def look_action(spec: GridWorldSpec, name: str = "Look") -> PerceptionAction:
    """One observation per subset of classes reported seen; noise factorizes over classes."""
    classes = spec.object_classes
    n = spec.state_count
    fp = np.array([spec.noise("p_fp", c) for c in classes])
    fn = np.array([spec.noise("p_fn", c) for c in classes])
    if spec.view_angles:
        return _angle_look_action(spec, name, fp, fn)
    ang = sighting_angles(spec)
    visible = np.zeros((n, len(classes)), dtype=bool)
    for j, (c, _) in enumerate(spec.object_placements):
        visible[:, classes.index(c)] |= ~np.isnan(ang[:, j])
    # per (state, class): P(reported seen)
    p_seen = np.where(visible, 1.0 - fn, fp)
    labels, rows = [], []
    for bits in itertools.product((False, True), repeat=len(classes)):
        bits = np.array(bits[::-1], dtype=bool)  # class 0 is the lowest bit
        rows.append(np.prod(np.where(bits, p_seen, 1.0 - p_seen), axis=1))
        labels.append(_subset_label([c for c, b in zip(classes, bits) if b]))
    return PerceptionAction(name, tuple(labels), np.array(rows), spec.perception_cost)


def _angle_look_action(spec, name, fp, fn) -> PerceptionAction:
    classes = spec.object_classes
    n = spec.state_count
    tags = ("C", "L", "R")
    # per state, class: categorical over (none, C, L, R)
    ang = sighting_angles(spec)
    per = np.zeros((n, len(classes), 4))
    for s in range(n):
        best: dict[str, float] = {}
        for (c, _), a in zip(spec.object_placements, ang[s]):
            if not np.isnan(a) and (c not in best or abs(a) < abs(best[c])):
                best[c] = float(a)
        seen = {c: _angle_tag(a) for c, a in best.items()}
        for j, c in enumerate(classes):
            if c in seen:
                per[s, j, 0] = fn[j]
                per[s, j, 1 + tags.index(seen[c])] = 1.0 - fn[j]
            else:
                per[s, j, 0] = 1.0 - fp[j]
                per[s, j, 1:] = fp[j] / 3.0
    labels, rows = [], []
    for combo in itertools.product(range(4), repeat=len(classes)):
        combo = combo[::-1]
        lik = np.ones(n)
        for j, k in enumerate(combo):
            lik = lik * per[:, j, k]
        rows.append(lik)
        parts = [f"{c}@{tags[k - 1]}" for c, k in zip(classes, combo) if k]
        labels.append(_subset_label(parts))
    return PerceptionAction(name, tuple(labels), np.array(rows), spec.perception_cost)


def scan_action(spec: GridWorldSpec, name: str = "Scan") -> PerceptionAction:
    n = spec.state_count
    m = len(SCAN_OBSERVATIONS)
    lik = np.full((m, n), spec.p_scan / (m - 1))
    for s in range(n):
        lik[SCAN_OBSERVATIONS.index(scan_bin(wall_distance(spec, s))), s] = 1.0 - spec.p_scan
    return PerceptionAction(name, SCAN_OBSERVATIONS, lik, spec.perception_cost)


def compile_grid_world(spec: GridWorldSpec) -> WorldModel:
    spec.validate()
    if spec.orientations_per_cell == 1:
        move_names = spec.moves
        if spec.wall_scan:
            raise SpecError("Scan needs oriented states")
    else:
        move_names = GRID_MOVES
    actuation = tuple(ActuationAction(m, grid_transition(spec, m), spec.actuation_cost) for m in move_names)
    perception = [look_action(spec)]
    if spec.wall_scan:
        perception.append(scan_action(spec))
    labels = tuple(spec.state_label(s) for s in range(spec.state_count))
    return WorldModel(spec.state_count, actuation, tuple(perception), labels, spec)


def grid_for_states(target: int, orientations: int = 4) -> tuple[int, int]:
    """Square-ish grid whose state count is closest to ``target``."""
    cells = max(round(target / orientations), 4)
    side = max(round(math.sqrt(cells)), 2)
    return side, side


def random_world(
    width: int,
    height: int,
    seed: int,
    *,
    orientations: int = 4,
    min_objects: int = 4,
    max_objects: int = 8,
    **overrides,
) -> tuple[GridWorldSpec, int]:
    """Random object layout and true initial state, deterministic in ``seed``."""
    if width * height < 4:
        raise SpecError("random worlds need at least 4 cells")
    rng = np.random.default_rng(seed)
    cells = width * height
    count = int(rng.integers(min_objects, max_objects + 1))
    count = min(count, cells)
    spots = rng.choice(cells, size=count, replace=False)
    kinds = rng.integers(0, len(OBJECT_CLASSES), size=count)
    placements = tuple(sorted((OBJECT_CLASSES[k], int(c)) for k, c in zip(kinds, spots)))
    spec = GridWorldSpec(
        width,
        height,
        orientations_per_cell=orientations,
        object_classes=OBJECT_CLASSES,
        object_placements=placements,
        **overrides,
    )
    spec.validate()
    start = int(rng.integers(0, spec.state_count))
    return spec, start
