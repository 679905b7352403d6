"""Map files: JSON text holding either an explicit model or a grid description.

Explicit model::

    {"states": 4, "labels": [...],
     "actuation": [{"name": "Right", "cost": 10, "matrix": [[...], ...]}],
     "perception": [{"name": "Look", "cost": 1, "observations": [...],
                     "likelihood": [[...], ...]}]}

``matrix`` may be replaced by ``"sparse": [[i, j, p], ...]``. Likelihood rows are
indexed by observation, columns by state.

Grid description::

    {"grid": {"width": 3, "height": 3, "orientations": 4, ...},
     "actuation": [{"name": "MoveForward", "cost": 10, "kind": "MoveForward"}],
     "perception": [{"name": "Look", "cost": 1, "auto": "look"}],
     "annotations": [{"class": "plant", "cell": 4}]}

Grid descriptions are compiled on load; every loaded model is validated.
"""

from __future__ import annotations

import json
import os
from typing import Any

import numpy as np
from scipy import sparse

from .world import (
    ActuationAction,
    GridWorldSpec,
    PerceptionAction,
    WorldModel,
    compile_grid_world,
)

FORMAT_VERSION = 1

# grid keys written to file, in order; "orientations" maps to orientations_per_cell
_GRID_FIELDS = {
    "width": "width",
    "height": "height",
    "orientations": "orientations_per_cell",
    "classes": "object_classes",
    "p_fp": "p_fp",
    "p_fn": "p_fn",
    "p_fail": "p_fail",
    "p_scan": "p_scan",
    "cell_size": "cell_size",
    "view_range": "view_range",
    "view_cone": "view_cone",
    "view_angles": "view_angles",
    "moves": "moves",
}


class ParseError(ValueError):
    """Malformed map file; ``line`` and ``field`` locate the problem when known."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
        self.line = line
        self.field = field
        self.path = path


def _line_of(text: str, needle: str) -> int | None:
    pos = text.find(needle)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


class _Reader:
    def __init__(self, text: str, path):
        self.text = text
        self.path = path

    def fail(self, field: str, message: str, hint: str | None = None):
        line = _line_of(self.text, f'"{hint}"') if hint else None
        raise ParseError(message, line=line, field=field, path=self.path)

    def get(self, obj: dict, key: str, where: str, kind=None, default: Any = ...):
        if not isinstance(obj, dict):
            self.fail(where, "expected an object")
        if key not in obj:
            if default is not ...:
                return default
            self.fail(f"{where}.{key}" if where else key, "missing field", hint=None)
        v = obj[key]
        if kind is not None and (not isinstance(v, kind) or isinstance(v, bool)):
            self.fail(f"{where}.{key}" if where else key, f"expected {_kind_name(kind)}, got {type(v).__name__}", key)
        return v


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def loads_map(text: str, path=None) -> WorldModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from None
    r = _Reader(text, path)
    if not isinstance(doc, dict):
        r.fail("", "top level must be an object")
    if "grid" in doc:
        return _read_grid(doc, r)
    if "states" in doc:
        return _read_explicit(doc, r)
    r.fail("", "expected a 'states' or 'grid' field")


def load_map(path) -> WorldModel:
    with open(path, encoding="utf-8") as fh:
        return loads_map(fh.read(), path)


def _read_explicit(doc: dict, r: _Reader) -> WorldModel:
    n = r.get(doc, "states", "", int)
    if n < 1:
        r.fail("states", "state count must be positive", "states")
    labels = r.get(doc, "labels", "", list, default=None)
    actuation = []
    for i, item in enumerate(r.get(doc, "actuation", "", list, default=[])):
        where = f"actuation[{i}]"
        name = r.get(item, "name", where, str)
        cost = float(r.get(item, "cost", where, (int, float)))
        if "matrix" in item:
            try:
                M = np.array(item["matrix"], dtype=float)
            except (TypeError, ValueError):
                r.fail(f"{where}.matrix", "matrix must be numeric", name)
            if M.shape != (n, n):
                r.fail(f"{where}.matrix", f"matrix shape {M.shape}, expected ({n}, {n})", name)
            T = sparse.csr_matrix(M)
        elif "sparse" in item:
            try:
                trip = np.array(item["sparse"], dtype=float).reshape(-1, 3)
            except (TypeError, ValueError):
                r.fail(f"{where}.sparse", "entries must be [row, column, probability] triples", name)
            ij = trip[:, :2]
            if ij.size and (ij.min() < 0 or ij.max() >= n or np.any(ij != np.round(ij))):
                r.fail(f"{where}.sparse", "row/column index outside the state space", name)
            T = sparse.csr_matrix((trip[:, 2], (ij[:, 0].astype(int), ij[:, 1].astype(int))), shape=(n, n))
        else:
            r.fail(where, "needs 'matrix' or 'sparse'", name)
        actuation.append(ActuationAction(name, T, cost))
    perception = []
    for i, item in enumerate(r.get(doc, "perception", "", list, default=[])):
        where = f"perception[{i}]"
        name = r.get(item, "name", where, str)
        cost = float(r.get(item, "cost", where, (int, float)))
        obs = r.get(item, "observations", where, list)
        rows = r.get(item, "likelihood", where, list)
        try:
            lik = np.array(rows, dtype=float)
        except (TypeError, ValueError):
            r.fail(f"{where}.likelihood", "likelihood must be numeric", name)
        if lik.shape != (len(obs), n):
            r.fail(f"{where}.likelihood", f"shape {lik.shape}, expected ({len(obs)}, {n})", name)
        perception.append(PerceptionAction(name, tuple(str(o) for o in obs), lik, cost))
    return WorldModel(n, tuple(actuation), tuple(perception), tuple(labels) if labels else None)


def _read_grid(doc: dict, r: _Reader) -> WorldModel:
    g = r.get(doc, "grid", "", dict)
    known = set(_GRID_FIELDS)
    for key in g:
        if key not in known:
            r.fail(f"grid.{key}", "unknown grid field", key)
    kw = {}
    for key, attr in _GRID_FIELDS.items():
        if key in g:
            v = g[key]
            kw[attr] = tuple(v) if isinstance(v, list) else v
    placements = []
    for i, a in enumerate(r.get(doc, "annotations", "", list, default=[])):
        placements.append((r.get(a, "class", f"annotations[{i}]", str), r.get(a, "cell", f"annotations[{i}]", int)))
    act_items = r.get(doc, "actuation", "", list, default=[])
    perc_items = r.get(doc, "perception", "", list, default=[])
    autos = []
    for i, item in enumerate(perc_items):
        auto = r.get(item, "auto", f"perception[{i}]", str)
        if auto not in ("look", "scan"):
            r.fail(f"perception[{i}].auto", f"unknown generator {auto!r}", "auto")
        autos.append(auto)
    kw["object_placements"] = tuple(placements)
    kw["wall_scan"] = "scan" in autos
    if act_items:
        kw["actuation_cost"] = float(r.get(act_items[0], "cost", "actuation[0]", (int, float)))
    if perc_items:
        kw["perception_cost"] = float(r.get(perc_items[0], "cost", "perception[0]", (int, float)))
    try:
        spec = GridWorldSpec(**kw)
    except TypeError as exc:
        r.fail("grid", str(exc))
    full = compile_grid_world(spec)
    actuation = []
    for i, item in enumerate(act_items):
        where = f"actuation[{i}]"
        kind = r.get(item, "kind", where, str)
        if kind not in full.actions or full.is_perception(kind):
            r.fail(f"{where}.kind", f"grid world has no move {kind!r}", kind)
        src = full.action(kind)
        actuation.append(
            ActuationAction(r.get(item, "name", where, str), src.transition, float(r.get(item, "cost", where, (int, float))))
        )
    perception = []
    for i, (item, auto) in enumerate(zip(perc_items, autos)):
        where = f"perception[{i}]"
        src = full.action("Look" if auto == "look" else "Scan")
        perception.append(
            PerceptionAction(
                r.get(item, "name", where, str),
                src.observations,
                src.likelihood,
                float(r.get(item, "cost", where, (int, float))),
            )
        )
    return WorldModel(full.state_count, tuple(actuation), tuple(perception), full.state_labels, spec)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _grid_doc(m: WorldModel) -> dict | None:
    """Grid encoding of ``m`` when it is exactly a compiled grid world (possibly with renamed or re-costed actions)."""
    spec = m.grid
    if spec is None:
        return None
    full = compile_grid_world(spec)
    acts, percs = [], []
    for a in m.actuation:
        kind = next(
            (b.name for b in full.actuation if not (a.transition != b.transition).nnz and a.transition.shape == b.transition.shape),
            None,
        )
        if kind is None:
            return None
        acts.append({"name": a.name, "cost": a.cost, "kind": kind})
    for a in m.perception:
        auto = None
        for b in full.perception:
            if a.observations == b.observations and np.array_equal(a.likelihood, b.likelihood):
                auto = "look" if b.name == "Look" else "scan"
        if auto is None:
            return None
        percs.append({"name": a.name, "cost": a.cost, "auto": auto})
    grid = {}
    for key, attr in _GRID_FIELDS.items():
        v = getattr(spec, attr)
        if isinstance(v, tuple) and v and isinstance(v[0], tuple):  # per-class noise
            v = dict(v)
        grid[key] = _plain(v)
    doc = {
        "version": FORMAT_VERSION,
        "grid": grid,
        "actuation": acts,
        "perception": percs,
        "annotations": [{"class": c, "cell": k} for c, k in spec.object_placements],
    }
    # costs beyond the first action of each kind are per-action, which a GridWorldSpec cannot hold
    reloaded = loads_map(json.dumps(doc))
    return doc if reloaded == m else None


def _explicit_doc(m: WorldModel, dense: bool | None) -> dict:
    n = m.state_count
    acts = []
    for a in m.actuation:
        T = a.transition.tocoo()
        use_dense = dense if dense is not None else T.nnz * 3 > n * n
        entry: dict[str, Any] = {"name": a.name, "cost": a.cost}
        if use_dense:
            entry["matrix"] = a.transition.toarray().tolist()
        else:
            order = np.lexsort((T.col, T.row))
            entry["sparse"] = [[int(T.row[k]), int(T.col[k]), float(T.data[k])] for k in order]
        acts.append(entry)
    percs = [
        {"name": a.name, "cost": a.cost, "observations": list(a.observations), "likelihood": a.likelihood.tolist()}
        for a in m.perception
    ]
    doc: dict[str, Any] = {"version": FORMAT_VERSION, "states": n}
    if m.state_labels is not None:
        doc["labels"] = list(m.state_labels)
    doc["actuation"] = acts
    doc["perception"] = percs
    return doc


def dumps_map(m: WorldModel | GridWorldSpec, encoding: str = "auto") -> str:
    """``encoding`` is 'auto' (grid when possible), 'grid', 'dense' or 'sparse'."""
    if isinstance(m, GridWorldSpec):
        m = compile_grid_world(m)
    if encoding not in ("auto", "grid", "dense", "sparse"):
        raise ValueError(f"unknown encoding {encoding!r}")
    doc = None
    if encoding in ("auto", "grid"):
        doc = _grid_doc(m)
        if doc is None and encoding == "grid":
            raise ValueError("model is not a compiled grid world")
    if doc is None:
        doc = _explicit_doc(m, {"dense": True, "sparse": False}.get(encoding))
    return json.dumps(doc, indent=1) + "\n"


def save_map(m: WorldModel | GridWorldSpec, path, encoding: str = "auto") -> None:
    text = dumps_map(m, encoding)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
