"""Small hand-built worlds used by the tests, demos and the ``run`` command."""

from __future__ import annotations

from .world import GridWorldSpec, WorldModel, compile_grid_world


def two_by_two_spec(windows=(0, 1), p_fail: float = 0.0, p_fp: float = 0.0, p_fn: float = 0.0) -> GridWorldSpec:
    """2x2 grid with absolute moves; Look reports whether the robot's own cell has a window.

    Cells are numbered row-major from the bottom left, so Right takes cell 0 to 1
    and cell 2 to 3, and is blocked in cells 1 and 3.
    """
    return GridWorldSpec(
        2,
        2,
        orientations_per_cell=1,
        object_classes=("window",),
        object_placements=tuple(("window", c) for c in windows),
        p_fp=p_fp,
        p_fn=p_fn,
        p_fail=p_fail,
        moves=("Right",),
    )


def two_by_two(windows=(0, 1), p_fail: float = 0.0, p_fp: float = 0.0, p_fn: float = 0.0) -> WorldModel:
    return compile_grid_world(two_by_two_spec(windows, p_fail, p_fp, p_fn))


def kitchen_spec(**overrides) -> GridWorldSpec:
    """3x3 room, four headings per cell, a wall-distance scanner and four landmarks."""
    kw = dict(
        orientations_per_cell=4,
        object_placements=(("chair", 4), ("extinguisher", 6), ("plant", 2), ("screen", 7)),
        wall_scan=True,
        cell_size=1.2,
    )
    kw.update(overrides)
    return GridWorldSpec(3, 3, **kw)


def kitchen(**overrides) -> WorldModel:
    return compile_grid_world(kitchen_spec(**overrides))


def hallway_spec(**overrides) -> GridWorldSpec:
    """1x4 corridor of 1.5 m cells with eight headings per cell and viewing-angle observations."""
    kw = dict(
        orientations_per_cell=8,
        object_classes=("plant", "extinguisher"),
        object_placements=(("extinguisher", 0), ("plant", 3)),
        wall_scan=True,
        cell_size=1.5,
        view_range=0,
        view_cone=True,
        view_angles=True,
    )
    kw.update(overrides)
    return GridWorldSpec(1, 4, **kw)


def hallway(**overrides) -> WorldModel:
    return compile_grid_world(hallway_spec(**overrides))
