import numpy as np
import pytest
from scipy import stats

from beliefloc.fixtures import hallway, hallway_spec, kitchen, two_by_two
from beliefloc.world import (
    HEADINGS,
    SCAN_OBSERVATIONS,
    ActuationAction,
    GridWorldSpec,
    PerceptionAction,
    SpecError,
    ValidationError,
    WorldModel,
    compile_grid_world,
    grid_for_states,
    random_world,
    scan_bin,
    visible_classes,
    visible_with_angle,
    wall_distance,
)


def _row_sums_ok(world):
    for a in world.actuation:
        sums = np.asarray(a.transition.sum(axis=1)).ravel()
        assert np.all(np.abs(sums - 1) <= 1e-9), a.name
    for a in world.perception:
        assert np.all(np.abs(a.likelihood.sum(axis=0) - 1) <= 1e-9), a.name


def test_two_by_two_fixture():
    w = two_by_two(windows=(1, 3), p_fail=0.2)
    assert w.state_count == 4
    assert [a.name for a in w.actuation] == ["Right"]
    assert [a.name for a in w.perception] == ["Look"]
    T = w.action("Right").transition.toarray()
    np.testing.assert_allclose(T, [[0.2, 0.8, 0, 0], [0, 1, 0, 0], [0, 0, 0.2, 0.8], [0, 0, 0, 1]])
    np.testing.assert_array_equal(w.action("Look").likelihood_of("window"), [0, 1, 0, 1])


def test_kitchen_has_36_states():
    w = kitchen()
    assert w.state_count == 36
    assert {a.name for a in w.actuation} == {"MoveForward", "MoveBackward", "RotateCW", "RotateCCW"}
    assert w.action("Scan").observations == SCAN_OBSERVATIONS
    _row_sums_ok(w)


def test_hallway_has_32_states():
    w = hallway()
    assert w.state_count == 32
    # exhaustive row sums, done independently of the validator
    for a in w.actuation:
        dense = a.transition.toarray()
        for i in range(32):
            assert abs(sum(dense[i].tolist()) - 1.0) <= 1e-9
    _row_sums_ok(w)


def test_eight_heading_rotation_is_a_quarter_pi():
    spec = hallway_spec()
    w = compile_grid_world(spec)
    T = w.action("RotateCW").transition.toarray()
    for h in range(8):
        s = spec.encode(0, 1, h)
        t = spec.encode(0, 1, (h + 1) % 8)
        assert T[s, t] == pytest.approx(0.98)
    dirs = np.array(HEADINGS[8], dtype=float)
    ang = np.degrees(np.arctan2(dirs[:, 1], dirs[:, 0]))
    steps = (ang[:-1] - ang[1:]) % 360
    np.testing.assert_allclose(steps, 45.0)


def test_look_factorizes_over_classes():
    spec = GridWorldSpec(3, 1, object_placements=(("plant", 2),), p_fp=0.05, p_fn=0.1)
    w = compile_grid_world(spec)
    look = w.action("Look")
    assert len(look.observations) == 16
    s = spec.encode(1, 0, 1)  # middle cell facing east, plant ahead
    assert visible_classes(spec, s) == {"plant"}
    assert look.likelihood_of("plant")[s] == pytest.approx(0.9 * 0.95**3)
    assert look.likelihood_of("none")[s] == pytest.approx(0.1 * 0.95**3)
    assert look.likelihood_of("plant+chair")[s] == pytest.approx(0.9 * 0.05 * 0.95**2)
    far = spec.encode(0, 0, 1)
    assert look.likelihood_of("none")[far] == pytest.approx(0.95**4)


def test_visible_classes_examples():
    spec = GridWorldSpec(3, 3, object_placements=(("plant", 4),))
    assert visible_classes(spec, spec.encode(1, 0, 0)) == {"plant"}  # south of centre facing north
    assert visible_classes(spec, spec.encode(1, 2, 0)) == frozenset()  # facing the top boundary
    assert visible_classes(spec, spec.encode(1, 1, 0)) == frozenset()  # own cell is not seen


def test_visibility_table_matches_hand_enumeration():
    spec, _ = random_world(3, 3, 7)
    by_cell = {}
    for c, k in spec.object_placements:
        by_cell.setdefault(k, set()).add(c)
    step = {0: (0, 1), 1: (1, 0), 2: (0, -1), 3: (-1, 0)}
    for s in range(spec.state_count):
        cell, h = divmod(s, 4)
        y, x = divmod(cell, 3)
        nx, ny = x + step[h][0], y + step[h][1]
        expect = by_cell.get(ny * 3 + nx, set()) if 0 <= nx < 3 and 0 <= ny < 3 else set()
        assert visible_classes(spec, s) == expect, s


def test_view_range_and_cone():
    spec = GridWorldSpec(5, 1, object_placements=(("chair", 4),), view_range=0)
    assert visible_classes(spec, spec.encode(0, 0, 1)) == {"chair"}
    spec3 = GridWorldSpec(5, 1, object_placements=(("chair", 4),), view_range=3)
    assert visible_classes(spec3, spec3.encode(0, 0, 1)) == frozenset()
    assert visible_classes(spec3, spec3.encode(1, 0, 1)) == {"chair"}
    cone = GridWorldSpec(3, 3, object_placements=(("plant", 8),), view_cone=True, view_range=0)
    assert visible_classes(cone, cone.encode(1, 1, 0)) == {"plant"}  # 45 degrees to the right
    assert visible_classes(cone, cone.encode(0, 1, 0)) == frozenset()  # beyond the wedge


def test_viewing_angle_bins():
    spec = hallway_spec()
    s = spec.encode(0, 3, 4)  # top cell facing south, extinguisher straight ahead
    assert visible_with_angle(spec, s) == {"extinguisher": "C"}
    w = hallway()
    look = w.action("Look")
    assert "extinguisher@C" in look.observations and "plant@L+extinguisher@R" in look.observations
    assert len(look.observations) == 16


def test_scan_bins_from_geometry():
    spec = kitchen().grid
    # centre cell facing north: 1.5 cells to the wall = 1.8 m
    assert wall_distance(spec, spec.encode(1, 1, 0)) == pytest.approx(1.8)
    assert scan_bin(1.8) == "NoWall"
    assert wall_distance(spec, spec.encode(1, 2, 0)) == pytest.approx(0.6)
    assert scan_bin(0.6) == "Wall0.2-0.8m"
    assert scan_bin(0.1) == "Wall<0.2m"
    assert scan_bin(1.0) == "Wall0.8-1.1m"
    assert scan_bin(1.2) == "Wall1.1-1.5m"
    h = hallway_spec()
    diag = h.encode(0, 0, 1)  # north-east from the bottom cell of a one-cell-wide corridor
    assert wall_distance(h, diag) == pytest.approx(0.5 * np.sqrt(2) * 1.5)


def test_boundary_moves_are_identity_rows():
    spec, _ = random_world(4, 3, 2)
    w = compile_grid_world(spec)
    T = w.action("MoveForward").transition.toarray()
    for s in range(spec.state_count):
        x, y, h = spec.decode(s)
        dx, dy = HEADINGS[4][h]
        if not spec.inside(x + dx, y + dy):
            assert T[s, s] == 1.0 and T[s].sum() == 1.0


def test_move_success_and_failure():
    spec = GridWorldSpec(3, 3)
    w = compile_grid_world(spec)
    T = w.action("MoveForward").transition.toarray()
    s = spec.encode(1, 1, 1)
    assert T[s, spec.encode(2, 1, 1)] == pytest.approx(0.98)
    assert T[s, s] == pytest.approx(0.02)
    B = w.action("MoveBackward").transition.toarray()
    assert B[s, spec.encode(0, 1, 1)] == pytest.approx(0.98)


def test_compile_is_deterministic():
    spec, _ = random_world(6, 5, 11, wall_scan=True)
    a, b = compile_grid_world(spec), compile_grid_world(spec)
    assert a == b
    for x, y in zip(a.actuation, b.actuation):
        assert x.transition.data.tobytes() == y.transition.data.tobytes()
        assert x.transition.indices.tobytes() == y.transition.indices.tobytes()
    for x, y in zip(a.perception, b.perception):
        assert x.likelihood.tobytes() == y.likelihood.tobytes()


def test_spec_errors():
    with pytest.raises(SpecError):
        compile_grid_world(GridWorldSpec(2, 2, object_placements=(("plant", 9),)))
    with pytest.raises(SpecError):
        compile_grid_world(GridWorldSpec(2, 2, object_placements=(("sofa", 1),)))
    with pytest.raises(SpecError):
        compile_grid_world(GridWorldSpec(2, 2, p_fail=1.0))
    with pytest.raises(SpecError):
        compile_grid_world(GridWorldSpec(2, 2, p_fp=-0.1))
    with pytest.raises(SpecError):
        compile_grid_world(GridWorldSpec(2, 2, orientations_per_cell=6))


def test_model_validation():
    with pytest.raises(ValidationError):
        WorldModel(2, (ActuationAction("a", np.array([[0.9, 0], [0, 1]]), 1.0),))
    with pytest.raises(ValidationError):
        WorldModel(2, (), (PerceptionAction("p", ("x",), np.array([[1.0, 0.5]]), 1.0),))
    with pytest.raises(ValidationError):
        WorldModel(2, (ActuationAction("a", np.eye(2), 0.0),))
    with pytest.raises(ValidationError):
        WorldModel(2)  # no actions at all


def test_random_world_determinism():
    a = random_world(10, 10, 42)
    b = random_world(10, 10, 42)
    assert a == b
    c = random_world(10, 10, 43)
    assert a != c
    spec, start = a
    assert 0 <= start < spec.state_count
    cells = [k for _, k in spec.object_placements]
    assert len(set(cells)) == len(cells)


def test_random_world_object_count_is_uniform():
    counts = np.zeros(5, dtype=int)
    for seed in range(10_000):
        spec, _ = random_world(5, 5, seed)
        counts[len(spec.object_placements) - 4] += 1
    assert np.all(np.abs(counts / 10_000 - 0.2) <= 0.05 * 0.2 * 5)  # each bin within 5 points
    assert stats.chisquare(counts).pvalue > 1e-3


def test_grid_for_states():
    assert grid_for_states(100) == (5, 5)
    assert grid_for_states(1000) == (16, 16)
    assert grid_for_states(10_000) == (50, 50)
