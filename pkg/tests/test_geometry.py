import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajcast.errors import InvalidGeometryError, MissingTicksError
from trajcast.geometry import (
    TICK_DT,
    ActorState,
    Lane,
    Pose2,
    Track,
    WorldMap,
    actor_to_world,
    check_simple_polygon,
    future_positions,
    state_vector,
    unit_direction,
    world_to_actor,
    world_to_actor_many,
    wrap_angle,
)

coords = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)
angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def make_state(actor_id="a", t=0, x=0.0, y=0.0, heading=0.0, v=0.0, a=0.0, hcr=0.0):
    return ActorState(
        actor_id=actor_id,
        t=t,
        bbox_length=4.5,
        bbox_width=2.0,
        pose=Pose2(x, y, heading),
        velocity=v,
        acceleration=a,
        heading_change_rate=hcr,
    )


def test_wrap_angle_range():
    for theta in np.linspace(-25, 25, 501):
        w = wrap_angle(float(theta))
        assert -math.pi < w <= math.pi
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == math.pi


def test_unit_direction_exact_at_quadrants():
    assert unit_direction(0.0) == (1.0, 0.0)
    assert unit_direction(math.pi / 2) == (0.0, 1.0)
    assert unit_direction(math.pi) == (-1.0, 0.0)
    assert unit_direction(-math.pi / 2) == (0.0, -1.0)
    c, s = unit_direction(0.3)
    assert c == pytest.approx(math.cos(0.3))
    assert s == pytest.approx(math.sin(0.3))


def test_world_to_actor_identity_frame():
    assert world_to_actor(Pose2(0, 0, 0), (3.0, 4.0)) == (3.0, 4.0)


def test_world_to_actor_quarter_turn():
    # Actor at (1,1) facing +y: the point one meter ahead is (1,2) in world.
    p = world_to_actor(Pose2(1.0, 1.0, math.pi / 2), (1.0, 2.0))
    assert p == pytest.approx((1.0, 0.0), abs=1e-12)


def test_round_trip_specific():
    frame = Pose2(5.0, -2.0, 0.3)
    p = world_to_actor(frame, actor_to_world(frame, (7.0, 1.0)))
    assert p == pytest.approx((7.0, 1.0), abs=1e-9)


@given(coords, coords, angles, coords, coords)
@settings(max_examples=200)
def test_round_trip_property(fx, fy, heading, px, py):
    frame = Pose2(fx, fy, heading)
    q = world_to_actor(frame, actor_to_world(frame, (px, py)))
    assert abs(q[0] - px) <= 1e-9 * max(1.0, abs(px))
    assert abs(q[1] - py) <= 1e-9 * max(1.0, abs(py))


@given(coords, coords, angles, coords, coords, coords, coords)
@settings(max_examples=200)
def test_rigid_transform_preserves_distances(fx, fy, heading, ax, ay, bx, by):
    frame = Pose2(fx, fy, heading)
    pa = world_to_actor(frame, (ax, ay))
    pb = world_to_actor(frame, (bx, by))
    d_before = math.hypot(bx - ax, by - ay)
    d_after = math.hypot(pb[0] - pa[0], pb[1] - pa[1])
    assert abs(d_after - d_before) <= 1e-9 * max(1.0, d_before)


def test_world_to_actor_many_matches_scalar():
    frame = Pose2(2.0, -1.0, 0.7)
    pts = np.array([[0.0, 0.0], [3.0, 4.0], [-2.0, 5.0]])
    batch = world_to_actor_many(frame, pts)
    for row, p in zip(batch, pts):
        assert tuple(row) == pytest.approx(world_to_actor(frame, p))


def test_state_vector_projection():
    s = make_state(v=10.0, a=0.5, hcr=-0.1, x=12.0, y=-3.0, heading=1.0)
    assert np.allclose(state_vector(s), [10.0, 0.5, -0.1])
    assert state_vector(make_state()).tolist() == [0.0, 0.0, 0.0]
    assert state_vector(s).shape == (3,)


def make_track(states):
    return Track(states[0].actor_id, states)


def test_future_positions_uniform_motion():
    # 10 m/s along +x, dt = 0.1 s: one meter per tick.
    states = [make_state(t=k, x=k * 1.0, v=10.0) for k in range(5)]
    traj = future_positions(make_track(states), t=0, horizon=3)
    assert np.allclose(traj, [[1, 0], [2, 0], [3, 0]])


def test_future_positions_stationary():
    states = [make_state(t=k, x=2.0, y=3.0, heading=0.5) for k in range(31)]
    traj = future_positions(make_track(states), t=0, horizon=30)
    assert traj.shape == (30, 2)
    assert np.allclose(traj, 0.0)


def test_future_positions_circular_motion_closed_form():
    # Constant-turn oracle: v = 5 m/s, hcr = 0.5 rad/s, radius v/hcr = 10 m.
    v, hcr, dt = 5.0, 0.5, TICK_DT
    radius = v / hcr
    states = []
    for k in range(12):
        theta = hcr * k * dt
        states.append(
            make_state(t=k, x=radius * math.sin(theta), y=radius * (1 - math.cos(theta)),
                       heading=theta, v=v, hcr=hcr)
        )
    traj = future_positions(make_track(states), t=0, horizon=10)
    for h in range(1, 11):
        theta = hcr * h * dt
        expected = (radius * math.sin(theta), radius * (1 - math.cos(theta)))
        assert traj[h - 1] == pytest.approx(expected, abs=1e-12)


def test_future_positions_missing_ticks():
    states = [make_state(t=k) for k in range(5)]
    with pytest.raises(MissingTicksError):
        future_positions(make_track(states), t=2, horizon=5)


def test_track_rejects_irregular_ticks():
    with pytest.raises(ValueError):
        Track("a", [make_state(t=0), make_state(t=1), make_state(t=3)])
    with pytest.raises(ValueError):
        Track("a", [make_state(t=0), make_state(t=0)])


def test_actor_state_validation():
    with pytest.raises(ValueError):
        ActorState("a", 0, -1.0, 2.0, Pose2(0, 0, 0), 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ActorState("a", 0, 4.0, 2.0, Pose2(0, 0, 0), float("nan"), 0.0, 0.0)


def test_footprint_dimensions():
    s = make_state(heading=math.pi / 2)
    corners = s.footprint()
    width = np.ptp(corners[:, 0])
    length = np.ptp(corners[:, 1])
    assert width == pytest.approx(2.0)
    assert length == pytest.approx(4.5)


def test_simple_polygon_check():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    check_simple_polygon(square)
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]])
    with pytest.raises(InvalidGeometryError):
        check_simple_polygon(bowtie)
    with pytest.raises(InvalidGeometryError):
        check_simple_polygon(np.array([[0, 0], [1, 1]]))


def test_lane_validation():
    with pytest.raises(InvalidGeometryError):
        Lane("l", np.array([[0.0, 0.0]]))
    with pytest.raises(InvalidGeometryError):
        Lane("l", np.array([[0.0, 0.0], [0.0, 0.0]]))
    lane = Lane("l", np.array([[0.0, 0.0], [5.0, 0.0]]), successors=["m"])
    assert lane.successors == ("m",)


def test_world_map_lane_lookup():
    lane = Lane("l0", np.array([[0.0, 0.0], [5.0, 0.0]]))
    wm = WorldMap(road_polygons=(np.array([[0, -2], [5, -2], [5, 2], [0, 2]]),), lanes=(lane,))
    assert wm.lane("l0") is lane
    assert wm.lane_ids == ("l0",)
