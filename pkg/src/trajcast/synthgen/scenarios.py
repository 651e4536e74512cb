"""Scenario definitions and deterministic map construction.

Four scenario kinds cover the traffic situations the predictor is
evaluated on: multi-lane straight driving (with queuing), a four-way
intersection with through/right/left routes, a lane change around a
stopped obstacle, and a parking cut-in across the oncoming lane into a
queue. Scenario parameters are sampled once from a seeded generator;
map construction itself is purely deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidGeometryError
from ..geometry import TICK_DT, Lane, WorldMap

LANE_WIDTH = 3.5
SPEED_CAP = 11.2  # 25 mph roads only
ROAD_LENGTH = 160.0

ARM = 70.0  # intersection arm length
BOX = 8.0  # intersection box half-extent


@dataclass(frozen=True)
class ActorScript:
    """One scripted actor: a reference route plus a speed behavior."""

    actor_id: str
    behavior: str  # lane_follow | turn | lane_change | queue | parked | cut_in
    route: tuple[str, ...] = ()
    cruise_speed: float = 8.0
    entry_tick: int = 0
    start_arclength: float = 0.0
    start_offset: float = 0.0  # lateral, positive left of the path
    accel_limit: float = 2.5
    leader_id: str | None = None
    lane_change_window: tuple[float, float] | None = None  # (start, end) arclength
    custom_path: tuple[tuple[float, float], ...] | None = None  # cut_in entry path
    bbox: tuple[float, float] = (4.5, 2.0)

    def __post_init__(self) -> None:
        if self.cruise_speed < 0 or self.cruise_speed > SPEED_CAP:
            raise ValueError(f"cruise speed must be within [0, {SPEED_CAP}] m/s")


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    kind: str  # straight_multilane | four_way_intersection | lane_change_obstacle | parking_cut_in
    seed: int
    duration_s: float = 14.0
    lane_width: float = LANE_WIDTH
    forward_lanes: int = 2
    backward_lanes: int = 1
    scripts: tuple[ActorScript, ...] = ()

    def __post_init__(self) -> None:
        if self.duration_s < 0.1:
            raise ValueError("duration too short")

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s / TICK_DT))


def _lane_points(p0, p1, step=5.0) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    n = max(2, int(math.ceil(length / step)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    return p0 + ts[:, None] * (p1 - p0)


def _offset_line(points: np.ndarray, offset: float) -> np.ndarray:
    """Parallel polyline offset to the left of travel by `offset` meters."""
    out = np.empty_like(points)
    for i, p in enumerate(points):
        if i == 0:
            d = points[1] - points[0]
        elif i == len(points) - 1:
            d = points[-1] - points[-2]
        else:
            d = points[i + 1] - points[i - 1]
        norm = np.linalg.norm(d)
        normal = np.array([-d[1], d[0]]) / norm
        out[i] = p + offset * normal
    return out


def _straight_lane(lane_id, p0, p1, successors=(), speed=SPEED_CAP, half=LANE_WIDTH / 2) -> Lane:
    center = _lane_points(p0, p1)
    return Lane(
        lane_id,
        center,
        left_boundary=_offset_line(center, half),
        right_boundary=_offset_line(center, -half),
        successors=successors,
        speed_limit=speed,
    )


def _arc_lane(lane_id, center, radius, angle0, angle1, successors=(), speed=6.0) -> Lane:
    n = max(8, int(abs(angle1 - angle0) * radius / 1.0))
    angles = np.linspace(angle0, angle1, n)
    pts = np.column_stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)])
    return Lane(lane_id, pts, successors=successors, speed_limit=speed)


def _straight_map(forward: int, backward: int, length: float = ROAD_LENGTH,
                  extra_road: tuple[np.ndarray, ...] = ()) -> WorldMap:
    lanes = []
    for i in range(forward):
        y = -(LANE_WIDTH / 2 + LANE_WIDTH * i)
        lanes.append(_straight_lane(f"f{i}", (0.0, y), (length, y)))
    for i in range(backward):
        y = LANE_WIDTH / 2 + LANE_WIDTH * i
        lanes.append(_straight_lane(f"b{i}", (length, y), (0.0, y)))
    half_south = LANE_WIDTH * forward
    half_north = LANE_WIDTH * backward
    road = np.array(
        [[0.0, -half_south], [length, -half_south], [length, half_north], [0.0, half_north]]
    )
    return WorldMap(road_polygons=(road,) + tuple(extra_road), lanes=tuple(lanes))


def _rot90(points: np.ndarray, k: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    for _ in range(k % 4):
        pts = np.column_stack([-pts[:, 1], pts[:, 0]])
    return pts


def _intersection_map() -> WorldMap:
    half = LANE_WIDTH / 2
    lanes: list[Lane] = []
    dirs = ["e", "n", "w", "s"]
    # East-heading template, rotated CCW k quarter turns for n/w/s.
    for k, d in enumerate(dirs):
        right_exit = dirs[(k - 1) % 4]
        left_exit = dirs[(k + 1) % 4]
        app = _lane_points((-ARM, -half), (-BOX, -half))
        out = _lane_points((BOX, -half), (ARM, -half))
        thru = _lane_points((-BOX, -half), (BOX, -half), step=2.0)
        lanes.append(
            Lane(f"{d}_app", _rot90(app, k),
                 left_boundary=_offset_line(_rot90(app, k), half),
                 right_boundary=_offset_line(_rot90(app, k), -half),
                 successors=(f"{d}_thru", f"{d}_right", f"{d}_left"))
        )
        lanes.append(
            Lane(f"{d}_out", _rot90(out, k),
                 left_boundary=_offset_line(_rot90(out, k), half),
                 right_boundary=_offset_line(_rot90(out, k), -half))
        )
        lanes.append(Lane(f"{d}_thru", _rot90(thru, k), successors=(f"{d}_out",), speed_limit=8.0))
        r_small = BOX - half
        arc_r = _arc_lane("tmp", (-BOX, -BOX), r_small, math.pi / 2, 0.0)
        lanes.append(
            Lane(f"{d}_right", _rot90(arc_r.centerline, k),
                 successors=(f"{right_exit}_out",), speed_limit=5.0)
        )
        r_big = BOX + half
        arc_l = _arc_lane("tmp", (-BOX, BOX), r_big, -math.pi / 2, 0.0)
        lanes.append(
            Lane(f"{d}_left", _rot90(arc_l.centerline, k),
                 successors=(f"{left_exit}_out",), speed_limit=5.0)
        )
    ew = np.array([[-ARM, -LANE_WIDTH], [ARM, -LANE_WIDTH], [ARM, LANE_WIDTH], [-ARM, LANE_WIDTH]])
    ns = np.array([[-LANE_WIDTH, -ARM], [LANE_WIDTH, -ARM], [LANE_WIDTH, ARM], [-LANE_WIDTH, ARM]])
    crosswalks = []
    cw = np.array([[-BOX - 2.5, -LANE_WIDTH], [-BOX - 0.5, -LANE_WIDTH],
                   [-BOX - 0.5, LANE_WIDTH], [-BOX - 2.5, LANE_WIDTH]])
    for k in range(4):
        crosswalks.append(_rot90(cw, k))
    return WorldMap(road_polygons=(ew, ns), crosswalk_polygons=tuple(crosswalks), lanes=tuple(lanes))


def build_map(scenario: Scenario) -> WorldMap:
    """Deterministic map for a scenario; raises InvalidGeometryError for
    parameter combinations that produce degenerate polygons."""
    if scenario.kind == "straight_multilane":
        if scenario.forward_lanes < 1:
            raise InvalidGeometryError("need at least one forward lane")
        return _straight_map(scenario.forward_lanes, scenario.backward_lanes)
    if scenario.kind == "four_way_intersection":
        return _intersection_map()
    if scenario.kind == "lane_change_obstacle":
        return _straight_map(2, 0)
    if scenario.kind == "parking_cut_in":
        apron = np.array([[60.0, LANE_WIDTH], [95.0, LANE_WIDTH], [95.0, LANE_WIDTH + 4.0],
                          [60.0, LANE_WIDTH + 4.0]])
        return _straight_map(1, 1, extra_road=(apron,))
    raise ValueError(f"unknown scenario kind {scenario.kind!r}")


def _speed(rng, lo=4.0, hi=11.0) -> float:
    return float(rng.uniform(lo, hi))


def _bbox(rng) -> tuple[float, float]:
    return (float(rng.uniform(4.2, 5.0)), float(rng.uniform(1.8, 2.1)))


def _straight_scenario(scenario_id: str, seed: int, rng: np.random.Generator) -> Scenario:
    forward = int(rng.integers(1, 3))
    backward = int(rng.integers(0, 2))
    scripts: list[ActorScript] = []
    # Ego-style follower per forward lane, sometimes queued behind a slow/stopped leader.
    for i in range(forward):
        lane = f"f{i}"
        aid = f"car{len(scripts):02d}"
        if rng.random() < 0.4:
            stop_x = float(rng.uniform(90.0, 130.0))
            leader = ActorScript(
                actor_id=f"{aid}_lead", behavior="parked", route=(lane,), cruise_speed=0.0,
                start_arclength=stop_x, bbox=_bbox(rng),
            )
            scripts.append(leader)
            scripts.append(
                ActorScript(
                    actor_id=aid, behavior="queue", route=(lane,), cruise_speed=_speed(rng, 5.0, 10.0),
                    start_arclength=float(rng.uniform(5.0, 30.0)), leader_id=leader.actor_id,
                    bbox=_bbox(rng),
                )
            )
        else:
            scripts.append(
                ActorScript(
                    actor_id=aid, behavior="lane_follow", route=(lane,), cruise_speed=_speed(rng),
                    start_arclength=float(rng.uniform(5.0, 60.0)), bbox=_bbox(rng),
                )
            )
    for i in range(backward):
        scripts.append(
            ActorScript(
                actor_id=f"car{len(scripts):02d}", behavior="lane_follow", route=(f"b{i}",),
                cruise_speed=_speed(rng), start_arclength=float(rng.uniform(5.0, 60.0)),
                bbox=_bbox(rng),
            )
        )
    return Scenario(
        scenario_id=scenario_id, kind="straight_multilane", seed=seed,
        duration_s=14.0, forward_lanes=forward, backward_lanes=backward,
        scripts=tuple(scripts),
    )


def _intersection_scenario(scenario_id: str, seed: int, rng: np.random.Generator) -> Scenario:
    dirs = ["e", "n", "w", "s"]
    rng.shuffle(dirs)
    n_actors = int(rng.integers(2, 4))
    scripts = []
    for i in range(n_actors):
        d = dirs[i]
        choice = rng.choice(["thru", "right", "left"], p=[0.4, 0.35, 0.25])
        exit_dir = {"thru": d, "right": {"e": "s", "n": "e", "w": "n", "s": "w"}[d],
                    "left": {"e": "n", "n": "w", "w": "s", "s": "e"}[d]}[choice]
        route = (f"{d}_app", f"{d}_{choice}", f"{exit_dir}_out")
        scripts.append(
            ActorScript(
                actor_id=f"car{i:02d}", behavior="turn" if choice != "thru" else "lane_follow",
                route=route, cruise_speed=_speed(rng, 4.0, 8.0),
                start_arclength=float(rng.uniform(5.0, 25.0)),
                entry_tick=int(rng.integers(0, 3)) * 10 * i,
                bbox=_bbox(rng),
            )
        )
    return Scenario(
        scenario_id=scenario_id, kind="four_way_intersection", seed=seed,
        duration_s=16.0, scripts=tuple(scripts),
    )


def _lane_change_scenario(scenario_id: str, seed: int, rng: np.random.Generator) -> Scenario:
    obstacle_x = float(rng.uniform(70.0, 100.0))
    changer_speed = _speed(rng, 7.0, 11.0)
    start = float(rng.uniform(5.0, 20.0))
    window_start = obstacle_x - float(rng.uniform(35.0, 45.0))
    scripts = [
        ActorScript(
            actor_id="obstacle", behavior="parked", route=("f0",), cruise_speed=0.0,
            start_arclength=obstacle_x, bbox=_bbox(rng),
        ),
        ActorScript(
            actor_id="changer", behavior="lane_change", route=("f0", "f1"),
            cruise_speed=changer_speed, start_arclength=start,
            lane_change_window=(window_start, window_start + 25.0), bbox=_bbox(rng),
        ),
    ]
    if rng.random() < 0.5:
        scripts.append(
            ActorScript(
                actor_id="car02", behavior="lane_follow", route=("f1",),
                cruise_speed=_speed(rng, 6.0, 10.0),
                start_arclength=float(rng.uniform(30.0, 60.0)), bbox=_bbox(rng),
            )
        )
    return Scenario(
        scenario_id=scenario_id, kind="lane_change_obstacle", seed=seed,
        duration_s=14.0, forward_lanes=2, backward_lanes=0, scripts=tuple(scripts),
    )


def _parking_cut_in_scenario(scenario_id: str, seed: int, rng: np.random.Generator) -> Scenario:
    entry_x = float(rng.uniform(65.0, 80.0))
    y_park = LANE_WIDTH + 2.0
    y_target = -LANE_WIDTH / 2
    # Cross the oncoming (westbound) lane into the eastbound lane, then queue.
    path = (
        (entry_x, y_park),
        (entry_x + 3.0, y_park - 1.5),
        (entry_x + 6.5, 0.5),
        (entry_x + 10.0, y_target + 0.3),
        (entry_x + 14.0, y_target),
        (ROAD_LENGTH, y_target),
    )
    stop_x = entry_x + float(rng.uniform(35.0, 50.0))
    scripts = [
        ActorScript(
            actor_id="queued", behavior="parked", route=("f0",), cruise_speed=0.0,
            start_arclength=stop_x, bbox=_bbox(rng),
        ),
        ActorScript(
            actor_id="cutter", behavior="cut_in", custom_path=path,
            cruise_speed=_speed(rng, 3.0, 5.0), leader_id="queued", bbox=_bbox(rng),
        ),
        ActorScript(
            actor_id="oncoming", behavior="lane_follow", route=("b0",),
            cruise_speed=_speed(rng, 5.0, 9.0),
            start_arclength=float(rng.uniform(10.0, 40.0)), bbox=_bbox(rng),
        ),
    ]
    return Scenario(
        scenario_id=scenario_id, kind="parking_cut_in", seed=seed,
        duration_s=16.0, forward_lanes=1, backward_lanes=1, scripts=tuple(scripts),
    )


_BUILDERS = {
    "straight_multilane": _straight_scenario,
    "four_way_intersection": _intersection_scenario,
    "lane_change_obstacle": _lane_change_scenario,
    "parking_cut_in": _parking_cut_in_scenario,
}


def generate_scenarios(counts: dict[str, int], seed: int) -> list[Scenario]:
    """Sample scenario instances; ids are `<kind>-<index>` and all randomness
    comes from per-scenario substreams of `seed`."""
    from ..rng import substream

    scenarios = []
    for kind in sorted(counts):
        if kind not in _BUILDERS:
            raise ValueError(f"unknown scenario kind {kind!r}")
        for i in range(counts[kind]):
            scenario_id = f"{kind}-{i:03d}"
            rng = substream(seed, "scenario", scenario_id)
            scenarios.append(_BUILDERS[kind](scenario_id, seed, rng))
    return scenarios
