"""Planar geometry, coordinate frames, actor/track containers, and the vector map.

World coordinates are a local meter grid. The actor frame has x pointing
forward along the actor's heading and y pointing to the actor's left
(right-handed pair). Headings are radians, always normalized to (-pi, pi].
Time is an integer tick index with a global spacing of ``TICK_DT`` seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidGeometryError, MissingTicksError

# Tracker tick spacing in seconds (10 Hz).
TICK_DT = 0.1

_TWO_PI = 2.0 * math.pi
_HALF_PI = math.pi / 2.0

# cos/sin at exact quadrant multiples, indexed by (angle / (pi/2)) mod 4.
_QUADRANT_TRIG = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    wrapped = math.fmod(theta, _TWO_PI)
    if wrapped > math.pi:
        wrapped -= _TWO_PI
    elif wrapped <= -math.pi:
        wrapped += _TWO_PI
    return wrapped


def unit_direction(theta: float) -> tuple[float, float]:
    """(cos, sin) of an angle, exact at quadrant multiples.

    Exactness at multiples of pi/2 keeps rasterization stable under
    cardinal rotations: a 1e-16 trig residue is enough to flip pixels
    whose centers sit on polygon edges.
    """
    quadrants = theta / _HALF_PI
    if quadrants == math.floor(quadrants):
        return _QUADRANT_TRIG[int(quadrants) % 4]
    return math.cos(theta), math.sin(theta)


@dataclass(frozen=True)
class Pose2:
    """Position plus heading; heading is re-wrapped on construction."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def world_to_actor(frame: Pose2, point: Sequence[float]) -> tuple[float, float]:
    """Express a world point in the actor frame anchored at `frame`."""
    c, s = unit_direction(frame.heading)
    dx = point[0] - frame.x
    dy = point[1] - frame.y
    return (c * dx + s * dy, -s * dx + c * dy)


def actor_to_world(frame: Pose2, point: Sequence[float]) -> tuple[float, float]:
    """Inverse of :func:`world_to_actor`."""
    c, s = unit_direction(frame.heading)
    px, py = point[0], point[1]
    return (frame.x + c * px - s * py, frame.y + s * px + c * py)


def world_to_actor_many(frame: Pose2, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`world_to_actor` for an (N, 2) array."""
    pts = np.asarray(points, dtype=float)
    c, s = unit_direction(frame.heading)
    d = pts - (frame.x, frame.y)
    return np.column_stack((c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]))


def actor_to_world_many(frame: Pose2, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    c, s = unit_direction(frame.heading)
    return np.column_stack(
        (frame.x + c * pts[:, 0] - s * pts[:, 1], frame.y + s * pts[:, 0] + c * pts[:, 1])
    )


@dataclass(frozen=True)
class ActorState:
    """One tracked actor's kinematic snapshot at a tick."""

    actor_id: str
    t: int
    bbox_length: float
    bbox_width: float
    pose: Pose2
    velocity: float
    acceleration: float
    heading_change_rate: float

    def __post_init__(self) -> None:
        if self.bbox_length <= 0 or self.bbox_width <= 0:
            raise ValueError("bounding box dimensions must be positive")
        for v in (self.velocity, self.acceleration, self.heading_change_rate):
            if not math.isfinite(v):
                raise ValueError("kinematic fields must be finite")

    def footprint(self) -> np.ndarray:
        """World-frame corners of the oriented bounding box, (4, 2)."""
        hl = 0.5 * self.bbox_length
        hw = 0.5 * self.bbox_width
        corners = np.array([(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)])
        return actor_to_world_many(self.pose, corners)


def state_vector(s: ActorState) -> np.ndarray:
    """The 3-vector model input: velocity, acceleration, heading change rate."""
    return np.array([s.velocity, s.acceleration, s.heading_change_rate], dtype=float)


class Track:
    """Time-ordered states of one actor at constant tick spacing."""

    def __init__(self, actor_id: str, states: Iterable[ActorState]):
        states = tuple(states)
        if not states:
            raise ValueError("a track needs at least one state")
        ticks = [s.t for s in states]
        gaps = {b - a for a, b in zip(ticks, ticks[1:])}
        if any(g <= 0 for g in gaps) or len(gaps) > 1:
            raise ValueError("tick indices must strictly increase with a constant gap")
        if any(s.actor_id != actor_id for s in states):
            raise ValueError("all states must belong to the track's actor")
        self.actor_id = actor_id
        self.states = states
        self.tick_gap = gaps.pop() if gaps else 1
        self._by_tick = {s.t: s for s in states}

    @property
    def dt(self) -> float:
        return self.tick_gap * TICK_DT

    @property
    def first_tick(self) -> int:
        return self.states[0].t

    @property
    def last_tick(self) -> int:
        return self.states[-1].t

    def has_tick(self, t: int) -> bool:
        return t in self._by_tick

    def state_at(self, t: int) -> ActorState:
        try:
            return self._by_tick[t]
        except KeyError:
            raise MissingTicksError(f"track {self.actor_id!r} has no state at tick {t}") from None

    def __len__(self) -> int:
        return len(self.states)


def future_positions(track: Track, t: int, horizon: int) -> np.ndarray:
    """Ground-truth future positions over `horizon` ticks, in the actor frame at `t`.

    Raises MissingTicksError when any of t+1 .. t+horizon is absent.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    frame = track.state_at(t).pose
    missing = [t + h for h in range(1, horizon + 1) if not track.has_tick(t + h)]
    if missing:
        raise MissingTicksError(
            f"track {track.actor_id!r} is missing ticks {missing[0]}..{missing[-1]}"
        )
    world = np.array(
        [(track.state_at(t + h).pose.x, track.state_at(t + h).pose.y) for h in range(1, horizon + 1)]
    )
    return world_to_actor_many(frame, world)


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return int(v > 0) - int(v < 0)

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def check_simple_polygon(vertices: np.ndarray) -> None:
    """Raise InvalidGeometryError unless `vertices` form a simple polygon."""
    verts = np.asarray(vertices, dtype=float)
    n = len(verts)
    if n < 3:
        raise InvalidGeometryError("polygons need at least 3 vertices")
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a1, a2 = edges[i]
        if a1[0] == a2[0] and a1[1] == a2[1]:
            raise InvalidGeometryError("polygon has a zero-length edge")
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent around the wrap
            b1, b2 = edges[j]
            if _segments_properly_intersect(a1, a2, b1, b2):
                raise InvalidGeometryError("polygon edges self-intersect")


@dataclass(frozen=True)
class Lane:
    """A directed lane: centerline with implied direction, boundaries, successors."""

    lane_id: str
    centerline: np.ndarray
    left_boundary: np.ndarray | None = None
    right_boundary: np.ndarray | None = None
    successors: tuple[str, ...] = ()
    speed_limit: float = 11.2

    def __post_init__(self) -> None:
        center = np.asarray(self.centerline, dtype=float)
        if center.ndim != 2 or center.shape[1] != 2 or len(center) < 2:
            raise InvalidGeometryError("lane centerline needs >= 2 planar points")
        if np.any(np.all(np.diff(center, axis=0) == 0.0, axis=1)):
            raise InvalidGeometryError("consecutive centerline points must be distinct")
        object.__setattr__(self, "centerline", center)
        for name in ("left_boundary", "right_boundary"):
            b = getattr(self, name)
            if b is not None:
                object.__setattr__(self, name, np.asarray(b, dtype=float))
        object.__setattr__(self, "successors", tuple(self.successors))


@dataclass(frozen=True)
class WorldMap:
    """Vector map: road polygons, crosswalk polygons, and directed lanes."""

    road_polygons: tuple[np.ndarray, ...] = ()
    crosswalk_polygons: tuple[np.ndarray, ...] = ()
    lanes: tuple[Lane, ...] = ()
    _lane_index: Mapping[str, Lane] = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        roads = tuple(np.asarray(p, dtype=float) for p in self.road_polygons)
        crossings = tuple(np.asarray(p, dtype=float) for p in self.crosswalk_polygons)
        for poly in roads + crossings:
            check_simple_polygon(poly)
        object.__setattr__(self, "road_polygons", roads)
        object.__setattr__(self, "crosswalk_polygons", crossings)
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "_lane_index", {l.lane_id: l for l in self.lanes})

    def lane(self, lane_id: str) -> Lane:
        return self._lane_index[lane_id]

    @property
    def lane_ids(self) -> tuple[str, ...]:
        return tuple(l.lane_id for l in self.lanes)
