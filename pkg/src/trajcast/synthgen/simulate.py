"""Scripted traffic simulation, observation noise, and track filtering.

Each scripted actor follows its reference path with pure-pursuit steering
and a bounded-acceleration speed controller; queued actors regulate speed
toward a time-gap behind their leader. Derived state fields (velocity,
acceleration, heading change rate) are recomputed from the integrated
poses by central differences so they are mutually consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..baselines import PurePursuitParams, _PathWalker, _project_to_polyline, route_points
from ..errors import ScriptConflictError
from ..geometry import TICK_DT, ActorState, Pose2, Track, WorldMap, unit_direction, wrap_angle
from ..ukf import UkfParams, ukf_filter
from .scenarios import ActorScript, Scenario

MIN_GAP = 2.0  # bumper-to-bumper queue distance, meters
TIME_GAP = 1.5  # queue time headway, seconds


@dataclass(frozen=True)
class NoiseModel:
    """Independent per-tick Gaussian observation noise."""

    position_sigma: float = 0.15
    heading_sigma: float = 0.02

    def __post_init__(self) -> None:
        if self.position_sigma < 0 or self.heading_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass
class ObservationSeries:
    actor_id: str
    first_tick: int
    values: np.ndarray  # (N, 3) noisy (x, y, heading)


def build_reference_path(script: ActorScript, world_map: WorldMap) -> np.ndarray:
    """The polyline a scripted actor steers toward."""
    if script.custom_path is not None:
        return np.asarray(script.custom_path, dtype=float)
    if script.behavior == "lane_change":
        src = world_map.lane(script.route[0]).centerline
        dst = world_map.lane(script.route[1]).centerline
        s0, s1 = script.lane_change_window
        src_walk = _PathWalker(src)
        dst_walk = _PathWalker(dst)
        samples = np.arange(0.0, src_walk.total, 2.0)
        pts = []
        for s in samples:
            p_src, _ = src_walk.point_at(s)
            p_dst, _ = dst_walk.point_at(s)
            if s <= s0:
                w = 0.0
            elif s >= s1:
                w = 1.0
            else:
                u = (s - s0) / (s1 - s0)
                w = 3 * u**2 - 2 * u**3
            pts.append((1 - w) * p_src + w * p_dst)
        return np.asarray(pts)
    return route_points(world_map, list(script.route))


@dataclass
class _Agent:
    script: ActorScript
    path: _PathWalker
    x: float
    y: float
    heading: float
    v: float
    active: bool = False
    done: bool = False


def _spawn_pose(path: _PathWalker, arclength: float, offset: float) -> tuple[float, float, float]:
    p, _ = path.point_at(arclength)
    ahead, _ = path.point_at(arclength + 0.5)
    heading = math.atan2(ahead[1] - p[1], ahead[0] - p[0])
    c, s = unit_direction(heading)
    return (float(p[0]) - offset * s, float(p[1]) + offset * c, heading)


def simulate(scenario: Scenario, world_map: WorldMap) -> dict[str, Track]:
    """Integrate all scripts at the global tick rate; returns noiseless tracks."""
    pursuit = PurePursuitParams()
    agents: dict[str, _Agent] = {}
    spawns: dict[tuple[int, int, int], str] = {}
    for script in sorted(scenario.scripts, key=lambda s: s.actor_id):
        path = _PathWalker(build_reference_path(script, world_map))
        x, y, heading = _spawn_pose(path, script.start_arclength, script.start_offset)
        key = (script.entry_tick, int(round(x * 2)), int(round(y * 2)))
        if key in spawns:
            raise ScriptConflictError(
                f"{script.actor_id!r} and {spawns[key]!r} share a spawn pose and time"
            )
        spawns[key] = script.actor_id
        v0 = 0.0 if script.behavior == "parked" else script.cruise_speed
        agents[script.actor_id] = _Agent(script, path, x, y, heading, v0)

    poses: dict[str, list[tuple[int, float, float, float]]] = {a: [] for a in agents}
    order = sorted(agents)
    for tick in range(scenario.n_ticks + 1):
        prev = {aid: (ag.x, ag.y, ag.v) for aid, ag in agents.items() if ag.active}
        for aid in order:
            ag = agents[aid]
            script = ag.script
            if ag.done:
                continue
            if not ag.active:
                if tick >= script.entry_tick:
                    ag.active = True
                else:
                    continue
            else:
                if script.behavior != "parked":
                    target = script.cruise_speed
                    if script.leader_id and script.leader_id in prev:
                        lx, ly, _ = prev[script.leader_id]
                        c, s = unit_direction(ag.heading)
                        gap = (lx - ag.x) * c + (ly - ag.y) * s
                        gap -= 0.5 * (script.bbox[0] + agents[script.leader_id].script.bbox[0])
                        free = max(0.0, gap - MIN_GAP)
                        # Time-gap law capped by what the accel limit can
                        # actually stop within, so boxes never overlap.
                        target = min(
                            target,
                            free / TIME_GAP,
                            math.sqrt(2.0 * 0.9 * script.accel_limit * free),
                        )
                    dv = target - ag.v
                    limit = script.accel_limit * TICK_DT
                    ag.v += min(limit, max(-limit, dv))
                    _, foot_s, _ = _project_to_polyline(ag.path.points, np.array([ag.x, ag.y]))
                    if foot_s >= ag.path.total - 1.0:
                        ag.done = True
                        continue
                    lookahead = pursuit.lookahead(ag.v)
                    goal, _ = ag.path.point_at(foot_s + lookahead)
                    c, s = unit_direction(ag.heading)
                    gx, gy = goal[0] - ag.x, goal[1] - ag.y
                    y_goal = -s * gx + c * gy
                    curvature = 2.0 * y_goal / (lookahead * lookahead)
                    ag.heading = wrap_angle(ag.heading + curvature * ag.v * TICK_DT)
                    c, s = unit_direction(ag.heading)
                    ag.x += ag.v * TICK_DT * c
                    ag.y += ag.v * TICK_DT * s
            poses[aid].append((tick, ag.x, ag.y, ag.heading))

    tracks: dict[str, Track] = {}
    for aid in order:
        rows = poses[aid]
        if len(rows) < 2:
            continue
        ticks = [r[0] for r in rows]
        xy = np.array([(r[1], r[2]) for r in rows])
        headings = np.array([r[3] for r in rows])
        speeds = _central_speed(xy, TICK_DT)
        accels = _central_diff(speeds, TICK_DT)
        rates = _central_angle_rate(headings, TICK_DT)
        length, width = agents[aid].script.bbox
        states = [
            ActorState(aid, ticks[i], length, width,
                       Pose2(xy[i, 0], xy[i, 1], headings[i]),
                       float(speeds[i]), float(accels[i]), float(rates[i]))
            for i in range(len(rows))
        ]
        tracks[aid] = Track(aid, states)
    return tracks


def _central_speed(xy: np.ndarray, dt: float) -> np.ndarray:
    n = len(xy)
    v = np.empty(n)
    v[0] = np.linalg.norm(xy[1] - xy[0]) / dt
    v[-1] = np.linalg.norm(xy[-1] - xy[-2]) / dt
    if n > 2:
        v[1:-1] = np.linalg.norm(xy[2:] - xy[:-2], axis=1) / (2 * dt)
    return v


def _central_diff(values: np.ndarray, dt: float) -> np.ndarray:
    n = len(values)
    out = np.empty(n)
    out[0] = (values[1] - values[0]) / dt
    out[-1] = (values[-1] - values[-2]) / dt
    if n > 2:
        out[1:-1] = (values[2:] - values[:-2]) / (2 * dt)
    return out


def _central_angle_rate(headings: np.ndarray, dt: float) -> np.ndarray:
    n = len(headings)
    out = np.empty(n)
    out[0] = wrap_angle(headings[1] - headings[0]) / dt
    out[-1] = wrap_angle(headings[-1] - headings[-2]) / dt
    if n > 2:
        out[1:-1] = [wrap_angle(d) / (2 * dt) for d in (headings[2:] - headings[:-2])]
    return out


def observe(
    tracks: dict[str, Track], noise: NoiseModel, rng: np.random.Generator
) -> dict[str, ObservationSeries]:
    """Noisy (x, y, heading) per tick; iteration order is sorted actor id,
    so a given generator yields reproducible noise."""
    out: dict[str, ObservationSeries] = {}
    for aid in sorted(tracks):
        track = tracks[aid]
        values = np.array([(s.pose.x, s.pose.y, s.pose.heading) for s in track.states])
        if noise.position_sigma > 0:
            values[:, :2] += rng.normal(0.0, noise.position_sigma, (len(values), 2))
        if noise.heading_sigma > 0:
            values[:, 2] += rng.normal(0.0, noise.heading_sigma, len(values))
        out[aid] = ObservationSeries(aid, track.first_tick, values)
    return out


def filter_tracks(
    tracks: dict[str, Track],
    observations: dict[str, ObservationSeries],
    params: UkfParams | None = None,
) -> dict[str, Track]:
    """Run one unscented filter per actor over its observations; the
    filtered means become the tracked states the predictor consumes."""
    params = params or UkfParams()
    filtered: dict[str, Track] = {}
    for aid in sorted(tracks):
        track = tracks[aid]
        series = observations[aid]
        beliefs = ukf_filter(series.values, params, TICK_DT)
        states = []
        for i, belief in enumerate(beliefs):
            src = track.states[i]
            m = belief.mean
            states.append(
                ActorState(aid, src.t, src.bbox_length, src.bbox_width,
                           Pose2(m.x, m.y, m.heading), m.velocity, m.acceleration,
                           m.heading_change_rate)
            )
        filtered[aid] = Track(aid, states)
    return filtered
