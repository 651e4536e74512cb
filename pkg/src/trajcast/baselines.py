"""Engineered prediction baselines: linear state-to-trajectory regression
and lane association with a pure-pursuit rollout.

The linear model maps the 3-vector actor state to all future positions via
ridge-regularized normal equations. Lane association assigns an actor to
nearby same-direction lanes and follows each with a pure-pursuit steering
law under a dynamic lookahead; with ground truth supplied the
lowest-error rollout is reported, which makes it an evaluation-time upper
bound rather than a deployable predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularSystemError
from .geometry import (
    ActorState,
    Lane,
    Pose2,
    WorldMap,
    actor_to_world,
    unit_direction,
    world_to_actor_many,
    wrap_angle,
)

DEFAULT_ASSOCIATION_RADIUS = 5.0
HEADING_GATE = math.pi / 2


@dataclass(frozen=True)
class PurePursuitParams:
    """Dynamic lookahead: L = clamp(k_l * v, l_min, l_max) meters."""

    k_l: float = 1.0
    l_min: float = 3.0
    l_max: float = 12.0

    def lookahead(self, speed: float) -> float:
        return min(self.l_max, max(self.l_min, self.k_l * speed))


@dataclass
class LinearModel:
    """Affine map from the state 3-vector to a 2H-vector of future positions."""

    weights: np.ndarray  # (2H, 3)
    bias: np.ndarray  # (2H,)

    @property
    def horizon(self) -> int:
        return self.weights.shape[0] // 2

    def predict(self, states: np.ndarray) -> np.ndarray:
        """(N, 3) states -> (N, H, 2) trajectories."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        flat = states @ self.weights.T + self.bias
        return flat.reshape(len(states), self.horizon, 2)


def fit_linear(states: np.ndarray, targets: np.ndarray, ridge: float = 1e-6) -> LinearModel:
    """Least-squares fit of the affine family via normal equations.

    `targets` is (N, 2H) or (N, H, 2), actor-frame meters. Raises
    SingularSystemError when ridge is zero and the Gram matrix is
    rank-deficient.
    """
    x = np.asarray(states, dtype=float)
    y = np.asarray(targets, dtype=float)
    if y.ndim == 3:
        y = y.reshape(len(y), -1)
    if len(x) < 4:
        raise ValueError("need at least 4 examples")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    design = np.column_stack([x, np.ones(len(x))])
    gram = design.T @ design
    if ridge == 0.0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularSystemError("Gram matrix is rank-deficient; pass ridge > 0")
    solution = np.linalg.solve(gram + ridge * np.eye(4), design.T @ y)
    return LinearModel(weights=solution[:3].T.copy(), bias=solution[3].copy())


@dataclass
class LaneCandidate:
    lane_id: str
    lateral_distance: float
    rollout: np.ndarray | None = None
    path_exhausted: bool = False


def _polyline_arclengths(points: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _project_to_polyline(points: np.ndarray, p: np.ndarray) -> tuple[float, float, float]:
    """Project p onto a polyline: (distance, arclength at foot, local direction)."""
    best = (math.inf, 0.0, 0.0)
    arc = _polyline_arclengths(points)
    for i in range(len(points) - 1):
        a, b = points[i], points[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        foot = a + t * ab
        dist = float(np.hypot(*(p - foot)))
        if dist < best[0]:
            best = (dist, float(arc[i] + t * np.linalg.norm(ab)), math.atan2(ab[1], ab[0]))
    return best


def associate_lanes(
    world_map: WorldMap,
    pose: Pose2,
    radius: float = DEFAULT_ASSOCIATION_RADIUS,
    heading_gate: float = HEADING_GATE,
) -> list[LaneCandidate]:
    """Lanes whose centerline passes within `radius` of the pose, sorted by
    lateral distance. Lanes pointing more than `heading_gate` away from the
    actor's heading are excluded (opposing traffic otherwise dominates)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    p = np.array([pose.x, pose.y])
    candidates = []
    for lane in world_map.lanes:
        dist, _, direction = _project_to_polyline(lane.centerline, p)
        if dist > radius:
            continue
        if abs(wrap_angle(direction - pose.heading)) > heading_gate:
            continue
        candidates.append(LaneCandidate(lane.lane_id, dist))
    candidates.sort(key=lambda c: (c.lateral_distance, c.lane_id))
    return candidates


def enumerate_routes(
    world_map: WorldMap, lane_id: str, min_length: float, max_routes: int = 16
) -> list[list[str]]:
    """Successor chains starting at `lane_id` until each path is long enough."""
    routes: list[list[str]] = []

    def extend(route: list[str], length: float) -> None:
        if len(routes) >= max_routes:
            return
        lane = world_map.lane(route[-1])
        length += float(_polyline_arclengths(lane.centerline)[-1])
        successors = [s for s in lane.successors if s not in route]
        if length >= min_length or not successors:
            routes.append(route)
            return
        for succ in successors:
            extend(route + [succ], length)

    extend([lane_id], 0.0)
    return routes


def route_points(world_map: WorldMap, route: list[str]) -> np.ndarray:
    pts = [world_map.lane(route[0]).centerline]
    for lane_id in route[1:]:
        center = world_map.lane(lane_id).centerline
        if np.allclose(center[0], pts[-1][-1]):
            center = center[1:]
        pts.append(center)
    return np.vstack(pts)


class _PathWalker:
    """Arc-length lookup along a fixed polyline, monotone in queries."""

    def __init__(self, points: np.ndarray):
        self.points = points
        self.arc = _polyline_arclengths(points)
        self.total = float(self.arc[-1])

    def point_at(self, s: float) -> tuple[np.ndarray, bool]:
        """Point at arclength s; the flag reports running off the end."""
        if s >= self.total:
            # Extrapolate along the final segment direction.
            a, b = self.points[-2], self.points[-1]
            d = b - a
            norm = np.linalg.norm(d)
            if norm > 0:
                d = d / norm
            return self.points[-1] + (s - self.total) * d, True
        idx = int(np.searchsorted(self.arc, s, side="right") - 1)
        idx = min(max(idx, 0), len(self.points) - 2)
        seg = self.arc[idx + 1] - self.arc[idx]
        t = 0.0 if seg == 0 else (s - self.arc[idx]) / seg
        return self.points[idx] + t * (self.points[idx + 1] - self.points[idx]), False


def pure_pursuit_rollout(
    state: ActorState,
    world_map: WorldMap,
    route: list[str],
    horizon: int,
    dt: float,
    params: PurePursuitParams = PurePursuitParams(),
) -> tuple[np.ndarray, bool]:
    """Forward-simulate a unicycle following the route at constant speed.

    At each step the goal point sits `lookahead` meters down the path from
    the projection of the current position; commanded curvature is
    2 * y_goal / L^2 with y_goal the goal's lateral offset in the vehicle
    frame. Returns actor-frame points plus a flag set when the path ran out
    (the rollout then continues straight).
    """
    path = _PathWalker(route_points(world_map, route))
    frame = state.pose
    v = state.velocity
    lookahead = params.lookahead(v)
    x, y, heading = frame.x, frame.y, frame.heading
    exhausted = False
    points = np.empty((horizon, 2))
    last_s = 0.0
    for h in range(horizon):
        _, foot_s, _ = _project_to_polyline(path.points, np.array([x, y]))
        foot_s = max(foot_s, last_s)
        last_s = foot_s
        goal, off_end = path.point_at(foot_s + lookahead)
        exhausted = exhausted or off_end
        c, s_ = unit_direction(heading)
        gx = goal[0] - x
        gy = goal[1] - y
        y_goal = -s_ * gx + c * gy
        curvature = 2.0 * y_goal / (lookahead * lookahead)
        heading = heading + curvature * v * dt
        c, s_ = unit_direction(heading)
        x += v * dt * c
        y += v * dt * s_
        points[h] = (x, y)
    return world_to_actor_many(frame, points), exhausted


def mean_squared_displacement(pred: np.ndarray, gt: np.ndarray) -> float:
    """Average squared point displacement between two (H, 2) trajectories."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    return float(np.mean(np.sum((pred - gt) ** 2, axis=1)))


def constant_velocity_trajectory(state: ActorState, horizon: int, dt: float) -> np.ndarray:
    steps = np.arange(1, horizon + 1) * dt * state.velocity
    return np.column_stack([steps, np.zeros(horizon)])


def lane_assoc_predict(
    world_map: WorldMap,
    state: ActorState,
    horizon: int,
    dt: float,
    ground_truth: np.ndarray | None = None,
    radius: float = DEFAULT_ASSOCIATION_RADIUS,
    params: PurePursuitParams = PurePursuitParams(),
) -> np.ndarray:
    """Roll out every associated lane route; pick by Eq.-style error when
    ground truth is supplied (evaluation mode), else by lateral distance.
    Falls back to a straight constant-velocity trajectory with no candidates."""
    candidates = associate_lanes(world_map, state.pose, radius)
    if not candidates:
        return constant_velocity_trajectory(state, horizon, dt)
    needed = params.lookahead(state.velocity) + state.velocity * horizon * dt
    rollouts: list[np.ndarray] = []
    by_candidate_first: np.ndarray | None = None
    for cand in candidates:
        for route in enumerate_routes(world_map, cand.lane_id, needed):
            traj, exhausted = pure_pursuit_rollout(state, world_map, route, horizon, dt, params)
            cand.rollout = traj if cand.rollout is None else cand.rollout
            cand.path_exhausted = cand.path_exhausted or exhausted
            rollouts.append(traj)
            if by_candidate_first is None:
                by_candidate_first = traj
    if ground_truth is not None:
        losses = [mean_squared_displacement(r, ground_truth) for r in rollouts]
        return rollouts[int(np.argmin(losses))]
    return by_candidate_first
