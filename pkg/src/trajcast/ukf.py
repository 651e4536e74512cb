"""Unscented Kalman filter over a constant-turn-rate-and-velocity model.

The filter serves two roles: it smooths noisy synthetic observations into
the tracked states consumed by the predictor, and its open-loop rollout of
the filtered mean is the propagation baseline the learned models are
compared against.

State vector order: (x, y, velocity, heading, heading_change_rate,
acceleration). Acceleration acts along-track only; the turn rate is not
damped during rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefiniteError
from .geometry import Pose2, wrap_angle, world_to_actor_many

STATE_DIM = 6
HEADING_IDX = 3

# Below this turn rate the closed-form arc degenerates; use the straight-line limit.
TURN_RATE_EPS = 1e-6


@dataclass(frozen=True)
class KinematicState:
    x: float
    y: float
    velocity: float
    heading: float
    heading_change_rate: float
    acceleration: float

    def __post_init__(self) -> None:
        values = (self.x, self.y, self.velocity, self.heading,
                  self.heading_change_rate, self.acceleration)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("kinematic state must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.velocity, self.heading,
                         self.heading_change_rate, self.acceleration])

    @staticmethod
    def from_vector(v: np.ndarray) -> "KinematicState":
        return KinematicState(float(v[0]), float(v[1]), float(v[2]),
                              float(v[3]), float(v[4]), float(v[5]))


def _default_process_sigmas() -> np.ndarray:
    return np.array([0.05, 0.05, 0.1, 0.01, 0.01, 0.1])


def _default_obs_sigmas() -> np.ndarray:
    return np.array([0.15, 0.15, 0.02])


def _default_init_sigmas() -> np.ndarray:
    return np.array([0.15, 0.15, 5.0, 0.02, 0.5, 1.0])


@dataclass(frozen=True)
class UkfParams:
    """Unscented-transform scaling and noise levels.

    `process_sigmas` are per-dimension standard deviations whose squares are
    scaled by dt to form the process noise; `obs_sigmas` cover the observed
    (x, y, heading); `init_sigmas` seed the covariance from one observation.
    """

    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    process_sigmas: np.ndarray = field(default_factory=_default_process_sigmas)
    obs_sigmas: np.ndarray = field(default_factory=_default_obs_sigmas)
    init_sigmas: np.ndarray = field(default_factory=_default_init_sigmas)

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "process_sigmas", np.asarray(self.process_sigmas, dtype=float))
        object.__setattr__(self, "obs_sigmas", np.asarray(self.obs_sigmas, dtype=float))
        object.__setattr__(self, "init_sigmas", np.asarray(self.init_sigmas, dtype=float))
        if np.any(self.process_sigmas <= 0) or np.any(self.obs_sigmas <= 0):
            raise ValueError("noise sigmas must be positive")


@dataclass(frozen=True)
class BeliefState:
    mean: KinematicState
    covariance: np.ndarray

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("covariance must be 6x6")
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "covariance", cov)


def ctrv_step(s: KinematicState, dt: float) -> KinematicState:
    """Closed-form constant-turn-rate propagation with along-track acceleration."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, theta, omega, a = s.velocity, s.heading, s.heading_change_rate, s.acceleration
    if abs(omega) < TURN_RATE_EPS:
        dist = v * dt + 0.5 * a * dt * dt
        c, s_ = math.cos(theta), math.sin(theta)
        x = s.x + dist * c
        y = s.y + dist * s_
    else:
        phi = omega * dt
        theta1 = theta + phi
        # Product forms of sin/cos differences avoid cancellation when the
        # swept angle is tiny (the a/omega^2 factor magnifies any rounding).
        sin_half = math.sin(0.5 * phi)
        dsin = 2.0 * sin_half * math.cos(theta + 0.5 * phi)
        dcos = -2.0 * sin_half * math.sin(theta + 0.5 * phi)
        x = s.x + (v * dsin + a * dt * math.sin(theta1)) / omega + (a / omega**2) * dcos
        y = s.y + (-v * dcos - a * dt * math.cos(theta1)) / omega + (a / omega**2) * dsin
    return KinematicState(x, y, v + a * dt, theta + omega * dt, omega, a)


def _ctrv_step_vec(state_vec: np.ndarray, dt: float) -> np.ndarray:
    out = ctrv_step(KinematicState.from_vector(state_vec), dt).as_vector()
    # Keep the raw (unwrapped) heading for sigma-point statistics.
    out[HEADING_IDX] = state_vec[HEADING_IDX] + state_vec[4] * dt
    return out


def sigma_points(belief: BeliefState, params: UkfParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merwe scaled sigma points: (2d+1, d) array plus mean/covariance weights."""
    d = STATE_DIM
    lam = params.alpha**2 * (d + params.kappa) - d
    try:
        sqrt = np.linalg.cholesky((d + lam) * belief.covariance)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance is not positive definite") from exc
    mean = belief.mean.as_vector()
    points = np.empty((2 * d + 1, d))
    points[0] = mean
    points[1 : d + 1] = mean + sqrt.T
    points[d + 1 :] = mean - sqrt.T
    w_mean = np.full(2 * d + 1, 1.0 / (2.0 * (d + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (d + lam)
    w_cov[0] = lam / (d + lam) + (1.0 - params.alpha**2 + params.beta)
    return points, w_mean, w_cov


def _weighted_state_mean(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted mean with the heading dimension treated as an angle.

    Headings are averaged as wrapped residuals about the central sigma
    point, which is safe because scaled sigma points cluster tightly.
    """
    mean = points.T @ weights
    ref = points[0, HEADING_IDX]
    residuals = np.array([wrap_angle(p - ref) for p in points[:, HEADING_IDX]])
    mean[HEADING_IDX] = ref + residuals @ weights
    return mean


def _state_residuals(points: np.ndarray, mean: np.ndarray) -> np.ndarray:
    res = points - mean
    res[:, HEADING_IDX] = [wrap_angle(v) for v in res[:, HEADING_IDX]]
    return res


class UnscentedFilter:
    """Recursive CTRV filter over (x, y, heading) observations for one track."""

    def __init__(self, params: UkfParams, dt: float):
        self.params = params
        self.dt = dt
        self.belief: BeliefState | None = None

    def initialize(self, obs: np.ndarray) -> BeliefState:
        mean = KinematicState(float(obs[0]), float(obs[1]), 0.0, float(obs[2]), 0.0, 0.0)
        cov = np.diag(self.params.init_sigmas**2)
        self.belief = BeliefState(mean, cov)
        return self.belief

    def predict(self) -> BeliefState:
        points, w_mean, w_cov = sigma_points(self.belief, self.params)
        propagated = np.array([_ctrv_step_vec(p, self.dt) for p in points])
        mean = _weighted_state_mean(propagated, w_mean)
        res = _state_residuals(propagated, mean)
        cov = (res.T * w_cov) @ res + np.diag(self.params.process_sigmas**2) * self.dt
        cov = 0.5 * (cov + cov.T)
        self.belief = BeliefState(KinematicState.from_vector(mean), cov)
        self._predicted_points = propagated
        return self.belief

    def update(self, obs: np.ndarray) -> BeliefState:
        points, w_mean, w_cov = sigma_points(self.belief, self.params)
        z_points = points[:, [0, 1, HEADING_IDX]]
        z_mean = z_points.T @ w_mean
        ref = z_points[0, 2]
        z_mean[2] = ref + np.array([wrap_angle(v - ref) for v in z_points[:, 2]]) @ w_mean

        z_res = z_points - z_mean
        z_res[:, 2] = [wrap_angle(v) for v in z_res[:, 2]]
        s_cov = (z_res.T * w_cov) @ z_res + np.diag(self.params.obs_sigmas**2)
        x_res = _state_residuals(points, self.belief.mean.as_vector())
        cross = (x_res.T * w_cov) @ z_res
        gain = np.linalg.solve(s_cov.T, cross.T).T

        innovation = np.asarray(obs, dtype=float) - z_mean
        innovation[2] = wrap_angle(innovation[2])
        mean = self.belief.mean.as_vector() + gain @ innovation
        cov = self.belief.covariance - gain @ s_cov @ gain.T
        cov = 0.5 * (cov + cov.T)
        self.belief = BeliefState(KinematicState.from_vector(mean), cov)
        return self.belief

    def step(self, obs: np.ndarray) -> BeliefState:
        if self.belief is None:
            return self.initialize(obs)
        self.predict()
        return self.update(obs)


def ukf_filter(observations: np.ndarray, params: UkfParams, dt: float) -> list[BeliefState]:
    """Filter a (N, 3) sequence of noisy (x, y, heading) observations."""
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 3 or len(obs) < 1:
        raise ValueError("need a non-empty (N, 3) observation array")
    filt = UnscentedFilter(params, dt)
    return [filt.step(z) for z in obs]


def ukf_predict_trajectory(belief: BeliefState, horizon: int, dt: float) -> np.ndarray:
    """Open-loop rollout of the filtered mean, in the actor frame at prediction time."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    frame = Pose2(belief.mean.x, belief.mean.y, belief.mean.heading)
    state = belief.mean
    world = np.empty((horizon, 2))
    for h in range(horizon):
        state = ctrv_step(state, dt)
        world[h] = (state.x, state.y)
    return world_to_actor_many(frame, world)


def predict_from_state_vector(state3: np.ndarray, horizon: int, dt: float) -> np.ndarray:
    """CTRV rollout straight from a (v, a, hcr) input vector, in its own frame."""
    v, a, hcr = (float(s) for s in state3)
    mean = KinematicState(0.0, 0.0, v, 0.0, hcr, a)
    belief = BeliefState(mean, np.eye(STATE_DIM))
    return ukf_predict_trajectory(belief, horizon, dt)
