import math

import numpy as np
import pytest

from trajcast.errors import NotPositiveDefiniteError
from trajcast.geometry import TICK_DT
from trajcast.ukf import (
    BeliefState,
    KinematicState,
    UkfParams,
    UnscentedFilter,
    ctrv_step,
    predict_from_state_vector,
    sigma_points,
    ukf_filter,
    ukf_predict_trajectory,
)


def kstate(x=0.0, y=0.0, v=0.0, heading=0.0, hcr=0.0, a=0.0):
    return KinematicState(x, y, v, heading, hcr, a)


def simulate_ctrv(state, n, dt=TICK_DT):
    states = [state]
    for _ in range(n):
        states.append(ctrv_step(states[-1], dt))
    return states


class TestCtrvStep:
    def test_uniform_motion(self):
        out = ctrv_step(kstate(v=10.0), 1.0)
        assert (out.x, out.y) == pytest.approx((10.0, 0.0))
        assert out.velocity == 10.0

    def test_circle_oracle(self):
        # v = 5, hcr = 0.5: radius 10 m circle; sweep a quarter turn.
        dt = (math.pi / 2) / 0.5
        out = ctrv_step(kstate(v=5.0, hcr=0.5), dt)
        assert (out.x, out.y) == pytest.approx((10.0, 10.0), abs=1e-9)
        assert out.heading == pytest.approx(math.pi / 2)

    def test_zero_state_fixed_point(self):
        out = ctrv_step(kstate(), 3.7)
        assert out == kstate()

    def test_acceleration_straight(self):
        out = ctrv_step(kstate(v=2.0, a=1.0), 2.0)
        assert out.x == pytest.approx(2.0 * 2.0 + 0.5 * 1.0 * 4.0)
        assert out.velocity == pytest.approx(4.0)

    def test_continuity_at_small_turn_rates(self):
        base = kstate(v=10.0, heading=0.3, a=0.5)
        straight = ctrv_step(base, TICK_DT)
        curved = ctrv_step(kstate(v=10.0, heading=0.3, hcr=1e-6, a=0.5), TICK_DT)
        assert math.hypot(curved.x - straight.x, curved.y - straight.y) <= 1e-6

    def test_turning_with_acceleration_matches_quadrature(self):
        # Independent oracle: numerically integrate the kinematic ODE.
        s = kstate(v=6.0, heading=0.4, hcr=0.7, a=0.8)
        dt = 1.3
        steps = 200000
        h = dt / steps
        x = y = 0.0
        for i in range(steps):
            t = (i + 0.5) * h
            x += (s.velocity + s.acceleration * t) * math.cos(s.heading + s.heading_change_rate * t) * h
            y += (s.velocity + s.acceleration * t) * math.sin(s.heading + s.heading_change_rate * t) * h
        out = ctrv_step(s, dt)
        assert out.x == pytest.approx(x, abs=1e-6)
        assert out.y == pytest.approx(y, abs=1e-6)


class TestSigmaPoints:
    def test_count_and_mean_weight(self):
        params = UkfParams(alpha=1.0, kappa=0.0)
        belief = BeliefState(kstate(), np.eye(6))
        pts, w_mean, w_cov = sigma_points(belief, params)
        assert pts.shape == (13, 6)
        lam = 1.0**2 * 6 - 6
        assert w_mean[0] == pytest.approx(lam / (6 + lam))
        assert w_mean.sum() == pytest.approx(1.0)

    def test_mean_reconstruction(self):
        params = UkfParams()
        mean = kstate(x=3.0, y=-2.0, v=7.0, heading=0.5, hcr=0.1, a=0.3)
        cov = np.diag([0.1, 0.2, 0.5, 0.01, 0.02, 0.3])
        pts, w_mean, _ = sigma_points(BeliefState(mean, cov), params)
        rec = pts.T @ w_mean
        assert np.allclose(rec, mean.as_vector(), atol=1e-9)

    def test_covariance_reconstruction(self):
        params = UkfParams(alpha=0.5, beta=2.0, kappa=1.0)
        rng = np.random.default_rng(7)
        a = rng.normal(size=(6, 6))
        cov = a @ a.T + 6 * np.eye(6)
        mean = kstate(v=4.0)
        pts, w_mean, w_cov = sigma_points(BeliefState(mean, cov), params)
        rec_mean = pts.T @ w_mean
        res = pts - rec_mean
        rec_cov = (res.T * w_cov) @ res
        assert np.allclose(rec_cov, cov, atol=1e-9)

    def test_not_positive_definite(self):
        bad = np.diag([1.0, 1.0, 1.0, 1.0, 1.0, -1.0])
        with pytest.raises(NotPositiveDefiniteError):
            sigma_points(BeliefState(kstate(), 0.5 * (bad + bad.T)), UkfParams())


class TestFilter:
    def test_single_observation_initialization(self):
        params = UkfParams()
        beliefs = ukf_filter(np.array([[2.0, 3.0, 0.4]]), params, TICK_DT)
        assert len(beliefs) == 1
        b = beliefs[0]
        assert (b.mean.x, b.mean.y, b.mean.heading) == pytest.approx((2.0, 3.0, 0.4))
        assert b.mean.velocity == 0.0
        assert np.allclose(b.covariance, np.diag(params.init_sigmas**2))

    def test_converges_on_noiseless_constant_velocity(self):
        truth = simulate_ctrv(kstate(v=8.0, heading=0.3), 200)
        obs = np.array([(s.x, s.y, s.heading) for s in truth[:-1]])
        beliefs = ukf_filter(obs, UkfParams(), TICK_DT)
        final = beliefs[-1].mean
        true_final = truth[len(obs) - 1]
        err = math.hypot(final.x - true_final.x, final.y - true_final.y)
        assert err <= 1e-3
        assert final.velocity == pytest.approx(8.0, abs=5e-3)

    def test_turn_rate_convergence(self):
        truth = simulate_ctrv(kstate(v=6.0, hcr=0.5), 40)
        obs = np.array([(s.x, s.y, s.heading) for s in truth[:31]])
        beliefs = ukf_filter(obs, UkfParams(), TICK_DT)
        assert beliefs[30].mean.heading_change_rate == pytest.approx(0.5, rel=0.05)

    def test_covariance_stays_spd_under_random_observations(self):
        rng = np.random.default_rng(3)
        filt = UnscentedFilter(UkfParams(), TICK_DT)
        filt.initialize(np.zeros(3))
        for _ in range(1000):
            z = rng.normal(scale=[5.0, 5.0, 0.5])
            filt.predict()
            filt.update(z)
            cov = filt.belief.covariance
            assert np.allclose(cov, cov.T, atol=1e-9)
            assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_rejects_empty_observations(self):
        with pytest.raises(ValueError):
            ukf_filter(np.zeros((0, 3)), UkfParams(), TICK_DT)


class TestPredictTrajectory:
    def test_uniform_motion_rollout(self):
        belief = BeliefState(kstate(v=10.0), np.eye(6))
        traj = ukf_predict_trajectory(belief, 30, TICK_DT)
        expected = [((h + 1) * 1.0, 0.0) for h in range(30)]
        assert np.allclose(traj, expected, atol=1e-12)

    def test_rollout_in_actor_frame(self):
        # A belief away from the origin with nonzero heading still predicts
        # in its own frame: pure forward motion stays on the +x axis.
        belief = BeliefState(kstate(x=12.0, y=-7.0, v=4.0, heading=2.1), np.eye(6))
        traj = ukf_predict_trajectory(belief, 10, TICK_DT)
        assert np.allclose(traj[:, 1], 0.0, atol=1e-9)
        assert traj[-1, 0] == pytest.approx(4.0, abs=1e-9)

    def test_constant_turn_circle(self):
        v, hcr = 5.0, 0.5
        radius = v / hcr
        belief = BeliefState(kstate(v=v, hcr=hcr), np.eye(6))
        traj = ukf_predict_trajectory(belief, 20, TICK_DT)
        for h, p in enumerate(traj, start=1):
            theta = hcr * h * TICK_DT
            assert p == pytest.approx(
                (radius * math.sin(theta), radius * (1 - math.cos(theta))), abs=1e-9
            )

    def test_stationary(self):
        belief = BeliefState(kstate(), np.eye(6))
        assert np.allclose(ukf_predict_trajectory(belief, 7, TICK_DT), 0.0)

    def test_predict_from_state_vector(self):
        traj = predict_from_state_vector(np.array([10.0, 0.0, 0.0]), 5, TICK_DT)
        assert np.allclose(traj, [[1, 0], [2, 0], [3, 0], [4, 0], [5, 0]])


def test_filter_then_predict_recovers_generated_turn():
    # End-to-end: noiseless CTRV data in, filtered rollout matches the future.
    truth = simulate_ctrv(kstate(v=7.0, hcr=0.3), 280)
    obs = np.array([(s.x, s.y, s.heading) for s in truth[:251]])
    beliefs = ukf_filter(obs, UkfParams(), TICK_DT)
    traj = ukf_predict_trajectory(beliefs[-1], 30, TICK_DT)
    frame_state = truth[250]
    from trajcast.geometry import Pose2, world_to_actor

    frame = Pose2(frame_state.x, frame_state.y, frame_state.heading)
    worst = 0.0
    for h in range(1, 31):
        gt = world_to_actor(frame, (truth[250 + h].x, truth[250 + h].y))
        worst = max(worst, math.hypot(traj[h - 1][0] - gt[0], traj[h - 1][1] - gt[1]))
    assert worst <= 1e-3
