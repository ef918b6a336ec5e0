"""Tests for the constant-velocity box filter against a textbook matrix oracle."""

import numpy as np
import pytest

from src.errors import CovarianceError, InvalidDetectionError
from src.tracking.base import Detection
from src.tracking.geometry import BoundingBox
from src.tracking.kalman import (
    MotionState,
    NoiseConfig,
    box_to_observation,
    init_state,
    measurement_noise,
    observation_matrix,
    predict,
    process_noise,
    state_height,
    state_to_box,
    transition_matrix,
    update,
)


def det(x, y, w, h) -> Detection:
    return Detection(box=BoundingBox(x=x, y=y, w=w, h=h))


def oracle_height(x):
    s = max(x[2], 1e-6)
    r = min(max(x[3], 1e-3), 1e3)
    return max(np.sqrt(s / r), 1.0)


def oracle_predict(x, p, q):
    f = np.eye(8)
    f[:4, 4:] = np.eye(4)
    x = f @ x
    x[2] = max(x[2], 0.0)
    return x, f @ p @ f.T + q


def oracle_update(x, p, z, r):
    h = np.hstack([np.eye(4), np.zeros((4, 4))])
    s = h @ p @ h.T + r
    k = p @ h.T @ np.linalg.inv(s)
    x = x + k @ (z - h @ x)
    x[2] = max(x[2], 0.0)
    x[3] = min(max(x[3], 1e-3), 1e3)
    p = (np.eye(8) - k @ h) @ p
    return x, (p + p.T) / 2


class TestInitState:
    """Track birth from a detection."""

    def test_mean_is_observation_with_zero_velocity(self):
        st = init_state(det(10, 20, 4, 8), NoiseConfig())
        np.testing.assert_allclose(st.mean, [12, 24, 32, 0.5, 0, 0, 0, 0])

    def test_covariance_diagonal(self):
        cfg = NoiseConfig()
        st = init_state(det(10, 20, 4, 8), cfg)
        std = np.array([8 / 20, 8 / 20, 64 / 10, 0.05])
        np.testing.assert_allclose(cfg.measurement_std(8.0), std)
        expected = np.concatenate([std, std * 10]) ** 2
        np.testing.assert_allclose(np.diag(st.covariance), expected)
        assert np.count_nonzero(st.covariance - np.diag(np.diag(st.covariance))) == 0

    def test_round_trip_to_box(self):
        box = state_to_box(init_state(det(10, 20, 4, 8), NoiseConfig()))
        assert (box.x, box.y, box.w, box.h) == pytest.approx((10, 20, 4, 8))

    def test_degenerate_detection_rejected(self):
        with pytest.raises(InvalidDetectionError):
            box_to_observation(BoundingBox(x=0, y=0, w=0, h=5))


class TestPredict:
    """Constant-velocity propagation."""

    def test_position_advances_by_velocity(self):
        st = init_state(det(0, 0, 10, 20), NoiseConfig())
        mean = st.mean.copy()
        mean[4:6] = [3.0, -1.0]
        out = predict(MotionState(mean, st.covariance), NoiseConfig())
        assert out.mean[0] == pytest.approx(5 + 3)
        assert out.mean[1] == pytest.approx(10 - 1)

    def test_covariance_trace_grows(self):
        cfg = NoiseConfig()
        st = init_state(det(0, 0, 10, 20), cfg)
        for _ in range(5):
            st = update(predict(st, cfg), det(1, 1, 10, 20), cfg)
            assert np.trace(predict(st, cfg).covariance) > np.trace(st.covariance)

    def test_negative_area_clamped(self):
        cfg = NoiseConfig()
        st = init_state(det(0, 0, 10, 10), cfg)
        mean = st.mean.copy()
        mean[6] = -1000.0
        out = predict(MotionState(mean, st.covariance), cfg)
        assert out.mean[2] == 0.0
        box = state_to_box(out)
        assert box.w > 0 and box.h > 0

    def test_input_not_mutated(self):
        cfg = NoiseConfig()
        st = init_state(det(0, 0, 10, 10), cfg)
        before = st.mean.copy()
        predict(st, cfg)
        np.testing.assert_array_equal(st.mean, before)


class TestUpdate:
    """Measurement correction."""

    def test_scalar_gain_is_half(self):
        """Prior variance 1 and measurement variance 1 give gain 0.5."""
        # height 10: position std 0.1 * 10, area std 0.01 * 100
        cfg = NoiseConfig(
            measurement_position=0.1,
            measurement_area=0.01,
            measurement_aspect=1.0,
        )
        mean = np.array([0.0, 0.0, 100.0, 1.0, 0, 0, 0, 0])
        cov = np.eye(8)
        out = update(MotionState(mean, cov), Detection(box=BoundingBox.from_center(2.0, -4.0, 10, 10)), cfg)
        assert out.mean[0] == pytest.approx(1.0, abs=1e-12)
        assert out.mean[1] == pytest.approx(-2.0, abs=1e-12)
        assert out.covariance[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert out.mean[4] == 0.0

    def test_uncertain_prior_converges_to_measurement(self):
        cfg = NoiseConfig()
        mean = np.array([500.0, 500.0, 400.0, 1.0, 0, 0, 0, 0])
        st = MotionState(mean, np.eye(8) * 1e8)
        target = det(40, 60, 20, 40)
        for _ in range(3):
            st = update(st, target, cfg)
        np.testing.assert_allclose(st.mean[:4], box_to_observation(target.box), rtol=1e-3)

    def test_covariance_stays_symmetric(self):
        cfg = NoiseConfig()
        st = init_state(det(0, 0, 10, 20), cfg)
        for k in range(20):
            st = update(predict(st, cfg), det(k, 2 * k, 10, 20), cfg)
        np.testing.assert_array_equal(st.covariance, st.covariance.T)
        assert np.all(np.linalg.eigvalsh(st.covariance) > 0)

    def test_broken_covariance_raises(self):
        cfg = NoiseConfig()
        st = init_state(det(0, 0, 10, 20), cfg)
        cov = st.covariance.copy()
        cov[0, 0] = -1e6
        with pytest.raises(CovarianceError):
            update(MotionState(st.mean, cov), det(0, 0, 10, 20), cfg)

    def test_posterior_variances_do_not_grow(self):
        rng = np.random.default_rng(7)
        cfg = NoiseConfig()
        for _ in range(50):
            w, h = rng.uniform(5, 120, size=2)
            st = predict(init_state(det(*rng.uniform(0, 400, size=2), w, h), cfg), cfg)
            d = det(*rng.uniform(0, 400, size=2), *rng.uniform(5, 120, size=2))
            out = update(st, d, cfg)
            assert np.all(np.diag(out.covariance) <= np.diag(st.covariance) + 1e-9)

    def test_repeated_identical_detection_converges(self):
        cfg = NoiseConfig()
        st = init_state(det(0, 0, 20, 40), cfg)
        target = det(3, 2, 20, 40)
        for _ in range(50):
            st = update(predict(st, cfg), target, cfg)
        np.testing.assert_allclose(st.mean[:2], box_to_observation(target.box)[:2], atol=1e-3)
        np.testing.assert_allclose(st.mean[4:6], [0.0, 0.0], atol=1e-3)

    def test_noiseless_constant_velocity_is_tracked(self):
        cfg = NoiseConfig()
        st = init_state(det(10, 50, 20, 40), cfg)
        errors = []
        for k in range(1, 61):
            st = update(predict(st, cfg), det(10 + 2.0 * k, 50 - 1.0 * k, 20, 40), cfg)
            box = state_to_box(st)
            errors.append(np.hypot(box.x - (10 + 2.0 * k), box.y - (50 - 1.0 * k)))
        assert max(errors[29:]) < 0.5


class TestNoiseScaling:
    """Noise follows the box height."""

    def test_state_height(self):
        assert state_height(np.array([0, 0, 800.0, 0.5, 0, 0, 0, 0])) == pytest.approx(40.0)
        assert state_height(np.zeros(8)) == 1.0

    def test_measurement_noise_scales_with_height(self):
        cfg = NoiseConfig()
        small, large = measurement_noise(cfg, 10.0), measurement_noise(cfg, 100.0)
        assert large[0, 0] == pytest.approx(100 * small[0, 0])
        assert large[2, 2] == pytest.approx(10_000 * small[2, 2])
        assert large[3, 3] == small[3, 3]

    def test_process_noise_scales_with_height(self):
        cfg = NoiseConfig()
        assert process_noise(cfg, 40.0)[4, 4] == pytest.approx((40 / 160) ** 2)
        assert process_noise(cfg, 40.0)[0, 0] == pytest.approx(4 * process_noise(cfg, 20.0)[0, 0])

    def test_larger_box_has_wider_prediction(self):
        cfg = NoiseConfig()
        small = predict(init_state(det(0, 0, 10, 20), cfg), cfg)
        large = predict(init_state(det(0, 0, 50, 100), cfg), cfg)
        assert large.covariance[0, 0] == pytest.approx(25 * small.covariance[0, 0])


class TestOracleEquivalence:
    """Random predict/update sequences agree with the textbook form."""

    def test_random_sequences(self):
        rng = np.random.default_rng(1234)
        cfg = NoiseConfig()
        errors = []
        for _ in range(100):
            x0 = rng.uniform(50, 500, size=2)
            w, h = rng.uniform(10, 80, size=2)
            st = init_state(det(x0[0], x0[1], w, h), cfg)
            x, p = st.mean.copy(), st.covariance.copy()
            vel = rng.uniform(-3, 3, size=2)
            for k in range(1, 21):
                st = predict(st, cfg)
                x, p = oracle_predict(x, p, process_noise(cfg, oracle_height(x)))
                if rng.random() < 0.8:
                    noise = rng.normal(0, 1.0, size=4)
                    d = det(
                        x0[0] + vel[0] * k + noise[0],
                        x0[1] + vel[1] * k + noise[1],
                        w + abs(noise[2]),
                        h + abs(noise[3]),
                    )
                    st = update(st, d, cfg)
                    r = measurement_noise(cfg, oracle_height(x))
                    x, p = oracle_update(x, p, box_to_observation(d.box), r)
                np.testing.assert_allclose(st.mean, x, rtol=1e-9, atol=1e-8)
                np.testing.assert_allclose(st.covariance, p, rtol=1e-9, atol=1e-8)
            errors.append(np.abs(st.mean - x).mean())
        assert float(np.mean(errors)) < 1e-8

    def test_matrices(self):
        f = transition_matrix()
        assert f.shape == (8, 8)
        np.testing.assert_array_equal(f[:4, 4:], np.eye(4))
        np.testing.assert_array_equal(observation_matrix(), np.hstack([np.eye(4), np.zeros((4, 4))]))
