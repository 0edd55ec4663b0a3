"""Motion filter: the noise-scale rule and the update against textbook algebra.

The reference values for the noise-scale rule were computed by hand (plain
float evaluation of th/s and exp((1 - s) * (1.5 - N)) in an interpreter,
independent of this package) and are frozen here.
"""

import math

import numpy as np
import pytest

from adaptrack import (
    BBox,
    DegenerateFilterError,
    KalmanState,
    NoiseConfig,
    adaptive_factor,
    initiate,
    predict,
    state_box,
    update,
)
from oracles import textbook_kalman_update

# (s_det, n_lost, n_max, th_det) -> expected factor
ADAPTIVE_FACTOR_CASES = [
    (0.9, 0, 30, 0.6, 0.6666666666666666),
    (1.0, 0, 30, 0.6, 0.6),
    (0.61, 0, 30, 0.6, 0.9836065573770492),
    (0.75, 0, 30, 0.6, 0.7999999999999999),
    (0.8, 0, 30, 0.6, 0.7499999999999999),
    (0.65, 12, 30, 0.6, 0.923076923076923),
    (0.95, 30, 30, 0.6, 0.631578947368421),
    (0.7, 5, 30, 0.6, 0.8571428571428572),
    (0.9, 0, 30, 0.5, 0.5555555555555556),
    (0.99, 0, 30, 0.75, 0.7575757575757576),
    (0.6, 0, 30, 0.6, 1.4918246976412703),
    (0.5, 0, 30, 0.6, 1.6487212707001282),
    (0.3, 10, 30, 0.6, 2.0137527074704766),
    (0.1, 15, 30, 0.6, 2.45960311115695),
    (0.0, 0, 30, 0.6, 2.718281828459045),
    (0.4, 14, 30, 0.6, 1.8221188003905089),
    (0.5, 30, 30, 0.6, 1.2840254166877414),
    (0.3, 24, 30, 0.6, 1.632316219955379),
    (0.2, 30, 30, 0.6, 1.4918246976412703),
    (0.6, 30, 30, 0.6, 1.2214027581601699),
    (0.55, 21, 30, 0.6, 1.4333294145603401),
    (0.1, 27, 30, 0.6, 1.7160068621848585),
    (0.45, 18, 30, 0.6, 1.6404982390570442),
    (0.25, 60, 60, 0.6, 1.4549914146182013),
]


def random_state(rng, cfg):
    """A plausible filter state: born from a box, advanced a few frames."""
    box = BBox(
        float(rng.uniform(0, 800)),
        float(rng.uniform(0, 800)),
        float(rng.uniform(20, 80)),
        float(rng.uniform(40, 160)),
    )
    st = initiate(box, cfg)
    mean = st.mean.copy()
    mean[4:6] = rng.uniform(-3, 3, size=2)
    st = KalmanState(mean, st.covariance)
    for _ in range(int(rng.integers(1, 4))):
        st = predict(st, cfg)
    return st


class TestNoiseConfig:
    def test_defaults(self):
        cfg = NoiseConfig()
        assert cfg.th_det == 0.6
        assert cfg.n_max == 30

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseConfig(sigma_pos=0.0)
        with pytest.raises(ValueError):
            NoiseConfig(sigma_vel=-1.0)
        with pytest.raises(ValueError):
            NoiseConfig(th_det=1.0)
        with pytest.raises(ValueError):
            NoiseConfig(n_max=0)


class TestKalmanState:
    def test_shape_checks(self):
        with pytest.raises(ValueError):
            KalmanState(np.zeros(7), np.eye(8))
        with pytest.raises(ValueError):
            KalmanState(np.zeros(8), np.eye(7))

    def test_rejects_nonfinite(self):
        m = np.zeros(8)
        m[0] = np.nan
        with pytest.raises(ValueError):
            KalmanState(m, np.eye(8))

    def test_arrays_read_only(self):
        st = KalmanState(np.zeros(8), np.eye(8))
        with pytest.raises(ValueError):
            st.mean[0] = 1.0
        with pytest.raises(ValueError):
            st.covariance[0, 0] = 2.0


class TestAdaptiveFactor:
    @pytest.mark.parametrize("s_det,n_lost,n_max,th_det,expected", ADAPTIVE_FACTOR_CASES)
    def test_reference_values(self, s_det, n_lost, n_max, th_det, expected):
        got = adaptive_factor(s_det, n_lost, n_max, th_det)
        assert abs(got - expected) <= 1e-9 * abs(expected)

    def test_branch_boundary(self):
        # at the threshold the exponential branch applies; just above, the ratio
        at = adaptive_factor(0.6, 0, 30, 0.6)
        above = adaptive_factor(0.6 + 1e-12, 0, 30, 0.6)
        assert at > 1.0
        assert above < 1.0

    def test_bounded(self):
        rng = np.random.default_rng(40)
        upper = math.exp(1.5)
        for _ in range(300):
            a = adaptive_factor(
                float(rng.uniform(0, 1)), int(rng.integers(0, 61)), 30, 0.6
            )
            assert 0.0 < a <= upper + 1e-12

    def test_decreasing_in_confidence_above_threshold(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            grid = np.sort(rng.uniform(0.6 + 1e-9, 1.0, size=12))
            vals = [adaptive_factor(float(s), 0, 30, 0.6) for s in grid]
            assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_decreasing_in_confidence_below_threshold(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n_lost = int(rng.integers(0, 31))
            grid = np.sort(rng.uniform(0.0, 0.6, size=12))
            vals = [adaptive_factor(float(s), n_lost, 30, 0.6) for s in grid]
            assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_nonincreasing_in_lost_frames(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            s = float(rng.uniform(0.0, 0.6))
            vals = [adaptive_factor(s, n, 30, 0.6) for n in range(0, 61, 5)]
            assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            adaptive_factor(1.1, 0, 30, 0.6)
        with pytest.raises(ValueError):
            adaptive_factor(0.5, -1, 30, 0.6)
        with pytest.raises(ValueError):
            adaptive_factor(0.5, 0, 0, 0.6)
        with pytest.raises(ValueError):
            adaptive_factor(0.5, 0, 30, 0.0)


class TestInitiate:
    def test_mean_and_spread(self):
        cfg = NoiseConfig()
        box = BBox(10, 20, 30, 40)
        st = initiate(box, cfg)
        assert np.allclose(st.mean[:4], box.to_cxcywh())
        assert np.all(st.mean[4:] == 0.0)
        pos_var = (cfg.sigma_pos * 40) ** 2
        assert np.allclose(np.diag(st.covariance)[:4], pos_var)
        assert np.allclose(np.diag(st.covariance)[4:], 100.0 * pos_var)


class TestPredict:
    def test_constant_velocity(self):
        st = KalmanState(np.array([0, 0, 10, 10, 1, 0, 0, 0], dtype=float), np.eye(8))
        out = predict(st, NoiseConfig())
        assert np.allclose(out.mean, [1, 0, 10, 10, 1, 0, 0, 0])

    def test_zero_velocity_keeps_position(self):
        st = KalmanState(np.array([5, 6, 10, 12, 0, 0, 0, 0], dtype=float), np.eye(8))
        out = predict(st, NoiseConfig())
        assert np.allclose(out.mean, st.mean)

    def test_trace_strictly_increases(self):
        cfg = NoiseConfig()
        st = KalmanState(np.array([5, 6, 10, 12, 0, 0, 0, 0], dtype=float), np.eye(8))
        prev = np.trace(st.covariance)
        for _ in range(10):
            st = predict(st, cfg)
            cur = np.trace(st.covariance)
            assert cur > prev
            prev = cur

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(44)
        cfg = NoiseConfig()
        for _ in range(20):
            st = random_state(rng, cfg)
            out = predict(st, cfg)
            assert np.max(np.abs(out.covariance - out.covariance.T)) <= 1e-9

    def test_size_clamped(self):
        mean = np.array([0, 0, 2, 2, 0, 0, -5, -5], dtype=float)
        out = predict(KalmanState(mean, np.eye(8)), NoiseConfig())
        assert out.mean[2] == 1.0
        assert out.mean[3] == 1.0


class TestUpdate:
    def test_matches_textbook_at_unit_alpha(self):
        rng = np.random.default_rng(45)
        cfg = NoiseConfig()
        for _ in range(200):
            st = random_state(rng, cfg)
            z_box = BBox.from_cxcywh(
                st.mean[0] + rng.uniform(-5, 5),
                st.mean[1] + rng.uniform(-5, 5),
                max(st.mean[2] + rng.uniform(-3, 3), 2.0),
                max(st.mean[3] + rng.uniform(-3, 3), 2.0),
            )
            got = update(st, z_box, 1.0, cfg)
            h = max(st.mean[3], 1.0)
            r = np.full(4, (cfg.sigma_meas * h) ** 2)
            want_mean, want_cov = textbook_kalman_update(
                st.mean, st.covariance, z_box.to_cxcywh(), r
            )
            assert np.allclose(got.mean, want_mean, rtol=1e-9, atol=1e-9)
            assert np.allclose(got.covariance, want_cov, rtol=1e-9, atol=1e-9)

    def test_huge_alpha_keeps_prior(self):
        cfg = NoiseConfig()
        st = predict(initiate(BBox(100, 100, 40, 80), cfg), cfg)
        out = update(st, BBox(160, 160, 40, 80), 1e9, cfg)
        assert np.max(np.abs(out.mean[:2] - st.mean[:2])) <= 1e-3

    def test_tiny_alpha_snaps_to_measurement(self):
        cfg = NoiseConfig()
        st = predict(initiate(BBox(100, 100, 40, 80), cfg), cfg)
        z = BBox(160, 160, 40, 80)
        out = update(st, z, 1e-9, cfg)
        assert np.max(np.abs(out.mean[:2] - z.to_cxcywh()[:2])) <= 1e-3

    def test_posterior_trace_never_grows(self):
        rng = np.random.default_rng(46)
        cfg = NoiseConfig()
        for _ in range(50):
            st = random_state(rng, cfg)
            alpha = float(10.0 ** rng.uniform(-3, 3))
            z = BBox.from_cxcywh(st.mean[0], st.mean[1], st.mean[2], st.mean[3])
            out = update(st, z, alpha, cfg)
            assert np.trace(out.covariance) <= np.trace(st.covariance) + 1e-9

    def test_posterior_spd_and_symmetric(self):
        rng = np.random.default_rng(47)
        cfg = NoiseConfig()
        for _ in range(30):
            st = random_state(rng, cfg)
            out = update(st, state_box(st), float(10.0 ** rng.uniform(-6, 6)), cfg)
            assert np.max(np.abs(out.covariance - out.covariance.T)) <= 1e-9
            np.linalg.cholesky(out.covariance)

    def test_position_between_prior_and_measurement(self):
        rng = np.random.default_rng(48)
        cfg = NoiseConfig()
        for _ in range(40):
            st = random_state(rng, cfg)
            z = BBox.from_cxcywh(
                st.mean[0] + rng.uniform(-20, 20),
                st.mean[1] + rng.uniform(-20, 20),
                st.mean[2],
                st.mean[3],
            )
            out = update(st, z, float(10.0 ** rng.uniform(-2, 2)), cfg)
            for k in range(2):
                lo = min(st.mean[k], z.to_cxcywh()[k]) - 1e-9
                hi = max(st.mean[k], z.to_cxcywh()[k]) + 1e-9
                assert lo <= out.mean[k] <= hi

    def test_alpha_validation(self):
        cfg = NoiseConfig()
        st = initiate(BBox(0, 0, 10, 10), cfg)
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(ValueError):
                update(st, BBox(0, 0, 10, 10), bad, cfg)

    def test_degenerate_covariance_reported(self):
        st = KalmanState(np.array([0, 0, 10, 10, 0, 0, 0, 0], dtype=float), -1e6 * np.eye(8))
        with pytest.raises(DegenerateFilterError):
            update(st, BBox(0, 0, 10, 10), 1e-9, NoiseConfig())


class TestStateBox:
    def test_round_trip(self):
        st = KalmanState(np.array([25, 40, 30, 40, 0, 0, 0, 0], dtype=float), np.eye(8))
        assert state_box(st) == BBox(10, 20, 30, 40)

    def test_clamps_size(self):
        st = KalmanState(np.array([0, 0, 0.2, 0.3, 0, 0, 0, 0], dtype=float), np.eye(8))
        b = state_box(st)
        assert b.w == 1.0 and b.h == 1.0
