"""
Prediction-model tests: impulse responses, noise families, realizations,
prediction queries and correlation metrics.
"""

import numpy as np
import pytest

from socopredict.core import build_spec
from socopredict.errors import (
    ConvergenceError, DimensionError, InconsistentImpulseError, NoiseSpecError,
)
from socopredict.prediction import (
    big_F, fw_norm_sq, fw_unweighted_sq, iid_impulse, impulse_from_taps, kalman_impulse,
    make_noise, mc_error_covariance, mix_seed, predict_at, predict_window, realize,
    sample_innovations, wiener_impulse,
)


def scalar_realization(taps, e, y_hat=None):
    f = impulse_from_taps(taps)
    T = len(e)
    y_hat = [0.0] * T if y_hat is None else y_hat
    return f, realize(f, make_noise("gaussian", [[1.0]]), y_hat, seed=0, innovations=e)


# ===== Impulse responses =====

class TestImpulse:
    def test_explicit_taps(self):
        f = impulse_from_taps([1.0, 0.5, 0.25])
        assert f.length == 2 and f.m == 1
        assert f.tap(1)[0, 0] == 0.5
        assert f.tap(7)[0, 0] == 0.0

    def test_first_tap_must_be_identity(self):
        with pytest.raises(InconsistentImpulseError):
            impulse_from_taps([0.9, 0.5])

    def test_window_pads_with_zeros(self):
        f = impulse_from_taps([1.0, 0.5])
        assert f.scalar_taps(3).tolist() == [1.0, 0.5, 0.0, 0.0]

    def test_iid(self):
        f = iid_impulse(2)
        assert f.length == 0
        assert np.array_equal(f.tap(0), np.eye(2))


class TestWiener:
    def test_taps_from_covariances(self):
        f = wiener_impulse([2.0, 1.0, 0.5], [[2.0]])
        assert f.scalar_taps(2) == pytest.approx([1.0, 0.5, 0.25])

    def test_inconsistent_first_tap(self):
        with pytest.raises(InconsistentImpulseError):
            wiener_impulse([3.0, 1.0], [[2.0]])

    def test_explicit_length(self):
        f = wiener_impulse([1.0, 0.5], [[1.0]], L=4)
        assert f.length == 4
        assert f.scalar_taps(4).tolist() == [1.0, 0.5, 0.0, 0.0, 0.0]

    def test_decay_trims_trailing_zeros(self):
        f = wiener_impulse([1.0, 0.5, 0.0, 0.0], [[1.0]])
        assert f.length == 1


class TestKalman:
    """Steady-state Riccati predictor."""

    def test_scalar_ar1(self):
        f, R_e = kalman_impulse([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[0.0]], [[0.0]])
        assert R_e[0, 0] == pytest.approx(1.0, abs=1e-9)
        taps = f.scalar_taps(4)
        assert taps == pytest.approx([1.0, 0.5, 0.25, 0.125, 0.0625], abs=1e-9)

    def test_default_length_reaches_decay_tolerance(self):
        f, _ = kalman_impulse([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[0.0]], [[0.0]])
        assert 30 < f.length < 50
        assert abs(f.taps[-1, 0, 0]) >= 1e-12

    def test_no_coupling_gives_iid(self):
        f, R_e = kalman_impulse([[0.5]], [[1.0]], [[0.0]], [[1.0]], [[1.0]], [[0.0]])
        assert f.length == 0
        assert R_e[0, 0] == pytest.approx(1.0)

    def test_unstable_rejected(self):
        with pytest.raises(ConvergenceError):
            kalman_impulse([[1.5]], [[1.0]], [[1.0]], [[1.0]], [[0.0]], [[0.0]])

    def test_explicit_length(self):
        f, _ = kalman_impulse([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[0.0]], [[0.0]], L=3)
        assert f.length == 3


# ===== Noise =====

class TestNoise:
    def test_gaussian_requires_pd(self):
        with pytest.raises(NoiseSpecError):
            make_noise("gaussian", [[1.0, 2.0], [2.0, 1.0]])

    def test_unknown_family(self):
        with pytest.raises(NoiseSpecError):
            make_noise("cauchy", [[1.0]])

    def test_uniform_needs_epsilon(self):
        with pytest.raises(NoiseSpecError):
            make_noise("uniform-bounded", [[1.0 / 3.0]])

    def test_uniform_variance_must_match(self):
        with pytest.raises(NoiseSpecError):
            make_noise("uniform-bounded", [[1.0]], epsilon=1.0)

    def test_uniform_draws_bounded(self):
        noise = make_noise("uniform-bounded", [[1.0 / 3.0]], epsilon=1.0)
        e, rate = sample_innovations(noise, 11, 2000)
        assert np.all(np.abs(e) < 1.0)
        assert rate == 1.0

    def test_truncated_covariance_shrinks(self):
        """Truncation lowers the innovation variance below the parent's."""
        noise = make_noise("truncated-gaussian", [[1.0]], epsilon=1.0)
        assert 0.0 < noise.sigma2 < 1.0
        e, rate = sample_innovations(noise, 5, 2000)
        assert np.all(np.abs(e) < 1.0)
        assert 0.5 < rate < 0.8

    def test_truncated_requires_diagonal(self):
        with pytest.raises(NoiseSpecError):
            make_noise("truncated-gaussian", [[1.0, 0.1], [0.1, 1.0]], epsilon=1.0)

    def test_zero_family(self):
        noise = make_noise("zero", [[0.0]])
        e, _ = sample_innovations(noise, 1, 5)
        assert np.all(e == 0.0)
        assert noise.sigma2 == 0.0

    def test_sample_covariance(self):
        cov = [[2.0, 0.5], [0.5, 1.0]]
        e, _ = sample_innovations(make_noise("gaussian", cov), 21, 20000)
        assert np.allclose(np.cov(e.T), cov, atol=0.1)


# ===== Realization =====

class TestRealize:
    """Seeded realizations are reproducible."""

    def test_injected_innovations(self):
        _, r = scalar_realization([1.0, 0.5], [1.0, 0.0, 0.0], y_hat=[1.0, 1.0, 1.0])
        assert r.y[:, 0].tolist() == [2.0, 1.5, 1.0]

    def test_deterministic(self):
        f, noise = iid_impulse(), make_noise("gaussian", [[1.0]])
        a = realize(f, noise, [0.0] * 6, seed=99)
        b = realize(f, noise, [0.0] * 6, seed=99)
        assert np.array_equal(a.y, b.y)

    def test_innovation_depends_only_on_seed_and_time(self):
        """e_t is the same whatever the horizon."""
        f, noise = iid_impulse(), make_noise("gaussian", [[1.0]])
        short = realize(f, noise, [0.0] * 5, seed=7)
        long = realize(f, noise, [0.0] * 10, seed=7)
        assert np.array_equal(short.innovations, long.innovations[:5])

    def test_different_seeds_differ(self):
        f, noise = iid_impulse(), make_noise("gaussian", [[1.0]])
        a = realize(f, noise, [0.0] * 4, seed=1)
        b = realize(f, noise, [0.0] * 4, seed=2)
        assert not np.array_equal(a.innovations, b.innovations)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            realize(iid_impulse(2), make_noise("gaussian", [[1.0]]), [0.0] * 3, seed=0)

    def test_injected_length_mismatch(self):
        with pytest.raises(DimensionError):
            realize(iid_impulse(), make_noise("gaussian", [[1.0]]), [0.0] * 3, seed=0,
                    innovations=[1.0, 2.0])

    def test_mix_seed_is_stable(self):
        assert mix_seed(42, 0) == mix_seed(42, 0)
        assert mix_seed(42, 0) != mix_seed(42, 1)
        assert 0 <= mix_seed(2 ** 64 - 1, 3) < 2 ** 64


# ===== Predictions =====

class TestPredict:
    """Forward and convolution prediction routes."""

    def test_time_zero_is_y_hat(self):
        f, r = scalar_realization([1.0, 0.5], [1.0, -1.0, 2.0], y_hat=[3.0, 2.0, 1.0])
        assert np.array_equal(predict_at(r, f, 0), r.y_hat)

    def test_one_step_error_is_innovation(self):
        f, r = scalar_realization([1.0, 0.5, 0.25], [1.0, -1.0, 2.0, 0.5])
        for tau in range(4):
            pred = predict_at(r, f, tau)
            assert pred[0, 0] == pytest.approx(r.y[tau, 0] - r.innovations[tau, 0])

    def test_forward_matches_backward(self):
        """Forward recursion and direct convolution agree."""
        f = impulse_from_taps([1.0, 0.7, -0.3, 0.2])
        noise = make_noise("gaussian", [[1.0]])
        r = realize(f, noise, np.linspace(0, 1, 9), seed=4)
        for tau in range(9):
            fwd = predict_at(r, f, tau, route="forward")
            bwd = predict_at(r, f, tau, route="backward")
            assert np.allclose(fwd, bwd, atol=1e-12)

    def test_vector_forward_matches_backward(self):
        taps = np.array([np.eye(2), [[0.5, 0.1], [0.0, 0.3]]])
        f = impulse_from_taps(taps)
        r = realize(f, make_noise("gaussian", np.eye(2)), np.zeros((6, 2)), seed=8)
        for tau in range(6):
            assert np.allclose(predict_at(r, f, tau), predict_at(r, f, tau, "backward"), atol=1e-12)

    def test_window_is_truncated(self):
        f, r = scalar_realization([1.0, 0.5], [1.0, 1.0, 1.0, 1.0])
        assert predict_window(r, f, 1, 3).shape == (2, 1)

    def test_tau_out_of_range(self):
        f, r = scalar_realization([1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            predict_at(r, f, 2)

    def test_unknown_route(self):
        f, r = scalar_realization([1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            predict_at(r, f, 0, route="sideways")


# ===== Correlation metrics =====

class TestMetrics:
    def test_fw_norm_iid(self):
        noise = make_noise("gaussian", [[2.0]])
        assert fw_norm_sq(iid_impulse(), noise, 3) == pytest.approx(2.0)

    def test_fw_norm_taps(self):
        f = impulse_from_taps([1.0, 0.5])
        noise = make_noise("gaussian", [[1.0]])
        assert fw_norm_sq(f, noise, 0) == pytest.approx(1.0)
        assert fw_norm_sq(f, noise, 5) == pytest.approx(1.25)

    def test_fw_unweighted(self):
        f = impulse_from_taps([1.0, 0.5])
        assert fw_unweighted_sq(f, 1) == pytest.approx(1.25)

    def test_big_F_iid(self):
        spec = build_spec([[1.0]], 1.0, 10)
        assert big_F(iid_impulse(), make_noise("gaussian", [[1.0]]), spec.ops, 4) == pytest.approx(5.0)

    def test_big_F_ones(self):
        f = impulse_from_taps([1.0, 1.0])
        assert big_F(f, make_noise("gaussian", [[1.0]]), None, 1) == pytest.approx(3.0)

    def test_big_F_projects(self):
        spec = build_spec([[1.0], [0.0]], 1.0, 5)
        noise = make_noise("gaussian", np.eye(2))
        assert big_F(iid_impulse(2), noise, spec.ops, 0) == pytest.approx(1.0)
        assert big_F(iid_impulse(2), noise, None, 0) == pytest.approx(2.0)

    def test_negative_w(self):
        with pytest.raises(ValueError):
            fw_norm_sq(iid_impulse(), make_noise("gaussian", [[1.0]]), -1)

    def test_mc_matches_increment_of_F(self):
        f = impulse_from_taps([1.0, 0.5])
        noise = make_noise("gaussian", [[1.0]])
        est = mc_error_covariance(f, noise, 1, 20000, seed=3)
        exact = big_F(f, noise, None, 1) - big_F(f, noise, None, 0)
        assert exact == pytest.approx(1.25)
        assert abs(est.mean - exact) <= 4 * est.stderr

    def test_mc_projected(self):
        spec = build_spec([[1.0], [0.0]], 1.0, 5)
        noise = make_noise("gaussian", np.eye(2))
        est = mc_error_covariance(iid_impulse(2), noise, 0, 20000, seed=5, ops=spec.ops)
        assert abs(est.mean - 1.0) <= 4 * est.stderr
