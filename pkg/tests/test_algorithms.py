"""
Algorithm tests: FHC window tiling, the online policies, offline references,
causality, and perfect-lookahead consistency.
"""

import numpy as np
import pytest

from socopredict.algorithms import (
    AFHC, FHC, OPEN, RHC, STA, Window, fhc_windows, run_afhc, run_algorithm,
    run_fhc, run_open, run_opt, run_rhc, run_sta,
)
from socopredict.core import build_spec
from socopredict.errors import DimensionError, WindowSolveError
from socopredict.prediction import impulse_from_taps, iid_impulse, make_noise, realize
from socopredict.solver import SolveResult, SolverSettings, WindowProblem, solve_window


def spans(windows):
    return [(win.start, win.end) for win in windows]


def world(f, noise, T, seed=0, y_hat=None):
    if y_hat is None:
        y_hat = np.sin(np.arange(1, T + 1) / 2.0)
    return realize(f, noise, y_hat, seed)


# ===== Window tiling =====

class TestWindows:
    """Window tiling for each FHC copy."""

    def test_k0_examples(self):
        assert spans(fhc_windows(0, 1, 4)) == [(1, 2), (3, 4)]
        assert spans(fhc_windows(0, 2, 4)) == [(1, 3), (4, 4)]

    def test_truncated_first_window(self):
        """k >= 1 commits steps 1..k from the time-zero predictions first."""
        assert spans(fhc_windows(1, 1, 4)) == [(1, 1), (2, 3), (4, 4)]
        assert spans(fhc_windows(2, 2, 7)) == [(1, 2), (3, 5), (6, 7)]

    def test_partition(self):
        for T in range(1, 9):
            for w in range(0, 5):
                for k in range(w + 1):
                    steps = [t for win in fhc_windows(k, w, T) for t in range(win.start, win.end + 1)]
                    assert steps == list(range(1, T + 1))

    def test_window_length_bounded(self):
        assert all(len(win) <= 4 for win in fhc_windows(2, 3, 20))

    def test_pred_time(self):
        assert Window(3, 5).pred_time == 2

    def test_short_horizon(self):
        assert spans(fhc_windows(3, 3, 2)) == [(1, 2)]

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            fhc_windows(2, 1, 4)
        with pytest.raises(ValueError):
            fhc_windows(0, -1, 4)


# ===== Online policies =====

class TestFHC:
    """Fixed horizon control: window commits and labels."""

    def test_perfect_lookahead_matches_opt(self, scalar_spec, iid, zero_noise):
        r = world(iid, zero_noise, scalar_spec.horizon)
        fhc = run_fhc(0, scalar_spec.horizon - 1, r, scalar_spec, iid)
        opt = run_opt(r, scalar_spec)
        assert np.allclose(fhc.actions, opt.actions, atol=1e-9)
        assert fhc.cost.total == pytest.approx(opt.cost.total, abs=1e-6)

    def test_truncated_copies_never_beat_opt(self, scalar_spec, iid, zero_noise):
        """The truncated first window costs at least as much as OPT."""
        r = world(iid, zero_noise, scalar_spec.horizon)
        opt = run_opt(r, scalar_spec)
        w = scalar_spec.horizon - 1
        for k in range(1, w + 1):
            assert run_fhc(k, w, r, scalar_spec, iid).cost.total >= opt.cost.total - 1e-9

    def test_zero_beta_copies_all_match_opt(self, iid, zero_noise):
        """Without switching cost every copy separates per step."""
        spec = build_spec([[1.0]], 0.0, 6)
        r = world(iid, zero_noise, 6)
        for k in range(6):
            assert run_fhc(k, 5, r, spec, iid).cost.total == pytest.approx(0.0, abs=1e-12)

    def test_myopic_window(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon, seed=3)
        run = run_fhc(0, 0, r, scalar_spec, iid)
        x_prev = np.zeros(1)
        for t in range(scalar_spec.horizon):
            step = solve_window(WindowProblem(r.y_hat[t:t + 1], x_prev, scalar_spec))
            assert run.actions[t] == pytest.approx(step.actions[0])
            x_prev = run.actions[t]

    def test_label(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon)
        run = run_fhc(2, 3, r, scalar_spec, iid)
        assert run.label == "FHC(2)"
        assert (run.w, run.k) == (3, 2)

    def test_horizon_mismatch(self, iid, unit_noise):
        spec = build_spec([[1.0]], 1.0, 5)
        r = world(iid, unit_noise, 6)
        with pytest.raises(DimensionError):
            run_fhc(0, 1, r, spec, iid)

    def test_window_failure_is_wrapped(self):
        spec = build_spec(np.eye(2), 1.0, 3)
        f = iid_impulse(2)
        r = realize(f, make_noise("gaussian", np.eye(2)), np.ones((3, 2)), 0)
        with pytest.raises(WindowSolveError) as info:
            run_fhc(0, 1, r, spec, f, SolverSettings(method="dp"))
        assert info.value.window_start == 1
        assert isinstance(info.value.cause, DimensionError)


class TestCausality:
    """Actions up to t never depend on innovations after t."""

    @pytest.mark.parametrize("policy", ["fhc", "afhc", "rhc"])
    def test_future_innovations_do_not_move_past_actions(self, policy, unit_noise):
        spec = build_spec([[1.0]], 0.5, 10)
        f = impulse_from_taps([[[1.0]], [[0.6]], [[0.3]]])
        base = world(f, unit_noise, 10, seed=7)
        run = {
            "fhc": lambda r: run_fhc(1, 3, r, spec, f),
            "afhc": lambda r: run_afhc(3, r, spec, f),
            "rhc": lambda r: run_rhc(3, r, spec, f),
        }[policy]
        reference = run(base).actions
        rng = np.random.default_rng(1)
        for t in range(1, 10):
            e = np.array(base.innovations)
            e[t:] += rng.normal(size=(10 - t, 1))
            moved = realize(f, unit_noise, base.y_hat, base.seed, innovations=e)
            assert np.array_equal(run(moved).actions[:t], reference[:t])


class TestAFHC:
    """Averaging of the w+1 FHC copies."""

    def test_single_copy_is_fhc0(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon, seed=2)
        afhc = run_afhc(0, r, scalar_spec, iid)
        fhc = run_fhc(0, 0, r, scalar_spec, iid)
        assert np.array_equal(afhc.actions, fhc.actions)
        assert afhc.cost.total == fhc.cost.total

    def test_jensen(self, unit_noise):
        """Averaging never costs more than the mean of the copies."""
        spec = build_spec([[1.0]], 0.8, 15)
        f = impulse_from_taps([[[1.0]], [[0.5]]])
        for seed in range(10):
            r = world(f, unit_noise, 15, seed=seed)
            afhc = run_afhc(3, r, spec, f)
            mean_fhc = np.mean([c.cost.total for c in afhc.components])
            assert afhc.cost.total <= mean_fhc + 1e-9

    def test_components(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon)
        afhc = run_afhc(2, r, scalar_spec, iid)
        assert [c.k for c in afhc.components] == [0, 1, 2]
        mean = np.mean([c.actions for c in afhc.components], axis=0)
        assert np.allclose(afhc.actions, mean)

    def test_zero_beta_perfect_lookahead(self, iid, zero_noise):
        spec = build_spec([[1.0]], 0.0, 5)
        r = world(iid, zero_noise, 5)
        assert run_afhc(4, r, spec, iid).cost.total == pytest.approx(0.0, abs=1e-12)


class TestRHC:
    """Receding horizon baseline."""

    def test_perfect_lookahead_matches_opt(self, scalar_spec, iid, zero_noise):
        r = world(iid, zero_noise, scalar_spec.horizon)
        rhc = run_rhc(scalar_spec.horizon - 1, r, scalar_spec, iid)
        assert rhc.cost.total == pytest.approx(run_opt(r, scalar_spec).cost.total, abs=1e-6)

    def test_myopic_equals_fhc0(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon, seed=5)
        rhc = run_rhc(0, r, scalar_spec, iid)
        fhc = run_fhc(0, 0, r, scalar_spec, iid)
        assert np.array_equal(rhc.actions, fhc.actions)

    def test_vector_warm_start(self, unit_noise):
        spec = build_spec([[2.0, 0.0], [0.5, 1.0]], 0.4, 6)
        f = iid_impulse(2)
        r = realize(f, make_noise("gaussian", np.eye(2)), np.ones((6, 2)), 4)
        run = run_rhc(2, r, spec, f)
        assert run.actions.shape == (6, 2)
        assert run.cost.total >= run_opt(r, spec).cost.total - 1e-9


# ===== Offline references =====

class TestOffline:
    """OPEN, OPT and STA."""

    def test_open_example(self, iid):
        spec = build_spec([[1.0]], 10.0, 2)
        r = realize(iid, make_noise("gaussian", [[1.0]]), [0.0, 0.0], 0, innovations=[1.0, 1.0])
        run = run_open(r, spec, iid)
        assert run.actions[:, 0] == pytest.approx([0.0, 0.0], abs=1e-12)
        assert run.cost.total == pytest.approx(1.0)

    def test_open_perfect_information(self, scalar_spec, iid, zero_noise):
        r = world(iid, zero_noise, scalar_spec.horizon)
        assert run_open(r, scalar_spec, iid).cost.total == pytest.approx(
            run_opt(r, scalar_spec).cost.total, abs=1e-6)

    def test_static_example(self, iid, zero_noise):
        spec = build_spec([[1.0]], 0.5, 4)
        r = realize(iid, zero_noise, [1.0, 0.0, 1.0, 0.0], 0)
        run = run_sta(r, spec)
        assert run.actions[:, 0] == pytest.approx([0.375] * 4)
        assert run.cost.total == pytest.approx(0.71875)

    def test_opt_is_best(self, unit_noise):
        spec = build_spec([[1.0]], 0.7, 10)
        f = impulse_from_taps([[[1.0]], [[0.5]]])
        for seed in range(5):
            r = world(f, unit_noise, 10, seed=seed)
            opt = run_opt(r, spec).cost.total
            assert opt <= run_sta(r, spec).cost.total + 1e-9
            for run in (run_afhc(2, r, spec, f), run_open(r, spec, f), run_rhc(2, r, spec, f)):
                assert opt <= run.cost.total + 1e-9


class TestDispatch:
    def test_names(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon)
        assert run_algorithm(FHC, r, scalar_spec, iid, w=2, k=1).label == "FHC(1)"
        assert run_algorithm(AFHC, r, scalar_spec, iid, w=2).name == AFHC
        assert run_algorithm(RHC, r, scalar_spec, iid, w=2).name == RHC
        assert run_algorithm(OPEN, r, scalar_spec, iid).name == OPEN
        assert run_algorithm(STA, r, scalar_spec, iid).name == STA

    def test_unknown(self, scalar_spec, iid, unit_noise):
        r = world(iid, unit_noise, scalar_spec.horizon)
        with pytest.raises(ValueError):
            run_algorithm("LCP", r, scalar_spec, iid)
