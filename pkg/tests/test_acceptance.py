"""
Desk-scale statistical acceptance runs. Sample counts are reduced; run the
full-size experiments through `soco montecarlo --check` and `soco tail --check`.
"""

import numpy as np
import pytest

from socopredict.algorithms import run_fhc, run_open, run_opt, run_rhc
from socopredict.core import build_spec
from socopredict.harness import (
    acceptance_checks, parse_config, run_experiment, tail_experiment, tail_checks, write_outputs,
)
from socopredict.prediction import iid_impulse, make_noise, realize

pytestmark = pytest.mark.slow


def scalar_iid_config(samples, **overrides):
    data = {
        "spec": {"K": [[1.0]], "beta": 1.0, "T": 240},
        "impulse": {"kind": "iid"},
        "noise": {"family": "gaussian", "R_e": 1.0},
        "y_hat": {"kind": "constant", "value": 0.0},
        "algorithms": [{"name": "AFHC", "w": 4}],
        "samples": samples,
        "seed": 2024,
        "output": "out/acceptance",
    }
    data.update(overrides)
    return parse_config(data)


class TestMonteCarlo:
    """Reduced-size statistical runs of the full harness."""

    def test_reference_instance(self):
        result = run_experiment(scalar_iid_config(400), workers=1)
        assert not result.aborted
        assert acceptance_checks(result) == []
        assert result.bounds[4].V * 240 == pytest.approx(312.0)

    def test_decomposition_every_sample(self):
        config = scalar_iid_config(
            100,
            spec={"K": [[1.0]], "beta": 1.0, "T": 120},
            impulse={"kind": "explicit", "taps": [[[1.0]], [[0.5]], [[0.25]]]},
            algorithms=[{"name": "AFHC", "w": 1}, {"name": "AFHC", "w": 3},
                        {"name": "AFHC", "w": 7}],
        )
        result = run_experiment(config, workers=1)
        assert all(o.decomposition_ok and o.jensen_ok for o in result.completed)

    def test_colored_noise_g2_mean(self):
        """Colored taps at T=40: the g2 mean matches the edge-corrected expectation."""
        config = scalar_iid_config(
            3000,
            spec={"K": [[1.0]], "beta": 1.0, "T": 40},
            impulse={"kind": "explicit", "taps": [[[1.0]], [[1.0]], [[1.0]]]},
            algorithms=[{"name": "AFHC", "w": 3}],
            seed=7,
        )
        result = run_experiment(config, workers=1)
        assert result.bounds[3].g2_expected == pytest.approx(44.125)
        assert acceptance_checks(result) == []

    def test_tail(self):
        config = scalar_iid_config(
            300,
            spec={"K": [[1.0]], "beta": 1.0, "T": 120},
            noise={"family": "uniform-bounded", "epsilon": 1.0},
            algorithms=[{"name": "AFHC", "w": 3}],
        )
        _, rows = tail_experiment(config, [5.0 * i for i in range(21)], workers=1)
        assert tail_checks(rows) == []

    def test_reproducible_across_workers(self, tmp_path):
        config = scalar_iid_config(16, spec={"K": [[1.0]], "beta": 1.0, "T": 60})
        serial = write_outputs(run_experiment(config, workers=1), str(tmp_path / "one"))
        pooled = write_outputs(run_experiment(config, workers=4), str(tmp_path / "four"))
        for a, b in zip(serial, pooled):
            with open(a, "rb") as fa, open(b, "rb") as fb:
                assert fa.read() == fb.read()


class TestPerfectLookahead:
    """Zero noise with a window covering the horizon recovers OPT."""

    def test_random_instances(self):
        rng = np.random.default_rng(17)
        f = iid_impulse(1)
        noise = make_noise("zero", [[0.0]])
        for _ in range(20):
            T = int(rng.integers(2, 12))
            spec = build_spec([[float(rng.uniform(0.5, 2.0))]], float(rng.uniform(0.0, 2.0)), T)
            r = realize(f, noise, rng.normal(scale=2.0, size=T), 0)
            opt = run_opt(r, spec).cost.total
            w = T - 1
            assert run_fhc(0, w, r, spec, f).cost.total == pytest.approx(opt, abs=1e-6)
            assert run_open(r, spec, f).cost.total == pytest.approx(opt, abs=1e-6)
            assert run_rhc(w, r, spec, f).cost.total == pytest.approx(opt, abs=1e-6)
