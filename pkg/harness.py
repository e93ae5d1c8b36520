"""
socopredict harness
Experiment orchestration: JSON configuration, seeded Monte Carlo runs,
window sweeps, empirical tails and CSV/JSON output.

Sample i of an experiment draws its realization from
mix_seed(config.seed, i), so every output byte is a function of the config
alone, however many workers (SOCO_THREADS) run the samples.

Config file:
    {
      "spec":       {"K": [[1.0]], "beta": 1.0, "T": 240},
      "impulse":    {"kind": "iid"},
      "noise":      {"family": "gaussian", "R_e": 1.0},
      "y_hat":      {"kind": "constant", "value": 0.0},
      "algorithms": [{"name": "AFHC", "w": 4}],
      "samples": 10000, "seed": 42, "output": "out/iid"
    }

Usage:
    config = load_config("iid.json")
    result = run_experiment(config)
    write_outputs(result, config.output)
"""

from __future__ import annotations
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import repeat
from typing import Any, Dict, List, Optional, Sequence, Tuple
import csv
import json
import logging
import math
import multiprocessing
import os

import numpy as np

from .algorithms import AFHC, ALGORITHMS, FHC, ONLINE, OPT, STA, run_algorithm, run_opt, run_sta
from .analysis import (
    BoundReport, G1G2, MetricRecord, as_probability, bound_report, conc_tail_bound,
    decompose_g1_g2, jensen_gap, metric_record,
)
from .core import ProblemSpec, build_spec
from .errors import ConfigError, SocoError, UnboundedNoiseError, unknown_name_hint
from .prediction import (
    GAUSSIAN, NOISE_FAMILIES, UNIFORM, ZERO, ImpulseResponse, NoiseSpec, impulse_from_taps,
    iid_impulse, kalman_impulse, make_noise, mix_seed, realize, wiener_impulse,
)
from .solver import METHODS, SolverSettings, describe_failure
from . import stats

logger = logging.getLogger(__name__)

IMPULSE_KINDS = ["iid", "explicit", "wiener", "kalman"]
Y_HAT_KINDS = ["constant", "sinusoid", "alternating", "explicit"]
CSV_COLUMNS = ["sample", "seed", "algorithm", "w", "cost_total", "cost_tracking",
               "cost_switching", "cost_opt", "cost_sta", "regret", "comp_diff", "g1", "g2"]
MAX_ABORT_FRACTION = 0.001
DECOMPOSITION_SLACK = 1e-6
JENSEN_SLACK = 1e-9
SEED_LIMIT = 1 << 64


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpecConfig:
    K: Tuple[Tuple[float, ...], ...]
    beta: float
    T: int


@dataclass(frozen=True)
class ImpulseConfig:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseConfig:
    family: str
    R_e: Optional[Any] = None
    epsilon: Optional[float] = None


@dataclass(frozen=True)
class YHatConfig:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str
    w: Optional[int] = None
    k: Optional[int] = None

    def to_dict(self) -> dict:
        out: Dict[str, Any] = {"name": self.name}
        if self.w is not None:
            out["w"] = self.w
        if self.k is not None:
            out["k"] = self.k
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    spec: SpecConfig
    impulse: ImpulseConfig
    noise: NoiseConfig
    y_hat: YHatConfig
    algorithms: Tuple[AlgorithmConfig, ...]
    samples: int
    seed: int
    output: str
    solver: SolverSettings = SolverSettings()

    def to_dict(self) -> dict:
        """Resolved config echo; parse_config(to_dict()) == self."""
        noise: Dict[str, Any] = {"family": self.noise.family}
        if self.noise.R_e is not None:
            noise["R_e"] = self.noise.R_e
        if self.noise.epsilon is not None:
            noise["epsilon"] = self.noise.epsilon
        return {
            "spec": {"K": self.spec.K, "beta": self.spec.beta, "T": self.spec.T},
            "impulse": {"kind": self.impulse.kind, **self.impulse.params},
            "noise": noise,
            "y_hat": {"kind": self.y_hat.kind, **self.y_hat.params},
            "algorithms": [a.to_dict() for a in self.algorithms],
            "samples": self.samples,
            "seed": self.seed,
            "output": self.output,
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter,
                       "method": self.solver.method},
        }

    def with_samples(self, samples: int) -> ExperimentConfig:
        if samples < 1:
            raise ConfigError("samples", f"must be >= 1, got {samples}")
        return replace(self, samples=samples)


def _check_keys(data: dict, allowed: List[str], path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    for key in data:
        if key not in allowed:
            raise ConfigError(_join(path, key), unknown_name_hint("key", key, allowed))


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _require(data: dict, key: str, path: str) -> Any:
    if key not in data:
        raise ConfigError(_join(path, key), "is required")
    return data[key]


def _number(value: Any, path: str, minimum: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum:g}, got {value:g}")
    return value


def _integer(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _float_tree(value: Any, path: str) -> Any:
    """Nested lists of numbers -> nested tuples of floats."""
    if isinstance(value, (list, tuple)):
        return tuple(_float_tree(v, f"{path}[{i}]") for i, v in enumerate(value))
    return _number(value, path)


def _choice(value: Any, choices: List[str], what: str, path: str) -> str:
    if not isinstance(value, str) or value not in choices:
        raise ConfigError(path, unknown_name_hint(what, str(value), choices))
    return value


def _parse_spec(data: dict) -> SpecConfig:
    _check_keys(data, ["K", "beta", "T"], "spec")
    K = _float_tree(_require(data, "K", "spec"), "spec.K")
    if not isinstance(K, tuple) or not K:
        raise ConfigError("spec.K", "expected a nonempty matrix")
    if not isinstance(K[0], tuple):
        K = (K,)
    widths = {len(row) if isinstance(row, tuple) else -1 for row in K}
    if len(widths) != 1 or widths == {-1} or widths == {0}:
        raise ConfigError("spec.K", "rows must be nonempty lists of equal length")
    beta = _number(_require(data, "beta", "spec"), "spec.beta", minimum=0.0)
    T = _integer(_require(data, "T", "spec"), "spec.T", minimum=1)
    return SpecConfig(K, beta, T)


_IMPULSE_KEYS = {
    "iid": [],
    "explicit": ["taps"],
    "wiener": ["R_y", "R_e", "L"],
    "kalman": ["A", "B", "C", "Q", "R", "S", "L"],
}


def _parse_impulse(data: dict) -> ImpulseConfig:
    if not isinstance(data, dict):
        raise ConfigError("impulse", "expected an object")
    kind = _choice(_require(data, "kind", "impulse"), IMPULSE_KINDS, "impulse kind", "impulse.kind")
    _check_keys(data, ["kind"] + _IMPULSE_KEYS[kind], "impulse")
    params: Dict[str, Any] = {}
    for key in _IMPULSE_KEYS[kind]:
        if key == "L":
            if data.get("L") is not None:
                params["L"] = _integer(data["L"], "impulse.L", minimum=0)
            continue
        if kind == "kalman" and key == "S" and key not in data:
            continue
        params[key] = _float_tree(_require(data, key, "impulse"), f"impulse.{key}")
    return ImpulseConfig(kind, params)


def _parse_noise(data: dict) -> NoiseConfig:
    _check_keys(data, ["family", "R_e", "epsilon"], "noise")
    family = _choice(_require(data, "family", "noise"), NOISE_FAMILIES, "noise family", "noise.family")
    R_e = data.get("R_e")
    if R_e is not None:
        R_e = _float_tree(R_e, "noise.R_e")
    eps = data.get("epsilon")
    if eps is not None:
        eps = _number(eps, "noise.epsilon")
        if eps <= 0:
            raise ConfigError("noise.epsilon", f"must be > 0, got {eps:g}")
    return NoiseConfig(family, R_e, eps)


_Y_HAT_KEYS = {
    "constant": ["value"],
    "sinusoid": ["amplitude", "period", "offset", "phase"],
    "alternating": ["amplitude", "offset"],
    "explicit": ["values"],
}


def _parse_y_hat(data: dict) -> YHatConfig:
    if not isinstance(data, dict):
        raise ConfigError("y_hat", "expected an object")
    kind = _choice(_require(data, "kind", "y_hat"), Y_HAT_KINDS, "y_hat kind", "y_hat.kind")
    _check_keys(data, ["kind"] + _Y_HAT_KEYS[kind], "y_hat")
    params = {k: _float_tree(v, f"y_hat.{k}") for k, v in data.items() if k != "kind"}
    required = {"constant": ["value"], "sinusoid": ["amplitude", "period"],
                "alternating": ["amplitude"], "explicit": ["values"]}[kind]
    for key in required:
        _require(data, key, "y_hat")
    if kind == "sinusoid" and params["period"] <= 0:
        raise ConfigError("y_hat.period", "must be > 0")
    return YHatConfig(kind, params)


def _parse_algorithms(items: Any, T: int) -> Tuple[AlgorithmConfig, ...]:
    if not isinstance(items, list) or not items:
        raise ConfigError("algorithms", "expected a nonempty list")
    out = []
    for i, item in enumerate(items):
        path = f"algorithms[{i}]"
        _check_keys(item, ["name", "w", "k"], path)
        name = _choice(_require(item, "name", path), ALGORITHMS, "algorithm", f"{path}.name")
        w = k = None
        if name in ONLINE:
            w = _integer(_require(item, "w", path), f"{path}.w", minimum=0)
            if w > T - 1:
                raise ConfigError(f"{path}.w", f"must be <= T-1={T - 1}, got {w}")
        elif "w" in item:
            raise ConfigError(f"{path}.w", f"{name} takes no lookahead")
        if name == FHC:
            k = _integer(_require(item, "k", path), f"{path}.k", minimum=0)
            if k > w:
                raise ConfigError(f"{path}.k", f"must be <= w={w}, got {k}")
        elif "k" in item:
            raise ConfigError(f"{path}.k", "only FHC takes an offset k")
        out.append(AlgorithmConfig(name, w, k))
    return tuple(out)


def _parse_solver(data: dict) -> SolverSettings:
    _check_keys(data, ["tol", "max_iter", "method"], "solver")
    defaults = SolverSettings()
    tol = _number(data.get("tol", defaults.tol), "solver.tol")
    if tol <= 0:
        raise ConfigError("solver.tol", f"must be > 0, got {tol:g}")
    max_iter = _integer(data.get("max_iter", defaults.max_iter), "solver.max_iter", minimum=1)
    method = _choice(data.get("method", defaults.method), METHODS, "solver method", "solver.method")
    return SolverSettings(tol, max_iter, method)


def parse_config(data: dict) -> ExperimentConfig:
    _check_keys(data, ["spec", "impulse", "noise", "y_hat", "algorithms", "samples", "seed",
                       "output", "solver"], "")
    spec = _parse_spec(_require(data, "spec", ""))
    samples = _integer(_require(data, "samples", ""), "samples", minimum=1)
    seed = _integer(_require(data, "seed", ""), "seed", minimum=0)
    if seed >= SEED_LIMIT:
        raise ConfigError("seed", "must fit in 64 bits")
    output = _require(data, "output", "")
    if not isinstance(output, str) or not output:
        raise ConfigError("output", "expected a nonempty path prefix")
    return ExperimentConfig(
        spec=spec,
        impulse=_parse_impulse(_require(data, "impulse", "")),
        noise=_parse_noise(_require(data, "noise", "")),
        y_hat=_parse_y_hat(_require(data, "y_hat", "")),
        algorithms=_parse_algorithms(_require(data, "algorithms", ""), spec.T),
        samples=samples,
        seed=seed,
        output=output,
        solver=_parse_solver(data.get("solver", {})),
    )


def load_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError("", f"Config file not found: {path}")
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("", f"{path} is not valid JSON: {e}")
    return parse_config(data)


def worker_count() -> int:
    raw = os.environ.get("SOCO_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("SOCO_THREADS", f"expected a positive integer, got '{raw}'")
    if n < 1:
        raise ConfigError("SOCO_THREADS", f"expected a positive integer, got '{raw}'")
    return n


# ---------------------------------------------------------------------------
# Resolved experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Experiment:
    config: ExperimentConfig
    spec: ProblemSpec
    impulse: ImpulseResponse
    noise: NoiseSpec
    y_hat: np.ndarray


def _build_impulse(cfg: ImpulseConfig):
    p = cfg.params
    if cfg.kind == "iid":
        return None, None
    if cfg.kind == "explicit":
        return impulse_from_taps(np.array(p["taps"], dtype=float)), None
    if cfg.kind == "wiener":
        return wiener_impulse(np.array(p["R_y"], dtype=float), np.array(p["R_e"], dtype=float),
                              p.get("L")), None
    S = p.get("S")
    if S is None:
        S = np.zeros((np.atleast_2d(p["B"]).shape[1], np.atleast_2d(p["C"]).shape[0]))
    return kalman_impulse(p["A"], p["B"], p["C"], p["Q"], p["R"], S, p.get("L"))


def _build_noise(cfg: NoiseConfig, m: int, riccati_R_e: Optional[np.ndarray]) -> NoiseSpec:
    if riccati_R_e is not None:
        if cfg.family not in (GAUSSIAN, ZERO):
            raise ConfigError("noise.family", "a kalman impulse fixes R_e; use gaussian or zero noise")
        return make_noise(cfg.family, riccati_R_e, cfg.epsilon)
    if cfg.R_e is not None:
        cov = np.atleast_2d(np.array(cfg.R_e, dtype=float))
    elif cfg.family == UNIFORM and cfg.epsilon is not None:
        cov = np.eye(m) * cfg.epsilon ** 2 / 3.0
    elif cfg.family == ZERO:
        cov = np.zeros((m, m))
    else:
        raise ConfigError("noise.R_e", "is required")
    return make_noise(cfg.family, cov, cfg.epsilon)


def _build_y_hat(cfg: YHatConfig, T: int, m: int) -> np.ndarray:
    p = cfg.params
    t = np.arange(1, T + 1, dtype=float)
    if cfg.kind == "constant":
        return np.tile(np.broadcast_to(np.array(p["value"], dtype=float), (m,)), (T, 1))
    if cfg.kind == "sinusoid":
        wave = p.get("offset", 0.0) + p["amplitude"] * np.sin(2 * np.pi * t / p["period"] + p.get("phase", 0.0))
        return np.tile(wave.reshape(-1, 1), (1, m))
    if cfg.kind == "alternating":
        wave = p.get("offset", 0.0) + p["amplitude"] * np.where(t % 2 == 1, 1.0, -1.0)
        return np.tile(wave.reshape(-1, 1), (1, m))
    values = np.array(p["values"], dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.shape != (T, m):
        raise ConfigError("y_hat.values", f"expected shape ({T}, {m}), got {values.shape}")
    return values


def build_experiment(config: ExperimentConfig) -> Experiment:
    """Resolve a config into problem, impulse response, noise and predictions."""
    try:
        spec = build_spec(np.array(config.spec.K, dtype=float), config.spec.beta, config.spec.T)
    except (SocoError, ValueError) as e:
        raise ConfigError("spec", getattr(e, "message", str(e)))
    try:
        impulse, riccati_R_e = _build_impulse(config.impulse)
    except SocoError as e:
        raise ConfigError("impulse", e.message)
    if impulse is None:
        impulse = iid_impulse(spec.m)
    if impulse.m != spec.m:
        raise ConfigError("impulse", f"taps are {impulse.m}x{impulse.m}, K has {spec.m} rows")
    try:
        noise = _build_noise(config.noise, spec.m, riccati_R_e)
    except SocoError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("noise", e.message)
    if noise.m != spec.m:
        raise ConfigError("noise.R_e", f"must be {spec.m}x{spec.m}")
    y_hat = _build_y_hat(config.y_hat, spec.horizon, spec.m)
    return Experiment(config, spec, impulse, noise, y_hat)


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleOutcome:
    index: int
    seed: int
    records: Tuple[MetricRecord, ...] = ()
    status: str = "ok"
    decomposition_ok: bool = True
    jensen_ok: bool = True

    @property
    def aborted(self) -> bool:
        return self.status != "ok"


def run_sample(experiment: Experiment, index: int) -> SampleOutcome:
    """All configured algorithms plus OPT and STA on realization `index`."""
    config = experiment.config
    seed = mix_seed(config.seed, index)
    spec, f, settings = experiment.spec, experiment.impulse, config.solver
    try:
        r = realize(f, experiment.noise, experiment.y_hat, seed)
        opt = run_opt(r, spec, settings)
        sta = run_sta(r, spec, settings)
        records = []
        decomposition_ok = jensen_ok = True
        for alg in config.algorithms:
            if alg.name == OPT:
                run = opt
            elif alg.name == STA:
                run = sta
            else:
                run = run_algorithm(alg.name, r, spec, f, alg.w, alg.k, settings)
            g: Optional[G1G2] = None
            if alg.name == AFHC:
                g = decompose_g1_g2(run, run.components, opt, r, f, spec, alg.w)
                comp_diff = run.cost.total - opt.cost.total
                decomposition_ok &= comp_diff <= g.g1 + g.g2 + DECOMPOSITION_SLACK
                jensen_ok &= jensen_gap(run) >= -JENSEN_SLACK
            records.append(metric_record(run, opt, sta, g))
    except SocoError as e:
        status = describe_failure(e)
        logger.warning("sample %d (seed %d) aborted: %s", index, seed, status)
        return SampleOutcome(index, seed, status=status)
    return SampleOutcome(index, seed, tuple(records), "ok", decomposition_ok, jensen_ok)


def _run_samples(experiment: Experiment, workers: int) -> List[SampleOutcome]:
    n = experiment.config.samples
    if workers <= 1 or n == 1:
        return [run_sample(experiment, i) for i in range(n)]
    chunk = max(1, n // (workers * 8))
    ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        # map yields in submission order
        return list(pool.map(run_sample, repeat(experiment), range(n), chunksize=chunk))


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def record_key(rec: MetricRecord) -> str:
    return rec.algorithm if rec.w is None else f"{rec.algorithm}[w={rec.w}]"


def _algorithm_summary(recs: List[MetricRecord]) -> Dict[str, Any]:
    costs = [r.cost_total for r in recs]
    opt_mean = stats.mean([r.cost_opt for r in recs])
    cost_mean = stats.mean(costs)
    out: Dict[str, Any] = {
        "algorithm": recs[0].algorithm,
        "w": recs[0].w,
        "samples": len(recs),
        "mean_cost": cost_mean,
        "se_cost": stats.standard_error(costs),
        "mean_regret": stats.mean([r.regret for r in recs]),
        "se_regret": stats.standard_error([r.regret for r in recs]),
        "mean_comp_diff": stats.mean([r.comp_diff for r in recs]),
        "se_comp_diff": stats.standard_error([r.comp_diff for r in recs]),
        "comp_ratio": cost_mean / opt_mean if opt_mean else None,
    }
    if recs[0].g1 is not None:
        out["mean_g1"] = stats.mean([r.g1 for r in recs])
        out["se_g1"] = stats.standard_error([r.g1 for r in recs])
        out["mean_g2"] = stats.mean([r.g2 for r in recs])
        out["se_g2"] = stats.standard_error([r.g2 for r in recs])
    return out


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ExperimentConfig
    outcomes: Tuple[SampleOutcome, ...]
    bounds: Dict[int, BoundReport]

    @property
    def completed(self) -> List[SampleOutcome]:
        return [o for o in self.outcomes if not o.aborted]

    @property
    def aborted(self) -> List[SampleOutcome]:
        return [o for o in self.outcomes if o.aborted]

    @property
    def failed(self) -> bool:
        return len(self.aborted) > MAX_ABORT_FRACTION * len(self.outcomes)

    def records(self) -> List[Tuple[int, MetricRecord]]:
        return [(o.index, rec) for o in self.completed for rec in o.records]

    def by_algorithm(self) -> Dict[str, List[MetricRecord]]:
        groups: Dict[str, List[MetricRecord]] = {}
        for _, rec in self.records():
            groups.setdefault(record_key(rec), []).append(rec)
        return groups

    def summary(self) -> Dict[str, Any]:
        groups = self.by_algorithm()
        done = self.completed
        opt = [rec.cost_opt for o in done for rec in o.records[:1]]
        sta = [rec.cost_sta for o in done for rec in o.records[:1]]
        return {
            "samples": len(self.outcomes),
            "completed": len(done),
            "aborted": [{"sample": o.index, "seed": o.seed, "status": o.status} for o in self.aborted],
            "failed": self.failed,
            "algorithms": {key: _algorithm_summary(recs) for key, recs in groups.items()},
            "opt": stats.summarize(opt),
            "sta": stats.summarize(sta),
            "bounds": {f"w={w}": {**b.to_dict(), "extras": b.extras()}
                       for w, b in sorted(self.bounds.items())},
        }


def experiment_bounds(experiment: Experiment) -> Dict[int, BoundReport]:
    ws = sorted({a.w for a in experiment.config.algorithms if a.w is not None})
    return {w: bound_report(experiment.spec, experiment.impulse, experiment.noise, w) for w in ws}


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentResult:
    experiment = build_experiment(config)
    workers = worker_count() if workers is None else workers
    logger.info("running %d samples on %d worker(s)", config.samples, workers)
    outcomes = _run_samples(experiment, workers)
    result = ExperimentResult(config, tuple(outcomes), experiment_bounds(experiment))
    if result.aborted:
        logger.warning("%d of %d samples aborted", len(result.aborted), config.samples)
    logger.info("finished %d samples", config.samples)
    return result


def check_abort_rate(result: ExperimentResult):
    if result.failed:
        raise SocoError(
            f"{len(result.aborted)} of {len(result.outcomes)} samples aborted "
            f"(limit {MAX_ABORT_FRACTION:.1%})"
        )


# ---------------------------------------------------------------------------
# Acceptance checks
# ---------------------------------------------------------------------------

def acceptance_checks(result: ExperimentResult) -> List[str]:
    """Statistical and per-sample checks; returns failure descriptions."""
    failures = []
    T = result.config.spec.T
    done = result.completed
    if not all(o.decomposition_ok for o in done):
        bad = [o.index for o in done if not o.decomposition_ok]
        failures.append(f"comp_diff > g1 + g2 on samples {bad[:10]}")
    if not all(o.jensen_ok for o in done):
        bad = [o.index for o in done if not o.jensen_ok]
        failures.append(f"Jensen inequality violated on samples {bad[:10]}")

    for key, recs in result.by_algorithm().items():
        rec0 = recs[0]
        if rec0.w is None or rec0.w not in result.bounds:
            continue
        report = result.bounds[rec0.w]
        costs = [r.cost_total for r in recs]
        if not stats.at_least(stats.mean(costs), report.alpha2 * T - 2.0 * math.sqrt(T),
                              stats.standard_error(costs)):
            failures.append(f"{key}: mean cost {stats.mean(costs):.6g} below alpha2*T - 2 sqrt(T)")
        if rec0.g1 is None:
            continue
        diffs = [r.comp_diff for r in recs]
        if not stats.at_most(stats.mean(diffs), report.V * T, stats.standard_error(diffs)):
            failures.append(f"{key}: mean comp_diff {stats.mean(diffs):.6g} exceeds V*T = {report.V * T:.6g}")
        g2 = [r.g2 for r in recs]
        mean_g2 = stats.mean(g2)
        if not stats.within_standard_errors(mean_g2, report.g2_expected, stats.standard_error(g2)):
            failures.append(f"{key}: mean g2 {mean_g2:.6g} not within 3 SE of E[g2] = {report.g2_expected:.6g}")
        g1 = [r.g1 for r in recs]
        if not stats.at_most(stats.mean(g1), report.V1, stats.standard_error(g1)):
            failures.append(f"{key}: mean g1 {stats.mean(g1):.6g} exceeds V1 = {report.V1:.6g}")
    return failures


# ---------------------------------------------------------------------------
# Tail experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailRow:
    u: float
    threshold: float
    empirical: float
    se: float
    two_term: float
    simplified: float


def _afhc_w(config: ExperimentConfig) -> int:
    for a in config.algorithms:
        if a.name == AFHC:
            return a.w
    raise ConfigError("algorithms", "the tail experiment needs an AFHC entry")


def tail_table(result: ExperimentResult, u_grid: Sequence[float]) -> List[TailRow]:
    config = result.config
    if config.noise.epsilon is None:
        raise UnboundedNoiseError("the tail experiment needs bounded noise (noise.epsilon)")
    w = _afhc_w(config)
    T = config.spec.T
    report = result.bounds[w]
    diffs = [rec.comp_diff for _, rec in result.records()
             if rec.algorithm == AFHC and rec.w == w]
    rows = []
    for u in u_grid:
        threshold = report.V * T + u
        p = stats.exceedance(diffs, threshold)
        two_term, simplified = conc_tail_bound(report, T, w, u)
        rows.append(TailRow(float(u), threshold, p, stats.binomial_se(p, len(diffs)),
                            two_term, simplified))
    return rows


def tail_experiment(config: ExperimentConfig, u_grid: Sequence[float],
                    workers: Optional[int] = None) -> Tuple[ExperimentResult, List[TailRow]]:
    """Empirical P(comp_diff > VT + u) of AFHC against the concentration bounds."""
    if config.noise.epsilon is None:
        raise UnboundedNoiseError("the tail experiment needs bounded noise (noise.epsilon)")
    _afhc_w(config)
    result = run_experiment(config, workers)
    return result, tail_table(result, u_grid)


def tail_checks(rows: Sequence[TailRow]) -> List[str]:
    return [
        f"u={row.u:g}: empirical {row.empirical:.6g} exceeds two-term bound {row.two_term:.6g}"
        for row in rows
        if not stats.at_most(row.empirical, as_probability(row.two_term), row.se)
    ]


# ---------------------------------------------------------------------------
# Window sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    w: int
    V: float
    mean_comp_diff: float
    se_comp_diff: float
    mean_regret: float
    se_regret: float


def sweep_window(config: ExperimentConfig, w_list: Sequence[int],
                 workers: Optional[int] = None) -> List[SweepRow]:
    """AFHC(w+1) for each w on the same realizations (common random numbers)."""
    T = config.spec.T
    for w in w_list:
        if not 0 <= w <= T - 1:
            raise ConfigError("w", f"every w must satisfy 0 <= w <= T-1={T - 1}, got {w}")
    rows = []
    for w in w_list:
        cfg = replace(config, algorithms=(AlgorithmConfig(AFHC, w),))
        result = run_experiment(cfg, workers)
        check_abort_rate(result)
        recs = [rec for _, rec in result.records()]
        diffs = [r.comp_diff for r in recs]
        regrets = [r.regret for r in recs]
        rows.append(SweepRow(w, result.bounds[w].V,
                             stats.mean(diffs), stats.standard_error(diffs),
                             stats.mean(regrets), stats.standard_error(regrets)))
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def format_float(x: float) -> str:
    return format(x, ".17g")


def to_json(value: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if value is None or isinstance(value, bool):
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value)) if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        items = [pad + to_json(v, indent, _level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _csv_value(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format_float(x)
    return str(x)


def _write_csv(path: str, header: List[str], rows: List[List[Any]]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_value(v) for v in row])


def _write_text(path: str, text: str):
    with open(path, "w", newline="") as f:
        f.write(text + "\n")


def _ensure_dir(prefix: str):
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)


def sample_rows(records: Sequence[Tuple[int, MetricRecord]]) -> List[List[Any]]:
    return [
        [i, rec.seed, rec.algorithm, rec.w, rec.cost_total, rec.cost_tracking,
         rec.cost_switching, rec.cost_opt, rec.cost_sta, rec.regret, rec.comp_diff,
         rec.g1, rec.g2]
        for i, rec in records
    ]


def write_outputs(result: ExperimentResult, prefix: str) -> List[str]:
    """<prefix>.samples.csv, .summary.json, .config.json and .aborted.csv."""
    _ensure_dir(prefix)
    paths = [f"{prefix}.samples.csv", f"{prefix}.summary.json",
             f"{prefix}.config.json", f"{prefix}.aborted.csv"]
    _write_csv(paths[0], CSV_COLUMNS, sample_rows(result.records()))
    _write_text(paths[1], to_json(result.summary()))
    _write_text(paths[2], to_json(result.config.to_dict()))
    _write_csv(paths[3], ["sample", "seed", "status"],
               [[o.index, o.seed, o.status] for o in result.aborted])
    logger.info("wrote %s", ", ".join(paths))
    return paths


def write_tail(rows: Sequence[TailRow], prefix: str) -> str:
    _ensure_dir(prefix)
    path = f"{prefix}.tail.csv"
    _write_csv(path, ["u", "threshold", "empirical", "se", "two_term", "simplified"],
               [[r.u, r.threshold, r.empirical, r.se, r.two_term, r.simplified] for r in rows])
    return path


def write_sweep(rows: Sequence[SweepRow], prefix: str) -> str:
    _ensure_dir(prefix)
    path = f"{prefix}.sweep.csv"
    _write_csv(path, ["w", "V", "mean_comp_diff", "se_comp_diff", "mean_regret", "se_regret"],
               [[r.w, r.V, r.mean_comp_diff, r.se_comp_diff, r.mean_regret, r.se_regret]
                for r in rows])
    return path
