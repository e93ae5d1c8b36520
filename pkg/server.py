"""
socopredict API Server
Flask-based HTTP API for bound reports, small Monte Carlo runs and
single realizations.

Endpoints:
    GET  /api/health                Health check
    POST /api/bounds                {config, w?} -> BoundReport(s)
    POST /api/run                   {config} -> summary (samples capped)
    POST /api/realize               {config, seed} -> realization
"""

from dataclasses import dataclass, replace

from flask import Flask, jsonify, request

from . import __version__
from .analysis import bound_report
from .errors import ConfigError, SocoError
from .harness import build_experiment, experiment_bounds, parse_config, run_experiment
from .prediction import realize

app = Flask(__name__)


@dataclass(frozen=True)
class ApiBounds:
    """Request limits for the HTTP API (stricter than the CLI)."""
    max_samples: int = 200
    max_horizon: int = 2_000


API_BOUNDS = ApiBounds()


def _error(message: str, status: int = 400):
    return jsonify({"success": False, "error": message}), status


def _config_from_request(data: dict):
    if "config" not in data:
        raise ConfigError("config", "is required")
    config = parse_config(data["config"])
    if config.spec.T > API_BOUNDS.max_horizon:
        raise ConfigError("spec.T", f"must be <= {API_BOUNDS.max_horizon} for API requests")
    return config


@app.route("/api/health", methods=["GET"])
def health():
    return jsonify({"status": "ok", "version": __version__, "service": "socopredict"})


@app.route("/api/bounds", methods=["POST"])
def bounds():
    data = request.get_json(force=True, silent=True) or {}
    try:
        experiment = build_experiment(_config_from_request(data))
        if data.get("w") is not None:
            w = data["w"]
            if not isinstance(w, int) or not 0 <= w <= experiment.spec.horizon - 1:
                raise ConfigError("w", f"must be an integer in 0..{experiment.spec.horizon - 1}")
            report = bound_report(experiment.spec, experiment.impulse, experiment.noise, w)
            return jsonify({"success": True, "bounds": {f"w={w}": report.to_dict()}})
        reports = experiment_bounds(experiment)
    except SocoError as e:
        return _error(e.message)
    return jsonify({"success": True, "bounds": {f"w={w}": r.to_dict() for w, r in reports.items()}})


@app.route("/api/run", methods=["POST"])
def run():
    data = request.get_json(force=True, silent=True) or {}
    try:
        config = _config_from_request(data)
        capped = config.samples > API_BOUNDS.max_samples
        if capped:
            config = replace(config, samples=API_BOUNDS.max_samples)
        result = run_experiment(config, workers=1)
    except SocoError as e:
        return _error(e.message)
    return jsonify({"success": True, "capped": capped, "summary": result.summary()})


@app.route("/api/realize", methods=["POST"])
def realize_endpoint():
    data = request.get_json(force=True, silent=True) or {}
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        return _error("seed: expected a nonnegative integer")
    try:
        experiment = build_experiment(_config_from_request(data))
        r = realize(experiment.impulse, experiment.noise, experiment.y_hat, seed)
    except SocoError as e:
        return _error(e.message)
    return jsonify({"success": True, "realization": r.to_dict()})


def create_app():
    """Factory function for WSGI servers."""
    return app


if __name__ == "__main__":
    import os
    port = int(os.environ.get("PORT", 5555))
    print(f"socopredict API: http://localhost:{port}")
    app.run(host="0.0.0.0", port=port, debug=False)
