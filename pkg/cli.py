#!/usr/bin/env python3
"""
socopredict CLI
Bounds, Monte Carlo experiments, window sweeps and tail estimates.

Usage:
    soco bounds --config c.json [--w N]             Print the bound report
    soco run --config c.json [--check]              Run the configured experiment
    soco montecarlo --config c.json --samples N [--check]
    soco sweep-window --config c.json --w 0,1,2,4,8
    soco tail --config c.json --u-grid 0:50:5 [--check]
    soco realize --config c.json --seed S           Dump one realization

Options:
    --output PREFIX    Override the config's output prefix

Exit codes: 0 success, 1 validation error, 2 acceptance failure (--check).
Environment: SOCO_THREADS (worker count), SOCO_LOG_LEVEL (default WARNING).
"""

import logging
import os
import sys

from .errors import AcceptanceError, ConfigError, SocoError

FLAGS = ["--check"]
OPTIONS = ["--config", "--w", "--samples", "--u-grid", "--seed", "--output"]


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)

    if not args or args[0] in ("-h", "--help", "help"):
        print(__doc__.strip())
        return 0

    _setup_logging()
    cmd = args[0]
    commands = {
        "bounds": cmd_bounds,
        "run": cmd_run,
        "montecarlo": cmd_montecarlo,
        "sweep-window": cmd_sweep_window,
        "tail": cmd_tail,
        "realize": cmd_realize,
    }
    if cmd not in commands:
        print(f"Unknown command: {cmd}", file=sys.stderr)
        print("Use 'soco help' for usage.", file=sys.stderr)
        return 1

    try:
        commands[cmd](_parse_options(args[1:]))
    except AcceptanceError as e:
        for failure in e.failures:
            print(f"FAIL: {failure}", file=sys.stderr)
        return 2
    except SocoError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


def _setup_logging():
    level = os.environ.get("SOCO_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_options(args):
    opts = {}
    i = 0
    while i < len(args):
        arg = args[i]
        if arg in FLAGS:
            opts[arg] = True
            i += 1
        elif arg in OPTIONS:
            if i + 1 >= len(args):
                raise ConfigError(arg, "expects a value")
            opts[arg] = args[i + 1]
            i += 2
        else:
            from .errors import unknown_name_hint
            raise ConfigError("", unknown_name_hint("option", arg, FLAGS + OPTIONS))
    return opts


def _int_option(opts, name: str) -> int:
    try:
        return int(opts[name])
    except ValueError:
        raise ConfigError(name, f"expected an integer, got '{opts[name]}'")


def _load(opts):
    from .harness import load_config
    if "--config" not in opts:
        raise ConfigError("--config", "is required")
    config = load_config(opts["--config"])
    if "--output" in opts:
        from dataclasses import replace
        config = replace(config, output=opts["--output"])
    return config


def parse_int_list(text: str):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError("--w", f"expected comma-separated integers, got '{text}'")


def parse_u_grid(text: str):
    """start:stop:step, stop inclusive."""
    parts = text.split(":")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError("--u-grid", f"expected start:stop:step, got '{text}'")
    if step <= 0 or stop < start or start < 0:
        raise ConfigError("--u-grid", f"expected 0 <= start <= stop and step > 0, got '{text}'")
    count = int((stop - start) / step + 1e-9) + 1
    return [start + i * step for i in range(count)]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_bounds(opts):
    from .harness import build_experiment, experiment_bounds, to_json
    from .analysis import bound_report

    experiment = build_experiment(_load(opts))
    if "--w" in opts:
        w = _int_option(opts, "--w")
        if not 0 <= w <= experiment.spec.horizon - 1:
            raise ConfigError("--w", f"must satisfy 0 <= w <= T-1={experiment.spec.horizon - 1}")
        report = bound_report(experiment.spec, experiment.impulse, experiment.noise, w)
        print(to_json(report.to_dict()))
        return
    reports = experiment_bounds(experiment)
    print(to_json({f"w={w}": r.to_dict() for w, r in reports.items()}))


def _run_and_write(config, check: bool):
    from .harness import acceptance_checks, check_abort_rate, run_experiment, to_json, write_outputs

    result = run_experiment(config)
    write_outputs(result, config.output)
    print(to_json(result.summary()))
    check_abort_rate(result)
    if check:
        failures = acceptance_checks(result)
        if failures:
            raise AcceptanceError(failures)


def cmd_run(opts):
    _run_and_write(_load(opts), "--check" in opts)


def cmd_montecarlo(opts):
    if "--samples" not in opts:
        raise ConfigError("--samples", "is required")
    config = _load(opts).with_samples(_int_option(opts, "--samples"))
    _run_and_write(config, "--check" in opts)


def cmd_sweep_window(opts):
    from .harness import sweep_window, write_sweep

    if "--w" not in opts:
        raise ConfigError("--w", "is required")
    config = _load(opts)
    rows = sweep_window(config, parse_int_list(opts["--w"]))
    print(write_sweep(rows, config.output))


def cmd_tail(opts):
    from .harness import (
        acceptance_checks, check_abort_rate, tail_checks, tail_experiment, write_outputs, write_tail,
    )

    if "--u-grid" not in opts:
        raise ConfigError("--u-grid", "is required")
    config = _load(opts)
    result, rows = tail_experiment(config, parse_u_grid(opts["--u-grid"]))
    write_outputs(result, config.output)
    print(write_tail(rows, config.output))
    check_abort_rate(result)
    if "--check" in opts:
        failures = tail_checks(rows) + acceptance_checks(result)
        if failures:
            raise AcceptanceError(failures)


def cmd_realize(opts):
    from .harness import build_experiment, to_json
    from .prediction import realize

    if "--seed" not in opts:
        raise ConfigError("--seed", "is required")
    seed = _int_option(opts, "--seed")
    if seed < 0:
        raise ConfigError("--seed", "must be >= 0")
    experiment = build_experiment(_load(opts))
    r = realize(experiment.impulse, experiment.noise, experiment.y_hat, seed)
    print(to_json(r.to_dict()))


if __name__ == "__main__":
    sys.exit(main())
