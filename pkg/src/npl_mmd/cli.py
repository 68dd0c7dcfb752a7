"""Command-line front end: ``npl-mmd run | sweep | bound-check``.

Settings come from an optional flat ``key = value`` file (``#`` starts a
comment) and from flags of the same names; flags win. Results go to
``--output``, else ``$NPL_MMD_OUTPUT_DIR``, else ``./npl_mmd_output``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, fields

import numpy as np

from .engine import posterior_summary
from .evaluation import (SWEEP_PARAMETERS, ExperimentConfig, bootstrap_config,
                         bound_check_experiment, default_bound_grid, hyperparameter_sweep,
                         run_experiment)

OUTPUT_ENV = "NPL_MMD_OUTPUT_DIR"
DEFAULT_OUTPUT = "npl_mmd_output"


class ConfigError(ValueError):
    pass


def _fmt(x):
    return format(float(x), ".17g")


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none", "default") else conv(text)
    return parse


def _kernel(text):
    text = text.strip()
    if text in ("median", "mixture"):
        return text
    values = _float_list(text)
    if not values:
        raise ValueError("empty kernel spec")
    return values[0] if len(values) == 1 else tuple(values)


def _restarts(text):
    values = _int_list(text)
    if len(values) != 2:
        raise ValueError("restarts takes 'R,keep'")
    return tuple(values)


# key -> (converter, help)
EXPERIMENT_KEYS = {
    "model": (str, "gaussian | gandk | toggleswitch | cauchy-data"),
    "n": (_optional(int), "number of observations"),
    "epsilon": (float, "contamination fraction"),
    "alpha": (float, "DP concentration (0 = Bayesian bootstrap)"),
    "T": (_optional(int), "number of pseudo-atoms (default n)"),
    "B": (int, "bootstrap draws"),
    "steps": (_optional(int), "optimiser steps"),
    "learning_rate": (_optional(float), "Adam step size"),
    "kernel": (_optional(_kernel), "median | mixture | lengthscale[,lengthscale...]"),
    "seed": (int, "master seed"),
    "threads": (int, "worker processes, 0 = all cores"),
    "objective": (str, "resample | weighted"),
    "method": (str, "mmd | wll"),
    "n_resample": (_optional(int), "target draws per step"),
    "n_latent": (_optional(int), "simulator draws per step"),
    "restarts": (_optional(_restarts), "R,keep random restarts (0,0 disables)"),
    "chunk_size": (int, "draws optimised together"),
}
EXTRA_KEYS = {
    "output": (str, "output directory"),
    "model_mmd_samples": (int, "simulations for the fitted-vs-true MMD (0 = skip)"),
    "parameter": (str, "sweep parameter: " + " | ".join(SWEEP_PARAMETERS)),
    "grid": (_float_list, "comma-separated sweep values"),
    "n_grid": (_int_list, "comma-separated sample sizes for bound-check"),
    "runs": (int, "repetitions per n for bound-check"),
    "sample_size": (int, "simulations per MMD estimate in bound-check"),
}
ALL_KEYS = {**EXPERIMENT_KEYS, **EXTRA_KEYS}


def read_config_file(path):
    """Parse a flat key-value file; errors name the offending line."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc.strerror})") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = ALL_KEYS[key][0](text)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def _build_parser():
    parser = argparse.ArgumentParser(prog="npl-mmd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "posterior bootstrap for one dataset"),
                           ("sweep", "posterior-mean NMSE over a hyperparameter grid"),
                           ("bound-check", "fitted-vs-true MMD against 2/sqrt(n)")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="flat key = value file")
        for key, (_, helptext) in ALL_KEYS.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, default=None, help=helptext)
    return parser


def resolve_settings(args):
    settings = read_config_file(args.config) if args.config else {}
    for key, (conv, _) in ALL_KEYS.items():
        text = getattr(args, key, None)
        if text is None:
            continue
        try:
            settings[key] = conv(text)
        except ValueError as exc:
            raise ConfigError(f"--{key.replace('_', '-')}: bad value {text!r}: {exc}") from None
    return settings


def experiment_config(settings, **overrides):
    kwargs = {k: v for k, v in settings.items() if k in EXPERIMENT_KEYS}
    kwargs.update(overrides)
    try:
        cfg = ExperimentConfig(**kwargs).resolved()
        # surface downstream validation before any work starts
        bootstrap_config(cfg, None)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return cfg


def _output_dir(settings):
    out = settings.get("output") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _config_snapshot(cfg, settings, command):
    snap = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}
    snap.update({k: v for k, v in settings.items() if k in EXTRA_KEYS and k != "output"})
    snap["command"] = command
    return snap


def write_posterior_csv(path, sample):
    p = sample.thetas.shape[1]
    header = ["b"] + [f"theta_{k}" for k in range(p)] + ["loss", "seed"]
    rows = ([str(b)] + [_fmt(v) for v in sample.thetas[b]] + [_fmt(sample.losses[b]),
                                                              str(int(sample.seeds[b]))]
            for b in range(sample.B))
    _write_csv(path, header, rows)


def cmd_run(settings):
    cfg = experiment_config(settings)
    out = _output_dir(settings)
    sample, result = run_experiment(cfg, model_mmd_samples=settings.get("model_mmd_samples"))
    write_posterior_csv(os.path.join(out, "posterior.csv"), sample)
    summary = posterior_summary(sample)
    summary.update(result.to_dict())
    _write_json(os.path.join(out, "summary.json"), summary)
    _write_json(os.path.join(out, "config.json"), _config_snapshot(cfg, settings, "run"))
    print(f"{result.run_id}: nmse={result.nmse:.6g} failed={result.n_failed} -> {out}")
    return 0


def cmd_sweep(settings):
    parameter = settings.get("parameter")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    grid = settings.get("grid") or []
    if not grid:
        raise ConfigError("grid is empty")
    if parameter == "T" and any(v != int(v) or v < 1 for v in grid):
        raise ConfigError("T grid values must be positive integers")
    cfg = experiment_config(settings)
    out = _output_dir(settings)
    rows = hyperparameter_sweep(parameter, grid, cfg)
    _write_csv(os.path.join(out, "sweep.csv"), ["value", "nmse"],
               ([_fmt(r["value"]), _fmt(r["nmse"])] for r in rows))
    _write_json(os.path.join(out, "config.json"), _config_snapshot(cfg, settings, "sweep"))
    print(f"sweep over {parameter}: {len(rows)} rows -> {out}")
    return 0


def cmd_bound_check(settings):
    settings = dict(settings)
    settings.setdefault("model", "gandk")
    n_grid = settings.get("n_grid") or default_bound_grid()
    if any(n < 2 for n in n_grid):
        raise ConfigError("n_grid values must be >= 2")
    runs = settings.get("runs", 10)
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    cfg = experiment_config(settings, epsilon=0.0, alpha=0.0)
    out = _output_dir(settings)
    rows = bound_check_experiment(n_grid, runs, cfg, settings.get("sample_size", 15000))
    _write_csv(os.path.join(out, "bound.csv"), ["n", "mmd_estimate", "bound_2_over_sqrt_n"],
               ([str(r["n"]), _fmt(r["mmd_estimate"]), _fmt(r["bound_2_over_sqrt_n"])]
                for r in rows))
    _write_json(os.path.join(out, "config.json"),
                _config_snapshot(cfg, settings, "bound-check"))
    print(f"bound check: {len(rows)} rows -> {out}")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bound-check": cmd_bound_check}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"npl-mmd: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"npl-mmd: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
