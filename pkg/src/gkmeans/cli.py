"""Batch experiment driver: config parsing, seeding, CSV + figure output.

Configuration is a flat key=value file with command-line overrides (flags
win).  Every run writes a CSV results table, a fully resolved manifest
sufficient to reproduce it, and (unless --no-plot) a rendered figure next to
the CSV.  Reruns with the same seed produce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, assoc, fourier, report, selfcheck, tracking
from .seeds import generator

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BAD_CONFIG = 2
EXIT_UNWRITABLE = 3


class ConfigError(Exception):
    pass


def _int(s):
    return int(s)


def _float(s):
    return float(s)


def _bool(s):
    s = str(s).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).split(",") if v.strip()]


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _points(s):
    if isinstance(s, (list, tuple)):
        return [tuple(float(c) for c in p) for p in s]
    pts = []
    for part in str(s).split(";"):
        part = part.strip()
        if not part:
            continue
        xy = [float(v) for v in part.split(",")]
        if len(xy) != 2:
            raise ValueError(f"expected 'x,y' pairs, got {part!r}")
        pts.append(tuple(xy))
    return pts


_SQRT2_400 = math.sqrt(2.0) / 400.0

# name -> (parser, default, help); None defaults mean "derived at run time".
_PARAMS = {
    "assoc": {
        "n": (_ints, [300, 600, 1200], "comma list of dataset sizes"),
        "trials": (_int, 50, "Monte Carlo trials per dataset size"),
        "starts": (_int, 10, "random initializations per trial"),
        "lam": (_float, 1.0, "curvature penalty weight"),
        "max_iter": (_int, 100, "iteration cap per run"),
        "T": (_float, 10.0, "observation horizon"),
        "noise_var": (_float, 5.0, "observation noise variance"),
        "noise_bound": (_float, 100.0, "noise truncation bound"),
        "k": (_int, None, "number of trajectories (default: those provided)"),
        "x1": (_floats, [-15.0, -2.0, 0.2], "trajectory 1 coefficients, ascending"),
        "x2": (_floats, [5.0, 1.0], "trajectory 2 coefficients"),
        "x3": (_floats, [40.0], "trajectory 3 coefficients"),
        "x4": (_floats, None, "trajectory 4 coefficients"),
        "x5": (_floats, None, "trajectory 5 coefficients"),
        "x6": (_floats, None, "trajectory 6 coefficients"),
        "weights": (_floats, None, "mixture weights (default equal)"),
        "eta_grid": (_int, 2001, "quadrature nodes for the recovery metric"),
    },
    "crossing": {
        "t_min": (_float, 9.6, "first fit horizon"),
        "t_max": (_float, 11.0, "last fit horizon"),
        "t_step": (_float, 0.1, "fit horizon step"),
        "trials": (_int, 200, "trials per horizon"),
        "n": (_int, 220, "observations on the full window"),
        "lam": (_float, 1.0, "curvature penalty weight"),
        "starts": (_int, 1, "initializations for the detection run"),
        "max_iter": (_int, 100, "iteration cap per run"),
        "T": (_float, 11.0, "data generation horizon"),
        "noise_var": (_float, 5.0, "observation noise variance"),
        "noise_bound": (_float, math.inf, "noise truncation bound"),
        "x1": (_floats, [-20.0, 0.0, 1.0], "track 1 coefficients, ascending"),
        "x2": (_floats, [20.0, 4.0], "track 2 coefficients"),
        "adaptive": (_bool, False, "size trials by the adaptive pre-run"),
        "target": (_int, 100, "per-outcome count for the adaptive pre-run"),
    },
    "fourier": {
        "n": (_ints, [101, 1001], "comma list of odd sample counts"),
        "p": (_floats, [-1.0, -0.8, 0.0, 0.5], "comma list of scaling exponents"),
        "lam": (_float, 1.0, "regularization constant"),
        "sigma2": (_float, 1.0, "noise variance"),
        "trials": (_int, 500, "Monte Carlo trials per cell"),
    },
    "tracking": {
        "T": (_float, 200.0, "observation horizon"),
        "fractions": (_floats, [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0], "subsample fractions"),
        "trials": (_int, 20, "trials per fraction"),
        "starts": (_int, 5, "random initializations per trial"),
        "inner_starts": (_int, 5, "starting points for each track fit"),
        "max_iter": (_int, 100, "iteration cap per run"),
        "c": (_float, 100.0, "signal speed"),
        "tau": (_float, 1.0, "frame period"),
        "alpha": (_float, 1e8, "amplitude numerator constant"),
        "beta": (_float, 5.0, "amplitude denominator constant"),
        "sigma": (_float, 0.03, "arrival-time noise std"),
        "nu": (_float, 0.05, "log-amplitude noise std"),
        "sensors": (_points, [(-10.0, -10.0), (10.0, -10.0), (0.0, 10.0)], "semicolon list of x,y"),
        "track1": (_floats, [0.0, 5.0, _SQRT2_400, _SQRT2_400, 0.3], "x0x,x0y,vx,vy,o"),
        "track2": (_floats, [6.0, 7.0, -0.008, 0.0, 0.6], "x0x,x0y,vx,vy,o"),
        "track3": (_floats, None, "x0x,x0y,vx,vy,o"),
        "track4": (_floats, None, "x0x,x0y,vx,vy,o"),
        "eta_grid": (_int, 2001, "quadrature nodes for the recovery metric"),
    },
    "spline-check": {
        "instances": (_int, 25, "random instances"),
        "max_points": (_int, 12, "largest point count per instance"),
        "lams": (_floats, [1e-3, 1.0, 1e3], "penalty weights cycled over instances"),
    },
}

_COMMON_KEYS = ("command", "seed", "out", "threads", "plot")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    out: str
    threads: int
    plot: bool
    params: dict


def load_config_file(path: str) -> dict:
    """Parse a flat key=value file; '#' starts a comment."""
    raw = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line.rstrip()!r}")
                key, value = stripped.split("=", 1)
                raw[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return raw


def resolve_config(command: str, file_values: dict, cli_values: dict) -> ExperimentConfig:
    """Merge defaults, config file, and flags (flags win); reject unknown keys."""
    table = _PARAMS[command]
    params = {name: default for name, (_, default, _) in table.items()}
    seed, out, plot = 0, f"{command.replace('-', '_')}.csv", True
    try:
        threads = int(os.environ.get("GKMEANS_THREADS", "1"))
    except ValueError:
        threads = 1

    for key, raw in file_values.items():
        if key == "command":
            if raw != command:
                raise ConfigError(f"config file is for command {raw!r}, not {command!r}")
        elif key == "seed":
            seed = _int(raw)
        elif key == "out":
            out = str(raw)
        elif key == "threads":
            threads = _int(raw)
        elif key == "plot":
            plot = _bool(raw)
        elif key in table:
            try:
                params[key] = table[key][0](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from exc
        else:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")

    for key, value in cli_values.items():
        if value is None:
            continue
        if key == "seed":
            seed = value
        elif key == "out":
            out = value
        elif key == "threads":
            threads = value
        elif key == "plot":
            plot = value
        elif key in table:
            try:
                params[key] = table[key][0](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for --{key}: {exc}") from exc
        else:
            raise ConfigError(f"unknown parameter {key!r}")

    config = ExperimentConfig(
        command=command, seed=seed, out=out, threads=threads, plot=plot, params=params
    )
    _validate(config)
    return config


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def _validate(cfg: ExperimentConfig):
    p = cfg.params
    _require(cfg.threads >= 1, "threads must be at least 1")
    if cfg.command == "assoc":
        _require(all(n >= 1 for n in p["n"]), "dataset sizes must be positive")
        _require(p["trials"] >= 1 and p["starts"] >= 1, "trials and starts must be positive")
        _require(p["lam"] >= 0, "lam must be nonnegative")
        _require(p["T"] > 0 and p["noise_var"] > 0 and p["noise_bound"] > 0, "model scales must be positive")
        _require(p["eta_grid"] >= 3 and p["eta_grid"] % 2 == 1, "eta_grid must be odd and >= 3")
    elif cfg.command == "crossing":
        _require(p["t_min"] <= p["t_max"] and p["t_step"] > 0, "horizon grid is malformed")
        _require(p["t_max"] <= p["T"] + 1e-9, "fit horizons must not exceed the data horizon")
        _require(p["trials"] >= 1 and p["n"] >= 2 and p["starts"] >= 1, "counts must be positive")
        _require(p["lam"] >= 0, "lam must be nonnegative")
        _require(p["target"] >= 1, "target must be positive")
    elif cfg.command == "fourier":
        _require(all(n >= 1 and n % 2 == 1 for n in p["n"]), "sample counts must be odd")
        _require(p["lam"] > 0, "lam must be positive")
        _require(p["sigma2"] >= 0, "sigma2 must be nonnegative")
        _require(p["trials"] >= 2, "trials must be at least 2")
    elif cfg.command == "tracking":
        _require(all(0 < f <= 1 for f in p["fractions"]), "fractions must lie in (0, 1]")
        _require(p["trials"] >= 1 and p["starts"] >= 1 and p["inner_starts"] >= 1, "counts must be positive")
        for name in ("T", "c", "tau", "alpha", "beta", "sigma", "nu"):
            _require(p[name] > 0, f"{name} must be positive")
        _require(len(p["sensors"]) >= 1, "need at least one sensor")
        for name in ("track1", "track2", "track3", "track4"):
            _require(p[name] is None or len(p[name]) == 5, f"{name} needs 5 values")
        _require(p["eta_grid"] >= 3 and p["eta_grid"] % 2 == 1, "eta_grid must be odd and >= 3")
    elif cfg.command == "spline-check":
        _require(p["instances"] >= 1, "instances must be positive")
        _require(p["max_points"] >= 3, "max_points must be at least 3")
        _require(all(l >= 0 for l in p["lams"]), "lams must be nonnegative")


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        if v and isinstance(v[0], tuple):
            return ";".join(",".join(_format_value(c) for c in pt) for pt in v)
        return ",".join(_format_value(x) for x in v)
    return str(v)


def write_csv(path: str, header: list[str], rows: list[dict]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_value(row[h]) for h in header) + "\n")


def write_manifest(path: str, cfg: ExperimentConfig, extra: dict | None = None):
    lines = {
        "artifact_version": __version__,
        "command": cfg.command,
        "seed": str(cfg.seed),
        "out": cfg.out,
        "threads": str(cfg.threads),
        "plot": _format_value(cfg.plot),
    }
    for key, value in cfg.params.items():
        lines[key] = "" if value is None else _format_value(value)
    for key, value in (extra or {}).items():
        lines[key] = _format_value(value)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(lines):
            fh.write(f"{key}={lines[key]}\n")


def _assoc_model(p) -> assoc.GenModel:
    coeff_keys = [p[f"x{j}"] for j in range(1, 7)]
    if p["k"] is not None:
        k = p["k"]
        _require(all(coeff_keys[j] is not None for j in range(k)), f"x1..x{k} must all be set")
    else:
        k = 0
        while k < 6 and coeff_keys[k] is not None:
            k += 1
        _require(k >= 1, "at least one trajectory is required")
    weights = p["weights"] or [1.0 / k] * k
    _require(len(weights) == k, "weights must match the trajectory count")
    return assoc.GenModel(
        k=k,
        T=p["T"],
        trajectories=tuple(assoc.PolyTrajectory(tuple(coeff_keys[j]), p["T"]) for j in range(k)),
        weights=tuple(weights),
        noise_var=p["noise_var"],
        noise_bound=p["noise_bound"],
    )


def _run_assoc(cfg: ExperimentConfig):
    p = cfg.params
    model = _assoc_model(p)
    cells = assoc.association_suite(
        model, p["n"], p["trials"], p["starts"], p["lam"], cfg.seed, p["max_iter"], p["eta_grid"]
    )
    header = ["n", "trials", "statistic", "eta", "energy", "accuracy_pct", "iterations", "below_truth_pct"]
    rows = []
    for cell in cells:
        for pct in (5, 25, 50, 75, 95):
            rows.append(
                {
                    "n": int(cell.cell_value),
                    "trials": p["trials"],
                    "statistic": f"q{pct:02d}",
                    "eta": cell.quantile("eta", pct),
                    "energy": cell.quantile("energy", pct),
                    "accuracy_pct": cell.quantile("accuracy_pct", pct),
                    "iterations": cell.quantile("iterations", pct),
                    "below_truth_pct": 100.0 * cell.below_truth_frac,
                }
            )
    return header, rows, report.render_assoc, {}


def _crossing_model(p) -> assoc.GenModel:
    return assoc.GenModel(
        k=2,
        T=p["T"],
        trajectories=(
            assoc.PolyTrajectory(tuple(p["x1"]), p["T"]),
            assoc.PolyTrajectory(tuple(p["x2"]), p["T"]),
        ),
        weights=(0.5, 0.5),
        noise_var=p["noise_var"],
        noise_bound=p["noise_bound"],
    )


def _run_crossing(cfg: ExperimentConfig):
    p = cfg.params
    model = _crossing_model(p)
    steps = int(round((p["t_max"] - p["t_min"]) / p["t_step"]))
    t_grid = [round(p["t_min"] + i * p["t_step"], 10) for i in range(steps + 1)]
    trials = p["trials"]
    extra = {}
    if p["adaptive"]:
        trials = assoc.calibrate_crossing_trials(
            model, t_grid[-1], p["n"], p["lam"], cfg.seed, target=p["target"], n_starts=p["starts"]
        )
        extra["resolved_trials"] = trials
    cells = assoc.crossing_suite(
        model, t_grid, trials, p["n"], p["lam"], cfg.seed, p["starts"], p["max_iter"]
    )
    header = ["t_fit", "trials", "delta_e_mean", "delta_e_std", "detect_pct"]
    rows = [
        {
            "t_fit": c.t_fit,
            "trials": c.trials,
            "delta_e_mean": c.delta_e_mean,
            "delta_e_std": c.delta_e_std,
            "detect_pct": c.detect_pct,
        }
        for c in cells
    ]
    return header, rows, report.render_crossing, extra


def _run_fourier(cfg: ExperimentConfig):
    p = cfg.params
    header = ["n", "lambda", "p", "S_closed", "S_mc_mean", "S_mc_se", "trials"]
    rows = []
    cell = 0
    for n in p["n"]:
        for expo in p["p"]:
            problem = fourier.PeriodicProblem(n=n, lam=p["lam"], p=expo, sigma2=p["sigma2"])
            mean, se = fourier.empirical_penalty_mc(problem, p["trials"], generator(cfg.seed, cell))
            rows.append(
                {
                    "n": n,
                    "lambda": p["lam"],
                    "p": expo,
                    "S_closed": fourier.closed_form_S(n, p["lam"], expo, p["sigma2"]),
                    "S_mc_mean": mean,
                    "S_mc_se": se,
                    "trials": p["trials"],
                }
            )
            cell += 1
    return header, rows, report.render_fourier, {}


def _run_tracking(cfg: ExperimentConfig):
    p = cfg.params
    net = tracking.SensorNet(
        sensor_positions=tuple(p["sensors"]),
        c=p["c"],
        tau=p["tau"],
        alpha=p["alpha"],
        beta=p["beta"],
        sigma=p["sigma"],
        nu=p["nu"],
        T=p["T"],
    )
    tracks = []
    for name in ("track1", "track2", "track3", "track4"):
        if p[name] is not None:
            x0x, x0y, vx, vy, o = p[name]
            tracks.append(tracking.TrackParams(x0=(x0x, x0y), v=(vx, vy), o=o))
    _require(len(tracks) >= 1, "at least one track is required")
    pulses, labels = tracking.generate_pulses(tracks, net, generator(cfg.seed, "gen"))
    rows_raw = tracking.subsample_experiment(
        pulses,
        labels,
        p["fractions"],
        p["trials"],
        len(tracks),
        net,
        tracks,
        cfg.seed,
        n_starts=p["starts"],
        inner_starts=p["inner_starts"],
        max_iter=p["max_iter"],
        eta_grid=p["eta_grid"],
    )
    header = ["fraction", "trial", "eta", "accuracy_pct", "iterations", "energy", "converged"]
    rows = [
        {
            "fraction": r.fraction,
            "trial": r.trial,
            "eta": r.eta,
            "accuracy_pct": r.accuracy_pct,
            "iterations": r.iterations,
            "energy": r.energy,
            "converged": r.converged,
        }
        for r in rows_raw
    ]
    return header, rows, report.render_tracking, {"n_pulses": len(pulses)}


def _run_spline_check(cfg: ExperimentConfig):
    p = cfg.params
    rows_raw = selfcheck.spline_check(p["instances"], p["max_points"], p["lams"], cfg.seed)
    header = ["instance", "m", "lambda", "dense_rel_err", "quad_rel_err", "perturb_gain"]
    rows = [
        {
            "instance": r.instance,
            "m": r.m,
            "lambda": r.lam,
            "dense_rel_err": r.dense_rel_err,
            "quad_rel_err": r.quad_rel_err,
            "perturb_gain": r.perturb_gain,
        }
        for r in rows_raw
    ]
    return header, rows, report.render_spline_check, {}


_RUNNERS = {
    "assoc": _run_assoc,
    "crossing": _run_crossing,
    "fourier": _run_fourier,
    "tracking": _run_tracking,
    "spline-check": _run_spline_check,
}


def run_command(cfg: ExperimentConfig) -> int:
    """Execute one experiment: CSV table, manifest, optional figure."""
    try:
        probe = open(cfg.out, "w", encoding="utf-8")
        probe.close()
    except OSError as exc:
        print(f"gkmeans: cannot write output {cfg.out!r}: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    try:
        header, rows, render, extra = _RUNNERS[cfg.command](cfg)
    except (ValueError, ConfigError) as exc:
        print(f"gkmeans: {exc}", file=sys.stderr)
        return EXIT_ERROR
    write_csv(cfg.out, header, rows)
    write_manifest(cfg.out + ".manifest", cfg, extra)
    if cfg.plot:
        figure_path = os.path.splitext(cfg.out)[0] + ".png"
        render(rows, figure_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkmeans",
        description="Generalized k-means experiments: clustering with spline and track centers.",
    )
    parser.add_argument("--version", action="version", version=f"gkmeans {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in _PARAMS.items():
        cp = sub.add_parser(command, help=f"run the {command} experiment")
        cp.add_argument("--config", help="key=value config file")
        cp.add_argument("--seed", type=int, help="master seed (default 0)")
        cp.add_argument("--out", help="output CSV path")
        cp.add_argument("--threads", type=int, help="worker threads (trials are seed-split)")
        cp.add_argument("--plot", dest="plot", action="store_true", default=None, help="render a figure (default)")
        cp.add_argument("--no-plot", dest="plot", action="store_false", help="skip figure rendering")
        for name, (_, default, helptext) in table.items():
            flag = "--lambda" if name == "lam" else f"--{name.replace('_', '-')}"
            cp.add_argument(flag, dest=name, metavar="V", help=f"{helptext} (default {_format_value(default) if default is not None else 'unset'})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    cli_values = {
        k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None
    }
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = resolve_config(command, file_values, cli_values)
    except ConfigError as exc:
        print(f"gkmeans: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    return run_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
