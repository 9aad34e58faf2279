"""Command-line interface.

Subcommands mirror the library surface: generate / train / forecast for
single artifacts, sweep / ratio / fit for the experiment grid, mapsurface /
drift for the d=1 linear-oscillator studies. Every flag mirrors a config
key; --config loads a file first and explicit flags override it.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from ._version import VERSION
from . import dataset, forecast, harness, metrics
from .harness import ExperimentConfig
from .mlp import NetSpec, load_params, save_params
from .training import OptimizerConfig, train, write_report_csv


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="experiment config file")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, metavar="V", default=None)


def _build_config(args) -> ExperimentConfig:
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            overrides[f.name] = harness._parse_config_value(f.name, str(raw))
    if args.config:
        return harness.load_config(args.config, overrides=overrides)
    base = getattr(args, "_base_config", None) or ExperimentConfig()
    return dataclasses.replace(base, **overrides)


def _parse_state(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=np.float64)


def _cmd_generate(args) -> int:
    config = _build_config(args)
    spec = config.system(args.d)
    rng = np.random.default_rng([args.seed, 0])
    orbits, pairs = dataset.generate_training_set(
        spec, config.energy_range(args.d), config.train_T, config.train_dt,
        args.n, args.flavor, rng,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = harness.metadata_lines(config, d=args.d, n=args.n, flavor=args.flavor,
                                  seed=args.seed)
    for i, orbit in enumerate(orbits):
        dataset.write_orbit_csv(orbit, out / f"orbit_{i:03d}.csv", header_lines=meta)
    dataset.write_pairs_csv(pairs, out / "pairs.csv", header_lines=meta)
    print(f"wrote {len(orbits)} orbits and {len(pairs)} pairs to {out}")
    return 0


def _cmd_train(args) -> int:
    config = _build_config(args)
    spec = config.system(args.d)
    run_seed = harness.cell_seed(config.family, args.d, args.n, args.seed, args.flavor)
    rng = np.random.default_rng([run_seed, 0])
    _, pairs = dataset.generate_training_set(
        spec, config.energy_range(args.d), config.train_T, config.train_dt,
        args.n, args.flavor, rng,
    )
    net_spec = NetSpec(
        input_dim=spec.phase_dim,
        output_dim=spec.phase_dim if args.flavor == "nn" else 1,
        hidden_layers=config.hidden_layers, width=config.width, seed=run_seed,
    )
    opt = OptimizerConfig(learning_rate=config.learning_rate,
                          batch_size=config.batch_size, epochs=config.epochs,
                          seed=run_seed)
    report = train(net_spec, pairs, opt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params_path = out / f"params_{config.family}_d{args.d}_N{args.n}_s{args.seed}_{args.flavor}.txt"
    save_params(report.params, params_path)
    write_report_csv(report, out / "train_report.csv",
                     header_lines=harness.metadata_lines(
                         config, d=args.d, n=args.n, flavor=args.flavor,
                         seed=args.seed, total_inputs=report.total_inputs))
    print(f"final mean cost {report.epoch_costs[-1]:.6g}; params in {params_path}")
    return 0


def _cmd_forecast(args) -> int:
    config = _build_config(args)
    params = load_params(args.params)
    field = forecast.field_from_params(params)
    spec = config.system(field.d)
    state0 = _parse_state(args.state)
    traj = forecast.integrate(field, state0, config.forecast_T,
                              config.forecast_dt, method=config.method)
    forecast.write_trajectory_csv(
        traj, spec, args.out,
        header_lines=harness.metadata_lines(config, flavor=field.flavor,
                                            divergent=int(traj.divergent)))
    print(f"wrote {len(traj)} states to {args.out}"
          + (" (divergent, truncated)" if traj.divergent else ""))
    return 0


def _cmd_sweep(args) -> int:
    config = _build_config(args)

    def progress(done, total):
        print(f"\rcells {done}/{total}", end="", flush=True)

    result = harness.sweep(config, progress=progress if not args.quiet else None)
    if not args.quiet:
        print()
    print(f"records: {result.records_path}")
    for flavor, path in result.surface_paths.items():
        print(f"surface[{flavor}]: {path}")
    return 0


def _cmd_ratio(args) -> int:
    records = metrics.read_records_csv(args.records)
    grid_nn = harness.surface_from_records(records, "nn")
    grid_hnn = harness.surface_from_records(records, "hnn")
    ratio = harness.ratio_surface(grid_nn, grid_hnn, smoothing=args.smoothing)
    header = [f"hamlearn v{VERSION}",
              "ratio_definition: mean(nn dE_over_E) / mean(hnn dE_over_E)"]
    harness.write_surface_csv(ratio, args.out, header_lines=header)
    print(f"wrote ratio surface to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    records = metrics.read_records_csv(args.records)
    points = harness.mean_error_by_n(records, flavor=args.flavor, d=args.d,
                                     family=args.family)
    if len(points) < 2:
        raise ValueError("records contain fewer than two N values for that slice")
    c, alpha = metrics.fit_power_law(points)
    print(f"c = {c!r}")
    print(f"alpha = {alpha!r}")
    return 0


def _cmd_mapsurface(args) -> int:
    config = _build_config(args)
    params = load_params(args.params)
    field = forecast.field_from_params(params)
    lo, hi = (float(v) for v in args.bounds.split(","))
    harness.map_surface_export(field, (lo, hi), args.resolution, args.out,
                               energy_max=config.energy_max,
                               header_lines=harness.metadata_lines(
                                   config, flavor=field.flavor))
    print(f"wrote {args.resolution}x{args.resolution} map surface to {args.out}")
    return 0


def _cmd_drift(args) -> int:
    args._base_config = harness.default_drift_config()
    config = _build_config(args)
    paths = harness.drift_experiment(config)
    for line in Path(paths["summary"]).read_text().splitlines():
        if not line.startswith("#"):
            print(line)
    print(f"summary: {paths['summary']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamlearn",
        description="Train and forecast Hamiltonian dynamics with conventional "
                    "and Hamiltonian neural networks.",
    )
    parser.add_argument("--version", action="version", version=f"hamlearn {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate ground-truth orbits and training pairs")
    _add_config_flags(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=1024, help="number of training pairs")
    p.add_argument("--flavor", choices=("nn", "hnn"), default="hnn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train a single model")
    _add_config_flags(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--flavor", choices=("nn", "hnn"), default="hnn")
    p.add_argument("--seed", type=int, default=0, help="seed index (cell convention)")
    p.add_argument("--out", default="models")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("forecast", help="roll a saved model forward in time")
    _add_config_flags(p)
    p.add_argument("--params", required=True, help="saved parameter file")
    p.add_argument("--state", required=True, help="initial state, comma separated")
    p.add_argument("--out", default="trajectory.csv")
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("sweep", help="run the full experiment grid (resumable)")
    _add_config_flags(p)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ratio", help="error-ratio surface from a records file")
    p.add_argument("--records", required=True)
    p.add_argument("--smoothing", type=float, default=0.75,
                   help="Gaussian width in grid cells (0 disables)")
    p.add_argument("--out", default="ratio.csv")
    p.set_defaults(func=_cmd_ratio)

    p = sub.add_parser("fit", help="power-law fit over a records file")
    p.add_argument("--records", required=True)
    p.add_argument("--flavor", choices=("nn", "hnn"), default="hnn")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--family", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("mapsurface", help="export learned vs target map surfaces")
    _add_config_flags(p)
    p.add_argument("--params", required=True)
    p.add_argument("--bounds", default="-1.5,1.5",
                   help="lo,hi for both axes (use --bounds=-2,2 for negatives)")
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--out", default="mapsurface.csv")
    p.set_defaults(func=_cmd_mapsurface)

    p = sub.add_parser("drift", help="d=1 linear long-horizon energy drift comparison")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_drift)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
