"""Experiment grid orchestration: generate, train, forecast, record.

A sweep walks the (d, N, seed, flavor) grid for one system family. Every
cell derives its own run seed from a stable hash of its coordinates, so
cells are independent, reproducible in isolation, and safe to run
concurrently; finished cells persist as small CSVs and are skipped on
rerun. All output files carry a '#'-prefixed metadata header including the
config content hash.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import VERSION
from . import dataset, forecast, metrics, mlp
from .forecast import LearnedField, Trajectory, integrate, integrate_exact
from .metrics import ErrorRecord, energy_relative_error, state_error
from .mlp import NetSpec, save_params
from .systems import SystemSpec, hamiltonian, sample_initial_state
from .training import OptimizerConfig, train


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs, reproducible from the file alone."""

    family: str = "linear"
    d_list: tuple = (1, 2, 4, 6)
    n_list: tuple = (128, 512, 2048, 8192)
    seeds: int = 8
    flavors: tuple = ("nn", "hnn")
    energy_min: float = 0.2
    energy_max: float = 1.0
    energy_scale_with_d: bool = False
    a: float = 1.0
    b: float = 1.0
    kappa: float = 1.0
    train_T: float = 5.0
    train_dt: float = 0.1
    forecast_T: float = 20.0
    forecast_dt: float = 0.1
    forecast_count: int = 8
    method: str = "rk4"
    epochs: int = 16
    learning_rate: float = 1e-3
    batch_size: int = 1
    hidden_layers: int = 2
    width: int = 32
    smoothing: float = 0.75
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if not self.d_list or not self.n_list or not self.flavors:
            raise ValueError("d_list, n_list and flavors must be non-empty")
        if self.seeds < 1 or self.forecast_count < 1:
            raise ValueError("seeds and forecast_count must be >= 1")
        for fl in self.flavors:
            if fl not in ("nn", "hnn"):
                raise ValueError(f"unknown flavor {fl!r}")

    def system(self, d: int) -> SystemSpec:
        return SystemSpec(self.family, d, a=self.a, b=self.b, kappa=self.kappa)

    def energy_range(self, d: int = 1):
        """Training/forecast energy window. With energy_scale_with_d the
        bounds are per site and scale extensively, keeping the amplitude
        per coordinate comparable across dimensions."""
        scale = float(d) if self.energy_scale_with_d else 1.0
        return (self.energy_min * scale, self.energy_max * scale)


_INT_LISTS = {"d_list", "n_list"}
_STR_LISTS = {"flavors"}


def config_to_lines(config: ExperimentConfig) -> list[str]:
    """Canonical flat key = value serialization (sorted keys)."""
    lines = []
    for f in sorted(dataclasses.fields(config), key=lambda f: f.name):
        value = getattr(config, f.name)
        if f.name in _INT_LISTS or f.name in _STR_LISTS:
            text = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return lines


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text("\n".join(config_to_lines(config)) + "\n")


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse the flat key = value format; full-line '#' comments allowed."""
    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, text = line.partition("=")
        key = key.strip()
        text = text.strip()
        if not sep or key not in known:
            raise ValueError(f"{path}:{lineno}: unknown or malformed entry {raw!r}")
        values[key] = _parse_config_value(key, text)
    if overrides:
        values.update(overrides)
    return ExperimentConfig(**values)


def _parse_config_value(key: str, text: str):
    if key in _INT_LISTS:
        return tuple(int(v) for v in text.split(",") if v.strip())
    if key in _STR_LISTS:
        return tuple(v.strip() for v in text.split(",") if v.strip())
    default = getattr(ExperimentConfig, key)
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


_HASH_EXCLUDED = {"output_dir", "workers"}  # where/how, not what


def config_hash(config: ExperimentConfig) -> str:
    """Short content hash over the result-determining fields only, so the
    same experiment hashes identically wherever it is written and however
    many workers run it."""
    lines = [l for l in config_to_lines(config)
             if l.split(" = ")[0] not in _HASH_EXCLUDED]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def metadata_lines(config: ExperimentConfig, **extra) -> list[str]:
    lines = [f"hamlearn v{VERSION}", f"config_hash: {config_hash(config)}",
             f"method: {config.method}"]
    lines.extend(f"{k}: {v}" for k, v in extra.items())
    return lines


def cell_seed(family: str, d: int, n: int, seed_index: int, flavor: str) -> int:
    """Stable 64-bit run seed from the cell coordinates (blake2b of the
    canonical tuple string, platform independent)."""
    tag = f"{family}|{d}|{n}|{seed_index}|{flavor}".encode()
    return int.from_bytes(hashlib.blake2b(tag, digest_size=8).digest(), "big")


def _truncate(traj: Trajectory, k: int) -> Trajectory:
    return Trajectory(times=traj.times[:k], states=traj.states[:k],
                      method=traj.method, divergent=traj.divergent)


def run_cell(config: ExperimentConfig, family: str, d: int, n: int,
             seed_index: int, flavor: str) -> list[ErrorRecord]:
    """Generate data, train one model, forecast fresh initial conditions,
    and return one record per forecast. Deterministic in the cell tuple;
    training or forecast blowups come back as divergent records."""
    spec = SystemSpec(family, d, a=config.a, b=config.b, kappa=config.kappa)
    run_seed = cell_seed(family, d, n, seed_index, flavor)
    data_rng = np.random.default_rng([run_seed, 0])
    forecast_rng = np.random.default_rng([run_seed, 1])

    net_spec = NetSpec(
        input_dim=spec.phase_dim,
        output_dim=spec.phase_dim if flavor == "nn" else 1,
        hidden_layers=config.hidden_layers,
        width=config.width,
        seed=run_seed,
    )
    opt = OptimizerConfig(
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        epochs=config.epochs,
        seed=run_seed,
    )

    records = []
    try:
        _, pairs = dataset.generate_training_set(
            spec, config.energy_range(d), config.train_T, config.train_dt,
            n, flavor, data_rng,
        )
        report = train(net_spec, pairs, opt)
        field = LearnedField(flavor=flavor, params=report.params, d=d)
        cost = float(report.epoch_costs[-1])
    except Exception:
        # unusable model: every requested forecast becomes a capped record
        for _ in range(config.forecast_count):
            records.append(ErrorRecord(
                family=family, d=d, N=n, seed=seed_index, flavor=flavor,
                method=config.method, dE_over_E=metrics.DIVERGENT_ERROR_CAP,
                dr=metrics.DIVERGENT_ERROR_CAP, cost=math.nan, divergent=True,
            ))
        return records

    for _ in range(config.forecast_count):
        y0 = sample_initial_state(spec, config.energy_range(d), forecast_rng)
        traj = integrate(field, y0, config.forecast_T, config.forecast_dt,
                         method=config.method)
        reference = integrate_exact(spec, y0, config.forecast_T,
                                    config.forecast_dt, substeps=10)
        d_e = energy_relative_error(spec, traj)
        d_r = state_error(traj, _truncate(reference, len(traj)))
        records.append(ErrorRecord(
            family=family, d=d, N=n, seed=seed_index, flavor=flavor,
            method=config.method, dE_over_E=d_e, dr=d_r, cost=cost,
            divergent=traj.divergent,
        ))
    return records


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _cell_path(cells_dir: Path, family: str, d: int, n: int, seed: int,
               flavor: str) -> Path:
    return cells_dir / f"{family}_d{d}_N{n}_s{seed}_{flavor}.csv"


def _run_and_store(args) -> str:
    config, family, d, n, seed, flavor, path = args
    records = run_cell(config, family, d, n, seed, flavor)
    rows = [",".join(metrics.RECORD_COLUMNS)]
    rows.extend(",".join(r.csv_row()) for r in records)
    _atomic_write(Path(path), "\n".join(rows) + "\n")
    return str(path)


@dataclass(frozen=True)
class SweepResult:
    records_path: Path
    surface_paths: dict
    records: list


def sweep(config: ExperimentConfig, progress=None) -> SweepResult:
    """Run every grid cell (skipping ones already on disk), then write the
    canonical records CSV and one mean-error surface per flavor."""
    out_dir = Path(config.output_dir)
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for d in config.d_list:
        for n in config.n_list:
            for seed in range(config.seeds):
                for flavor in config.flavors:
                    path = _cell_path(cells_dir, config.family, d, n, seed, flavor)
                    if not path.exists():
                        tasks.append((config, config.family, d, n, seed, flavor, path))

    if config.workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            for i, _ in enumerate(pool.map(_run_and_store, tasks)):
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, task in enumerate(tasks):
            _run_and_store(task)
            if progress:
                progress(i + 1, len(tasks))

    records = []
    for d in config.d_list:
        for n in config.n_list:
            for seed in range(config.seeds):
                for flavor in config.flavors:
                    path = _cell_path(cells_dir, config.family, d, n, seed, flavor)
                    records.extend(metrics.read_records_csv(path))

    records_path = out_dir / "records.csv"
    header = metadata_lines(config)
    rows = ["# " + line for line in header]
    rows.append(",".join(metrics.RECORD_COLUMNS))
    rows.extend(",".join(r.csv_row()) for r in records)
    _atomic_write(records_path, "\n".join(rows) + "\n")

    surface_paths = {}
    for flavor in config.flavors:
        grid = surface_from_records(records, flavor,
                                    d_values=config.d_list, n_values=config.n_list)
        path = out_dir / f"surface_{flavor}.csv"
        write_surface_csv(grid, path, header_lines=metadata_lines(
            config, flavor=flavor, cell_statistic="mean dE_over_E"))
        surface_paths[flavor] = path
    return SweepResult(records_path=records_path, surface_paths=surface_paths,
                       records=records)


# ---------------------------------------------------------------------------
# surfaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceGrid:
    """Per-(d, N) cell values on the sweep axes; values[i, j] pairs
    d_values[i] with n_values[j]."""

    d_values: tuple
    n_values: tuple
    values: np.ndarray
    smoothing: float = 0.0


def surface_from_records(records, flavor: str, d_values=None, n_values=None) -> SurfaceGrid:
    """Mean dE_over_E over all (seed, forecast) records per grid cell.
    Axes default to the sorted values present in the records."""
    if d_values is None:
        d_values = tuple(sorted({r.d for r in records if r.flavor == flavor}))
    else:
        d_values = tuple(d_values)
    if n_values is None:
        n_values = tuple(sorted({r.N for r in records if r.flavor == flavor}))
    else:
        n_values = tuple(n_values)
    values = np.full((len(d_values), len(n_values)), np.nan)
    for i, d in enumerate(d_values):
        for j, n in enumerate(n_values):
            errs = [r.dE_over_E for r in records
                    if r.flavor == flavor and r.d == d and r.N == n]
            if errs:
                values[i, j] = float(np.mean(errs))
    return SurfaceGrid(d_values=d_values, n_values=n_values, values=values)


def gaussian_smooth(values: np.ndarray, width: float) -> np.ndarray:
    """Normalized Gaussian smoothing with distances measured in grid cells
    (axes are index-uniform in (d, log2 N)); width 0 is the identity.
    Weights renormalize over the grid, so constant fields are preserved
    exactly and edges are unbiased. NaN cells are ignored."""
    values = np.asarray(values, dtype=np.float64)
    if width == 0.0:
        return values.copy()
    if width < 0:
        raise ValueError("smoothing width must be >= 0")
    if values.ndim == 1:
        return gaussian_smooth(values[None, :], width)[0]
    ni, nj = values.shape
    finite = np.isfinite(values)
    out = np.full_like(values, np.nan)
    ii = np.arange(ni)[:, None]
    jj = np.arange(nj)[None, :]
    for i in range(ni):
        for j in range(nj):
            if not finite[i, j]:
                continue
            w = np.exp(-((ii - i) ** 2 + (jj - j) ** 2) / (2.0 * width * width))
            w = np.where(finite, w, 0.0)
            out[i, j] = np.sum(w * np.where(finite, values, 0.0)) / np.sum(w)
    return out


def ratio_surface(grid_nn: SurfaceGrid, grid_hnn: SurfaceGrid,
                  smoothing: float = 0.0) -> SurfaceGrid:
    """Elementwise mean-error ratio (conventional over Hamiltonian), then
    Gaussian smoothing in grid-cell coordinates."""
    if grid_nn.d_values != grid_hnn.d_values or grid_nn.n_values != grid_hnn.n_values:
        raise ValueError("surface axes do not match")
    ratio = grid_nn.values / grid_hnn.values
    return SurfaceGrid(
        d_values=grid_nn.d_values,
        n_values=grid_nn.n_values,
        values=gaussian_smooth(ratio, smoothing),
        smoothing=smoothing,
    )


def write_surface_csv(grid: SurfaceGrid, path, header_lines=()) -> None:
    rows = [f"# {line}" for line in header_lines]
    rows.append(f"# smoothing_width: {grid.smoothing}")
    rows.append("d,N,value")
    for i, d in enumerate(grid.d_values):
        for j, n in enumerate(grid.n_values):
            rows.append(f"{d},{n},{repr(float(grid.values[i, j]))}")
    _atomic_write(Path(path), "\n".join(rows) + "\n")


def read_surface_csv(path) -> SurfaceGrid:
    smoothing = 0.0
    triples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "smoothing_width:" in line:
                    smoothing = float(line.split(":", 1)[1])
                continue
            if not line or line.startswith("d,"):
                continue
            d, n, v = line.split(",")
            triples.append((int(d), int(n), float(v)))
    d_values = tuple(sorted({t[0] for t in triples}))
    n_values = tuple(sorted({t[1] for t in triples}))
    values = np.full((len(d_values), len(n_values)), np.nan)
    for d, n, v in triples:
        values[d_values.index(d), n_values.index(n)] = v
    return SurfaceGrid(d_values=d_values, n_values=n_values, values=values,
                       smoothing=smoothing)


def mean_error_by_n(records, flavor: str, d: int, family: str | None = None):
    """(N, mean dE_over_E) pairs sorted by N, for power-law fitting."""
    by_n: dict = {}
    for r in records:
        if r.flavor != flavor or r.d != d:
            continue
        if family is not None and r.family != family:
            continue
        by_n.setdefault(r.N, []).append(r.dE_over_E)
    return [(n, float(np.mean(v))) for n, v in sorted(by_n.items())]


# ---------------------------------------------------------------------------
# map surface and drift experiment
# ---------------------------------------------------------------------------


def map_surface_export(field: LearnedField, bounds, resolution: int, path,
                       energy_max: float = 1.0, header_lines=()) -> None:
    """Sample a trained d=1 linear-oscillator model on a regular grid.

    Hamiltonian flavor: columns q, p, learned, target (the paraboloid
    (q^2+p^2)/2; the learned scalar carries an arbitrary additive
    constant). Conventional flavor: columns q, qdot, learned_1, learned_2,
    target_1, target_2 (the two planes qdot and -q). in_train_region flags
    points inside the disk reachable at the training energy ceiling.
    """
    if field.d != 1:
        raise ValueError(f"map surface needs a d=1 model, got d={field.d}")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi or resolution < 2:
        raise ValueError("need bounds lo < hi and resolution >= 2")
    axis = np.linspace(lo, hi, resolution)
    radius_sq = 2.0 * energy_max

    rows = [f"# {line}" for line in header_lines]
    if field.flavor == "hnn":
        rows.append("q,p,learned,target,in_train_region")
    else:
        rows.append("q,qdot,learned_1,learned_2,target_1,target_2,in_train_region")
    for q in map(float, axis):
        for v in map(float, axis):
            point = np.array([q, v])
            inside = int(q * q + v * v <= radius_sq)
            if field.flavor == "hnn":
                learned = float(mlp.forward(field.params, point)[0])
                target = 0.5 * (q * q + v * v)
                rows.append(f"{q!r},{v!r},{learned!r},{target!r},{inside}")
            else:
                out = mlp.forward(field.params, point)
                rows.append(
                    f"{q!r},{v!r},{float(out[0])!r},{float(out[1])!r},"
                    f"{v!r},{-q!r},{inside}"
                )
    _atomic_write(Path(path), "\n".join(rows) + "\n")


def default_drift_config() -> ExperimentConfig:
    """Matched single-model training setup for the d=1 linear drift run:
    short orbits sampled 128 times over one period, energies in [1e-3, 1],
    2^14 pairs, and a 16*pi forecast from (1, 0)."""
    return ExperimentConfig(
        family="linear",
        d_list=(1,),
        n_list=(16384,),
        seeds=1,
        flavors=("nn", "hnn"),
        energy_min=1e-3,
        energy_max=1.0,
        train_T=2.0 * math.pi,
        train_dt=2.0 * math.pi / 128.0,
        forecast_T=16.0 * math.pi,
        forecast_dt=16.0 * math.pi / 1024.0,
        forecast_count=1,
        output_dir="results/drift",
    )


def drift_experiment(config: ExperimentConfig) -> dict:
    """Train one model per flavor with matched parameters, forecast from
    (q, p) = (1, 0) over the long horizon, and export trajectory + energy
    series plus a near-exact baseline and a summary table."""
    if config.family != "linear" or config.d_list[0] != 1:
        raise ValueError("the drift experiment is defined for the d=1 linear oscillator")
    spec = config.system(1)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = config.n_list[0]
    y0 = np.array([1.0, 0.0])

    paths = {}
    summary = []
    for flavor in config.flavors:
        run_seed = cell_seed(config.family, 1, n, 0, flavor)
        data_rng = np.random.default_rng([run_seed, 0])
        _, pairs = dataset.generate_training_set(
            spec, config.energy_range(1), config.train_T, config.train_dt,
            n, flavor, data_rng,
        )
        net_spec = NetSpec(
            input_dim=2, output_dim=2 if flavor == "nn" else 1,
            hidden_layers=config.hidden_layers, width=config.width,
            seed=run_seed,
        )
        opt = OptimizerConfig(
            learning_rate=config.learning_rate, batch_size=config.batch_size,
            epochs=config.epochs, seed=run_seed,
        )
        report = train(net_spec, pairs, opt)
        field = LearnedField(flavor=flavor, params=report.params, d=1)
        traj = integrate(field, y0, config.forecast_T, config.forecast_dt,
                         method=config.method)
        path = out_dir / f"drift_{flavor}.csv"
        forecast.write_trajectory_csv(traj, spec, path, header_lines=metadata_lines(
            config, flavor=flavor, final_cost=repr(float(report.epoch_costs[-1]))))
        paths[flavor] = path
        save_params(report.params, out_dir / f"params_{flavor}.txt")

        e0 = hamiltonian(spec, traj.states[0])
        e_final = hamiltonian(spec, traj.states[-1])
        summary.append((
            flavor,
            energy_relative_error(spec, traj),
            abs(e_final - e0) / abs(e0),
        ))

    baseline = integrate_exact(spec, y0, config.forecast_T, config.forecast_dt,
                               substeps=4)
    baseline_path = out_dir / "drift_exact.csv"
    forecast.write_trajectory_csv(baseline, spec, baseline_path,
                                  header_lines=metadata_lines(config, flavor="exact"))
    paths["exact"] = baseline_path
    summary.append((
        "exact",
        energy_relative_error(spec, baseline),
        abs(hamiltonian(spec, baseline.states[-1]) - hamiltonian(spec, baseline.states[0]))
        / abs(hamiltonian(spec, baseline.states[0])),
    ))

    summary_path = out_dir / "drift_summary.csv"
    rows = ["# " + line for line in metadata_lines(config)]
    rows.append("flavor,dE_over_E,final_dE_over_E")
    for flavor, mean_err, final_err in summary:
        rows.append(f"{flavor},{mean_err!r},{final_err!r}")
    _atomic_write(summary_path, "\n".join(rows) + "\n")
    paths["summary"] = summary_path
    return paths
