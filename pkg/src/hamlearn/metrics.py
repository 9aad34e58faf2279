"""Forecast error metrics, seed aggregation, and power-law fitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .forecast import Trajectory
from .systems import SystemSpec, hamiltonian

DIVERGENT_ERROR_CAP = 10.0

RECORD_COLUMNS = (
    "family", "d", "N", "seed", "flavor", "method",
    "dE_over_E", "dr", "cost", "divergent",
)


@dataclass(frozen=True)
class ErrorRecord:
    """One forecast's metrics; rows of the sweep CSV contract."""

    family: str
    d: int
    N: int
    seed: int
    flavor: str
    method: str
    dE_over_E: float
    dr: float
    cost: float
    divergent: bool

    def csv_row(self) -> list[str]:
        return [
            self.family, str(self.d), str(self.N), str(self.seed),
            self.flavor, self.method,
            repr(float(self.dE_over_E)), repr(float(self.dr)),
            repr(float(self.cost)), str(int(self.divergent)),
        ]


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    ci95: float
    count: int


def energy_relative_error(spec: SystemSpec, traj: Trajectory) -> float:
    """Time-averaged |E(t) - E(0)| / |E(0)| over the samples after t = 0.

    Divergent (truncated) trajectories are capped at 10 so a single blowup
    penalizes but cannot dominate a sweep mean; a trajectory too short to
    average gets the cap outright. E(0) = 0 leaves the metric undefined.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    e0 = hamiltonian(spec, traj.states[0])
    if e0 == 0.0:
        raise ValueError("initial energy is zero; relative error undefined")
    if len(traj) < 2:
        return DIVERGENT_ERROR_CAP
    energies = np.array([hamiltonian(spec, s) for s in traj.states[1:]])
    err = float(np.mean(np.abs(energies - e0) / abs(e0)))
    if traj.divergent:
        return min(err, DIVERGENT_ERROR_CAP)
    return err


def state_error(traj: Trajectory, reference: Trajectory) -> float:
    """Mean phase-space distance to the reference, normalized by the
    reference's root-mean-square state norm."""
    if len(traj) != len(reference) or not np.allclose(
        traj.times, reference.times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("trajectories are on different time grids")
    dist = np.linalg.norm(traj.states - reference.states, axis=1)
    rms = np.sqrt(np.mean(np.sum(reference.states ** 2, axis=1)))
    if rms == 0.0:
        raise ValueError("reference trajectory has zero norm")
    return float(np.mean(dist) / rms)


def aggregate(values) -> Aggregate:
    """Mean, sample standard deviation, and normal-approximation 95%
    confidence half-width (1.96 std / sqrt(n))."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty list")
    mean = float(np.mean(arr))
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    ci95 = 1.96 * std / np.sqrt(arr.size)
    return Aggregate(mean=mean, std=std, ci95=ci95, count=int(arr.size))


def fit_power_law(points) -> tuple[float, float]:
    """Least-squares fit of error = c * N**alpha on log-log axes.

    points is a sequence of (N, error); returns (c, alpha). Everything must
    be positive for the logs to exist.
    """
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit")
    if any(n <= 0 or e <= 0 for n, e in pts):
        raise ValueError("power-law fit needs positive N and error values")
    log_n = np.log([n for n, _ in pts])
    log_e = np.log([e for _, e in pts])
    alpha, intercept = np.polyfit(log_n, log_e, 1)
    return float(np.exp(intercept)), float(alpha)


def write_records_csv(records, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow(rec.csv_row())


def read_records_csv(path) -> list[ErrorRecord]:
    records = []
    with open(path, newline="") as fh:
        rows = [r for r in fh if not r.startswith("#")]
    reader = csv.DictReader(rows)
    for row in reader:
        records.append(ErrorRecord(
            family=row["family"], d=int(row["d"]), N=int(row["N"]),
            seed=int(row["seed"]), flavor=row["flavor"], method=row["method"],
            dE_over_E=float(row["dE_over_E"]), dr=float(row["dr"]),
            cost=float(row["cost"]), divergent=bool(int(row["divergent"])),
        ))
    return records
