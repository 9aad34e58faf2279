"""Rolling models forward in time.

A LearnedField wraps trained parameters with a flavor tag; the conventional
flavor reads the field straight off the forward pass, the Hamiltonian
flavor differentiates the scalar output through Hamilton's recipe. Rollouts
are fixed-step Euler or RK4 and truncate (flagged divergent) if the state
leaves the finite region instead of aborting, so failed forecasts still
produce records.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels, mlp
from .mlp import MlpParams
from .systems import SystemSpec, hamiltonian

DIVERGENCE_CAP = 1e6
METHODS = ("euler", "rk4")


@dataclass(frozen=True)
class LearnedField:
    flavor: str
    params: MlpParams
    d: int

    def __post_init__(self):
        if self.flavor not in ("nn", "hnn"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.params.input_dim != 2 * self.d:
            raise ValueError(
                f"params take {self.params.input_dim} inputs, need {2 * self.d}"
            )
        expected = 2 * self.d if self.flavor == "nn" else 1
        if self.params.output_dim != expected:
            raise ValueError(
                f"{self.flavor} field needs output_dim={expected}, "
                f"got {self.params.output_dim}"
            )


def field_from_params(params: MlpParams) -> LearnedField:
    """Infer the flavor from the parameter shapes (scalar output means
    Hamiltonian flavor; input dimension is always 2d >= 2)."""
    flavor = "hnn" if params.output_dim == 1 else "nn"
    return LearnedField(flavor=flavor, params=params, d=params.input_dim // 2)


@dataclass(frozen=True)
class Trajectory:
    """Fixed-grid rollout. A divergent trajectory holds only the states up
    to the last finite one; times and states stay aligned."""

    times: np.ndarray
    states: np.ndarray
    method: str
    divergent: bool = False

    def __len__(self):
        return self.states.shape[0]


def learned_vector_field(field: LearnedField, state) -> np.ndarray:
    """[qdot, pdot] predicted by the model at one state."""
    y = np.asarray(state, dtype=np.float64)
    if y.shape != (2 * field.d,):
        raise ValueError(f"state has shape {y.shape}, expected ({2 * field.d},)")
    if field.flavor == "nn":
        return mlp.forward(field.params, y)
    g = mlp.input_gradient(field.params, y)
    return np.concatenate([g[field.d:], -g[:field.d]])


def _grid(T: float, dt: float) -> tuple[int, float]:
    """Fixed-step grid spanning [0, T]: the step count is the nearest
    integer to T/dt and the step is nudged so the final sample lands on T
    exactly (a rollout 'over one period' must close on the period)."""
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    n_steps = max(1, round(T / dt))
    return n_steps, T / n_steps


def integrate(field: LearnedField, state0, T: float, dt: float,
              method: str = "rk4") -> Trajectory:
    """Roll the learned field from state0 over [0, T] on a dt grid
    (T/dt + 1 states including t = 0)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    n_steps, step = _grid(T, dt)
    y0 = np.asarray(state0, dtype=np.float64)
    flavor = _kernels.NN if field.flavor == "nn" else _kernels.HNN
    sizes = np.asarray(field.params.layer_sizes, dtype=np.int64)
    states, n_valid = _kernels.learned_rollout(
        flavor, mlp.pack(field.params), sizes, y0, n_steps, step,
        method == "rk4", DIVERGENCE_CAP,
    )
    divergent = n_valid < n_steps + 1
    times = step * np.arange(n_valid)
    return Trajectory(times=times, states=states[:n_valid],
                      method=method, divergent=divergent)


def integrate_exact(spec: SystemSpec, state0, T: float, dt: float,
                    method: str = "rk4", substeps: int = 1) -> Trajectory:
    """Reference rollout of the exact field on the same grid conventions.

    substeps > 1 refines each dt interval (used for near-exact baselines);
    only RK4 is supported here because references should not carry
    first-order integrator error.
    """
    if method != "rk4":
        raise ValueError("exact references use rk4")
    n_steps, step = _grid(T, dt)
    y0 = np.asarray(state0, dtype=np.float64)
    if y0.shape != (spec.phase_dim,):
        raise ValueError(f"state0 has shape {y0.shape}, expected ({spec.phase_dim},)")
    states = _kernels.exact_rollout(
        spec.family_code, spec.a, spec.b, spec.kappa, y0, n_steps, substeps, step
    )
    times = step * np.arange(n_steps + 1)
    return Trajectory(times=times, states=states, method=method)


def write_trajectory_csv(traj: Trajectory, spec: SystemSpec, path,
                         header_lines=()) -> None:
    """One row per sample: t, q..., p..., energy (against the true system)."""
    d = spec.d
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["t"] + [f"q{i+1}" for i in range(d)] + [f"p{i+1}" for i in range(d)]
            + ["energy"]
        )
        for t, state in zip(traj.times, traj.states):
            writer.writerow(
                [repr(float(t))]
                + [repr(float(v)) for v in state]
                + [repr(hamiltonian(spec, state))]
            )
