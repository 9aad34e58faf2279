"""Ground-truth orbit generation and training-pair assembly.

Orbits are integrated with classical RK4 on the exact field, sub-stepping
well below the sampling time so the stored samples sit on the true flow to
within a 1e-8 relative energy drift. Pair targets come from the exact
vector field at the sampled states, never from differencing the orbit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .systems import SystemSpec, exact_vector_field, hamiltonian, sample_initial_state

FLAVORS = ("nn", "hnn")

DRIFT_BUDGET = 1e-8
_BASE_SUBSTEPS = 100


class GenerationError(RuntimeError):
    """Orbit integration produced a non-finite state or missed the drift budget."""


@dataclass(frozen=True)
class Orbit:
    """Uniformly sampled trajectory of the exact flow.

    times[k] = (k+1)*dt: the first stored sample is one sampling interval
    past the initial condition and the last is at t = T, so an orbit of
    duration T carries exactly T/dt samples.
    """

    spec: SystemSpec
    times: np.ndarray    # (K,)
    states: np.ndarray   # (K, 2d)
    dt: float

    def __len__(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class TrainingPair:
    """One supervised example. For unit masses the two flavors carry the
    same numbers; the flavor tag records which loss they are meant for."""

    flavor: str
    input: np.ndarray    # (2d,)
    target: np.ndarray   # (2d,)


def generate_orbit(spec: SystemSpec, state0, T: float, dt: float,
                   method: str = "rk4") -> Orbit:
    """Integrate one orbit and sample it every dt up to time T.

    Sub-stepping starts at dt/100 and doubles (up to 8x) if the relative
    energy drift along the orbit exceeds 1e-8; a budget miss after that, or
    any non-finite state, raises GenerationError.
    """
    if method != "rk4":
        raise ValueError(f"unsupported orbit integrator {method!r}")
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    n_steps = round(T / dt)
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T) or n_steps < 1:
        raise ValueError(f"dt={dt} does not divide T={T}")

    y0 = np.asarray(state0, dtype=np.float64)
    if y0.shape != (spec.phase_dim,):
        raise ValueError(f"state0 has shape {y0.shape}, expected ({spec.phase_dim},)")
    e0 = hamiltonian(spec, y0)
    scale = max(abs(e0), 1e-12)

    substeps = _BASE_SUBSTEPS
    for _ in range(4):
        states = _kernels.exact_rollout(
            spec.family_code, spec.a, spec.b, spec.kappa, y0, n_steps, substeps, dt
        )
        bad = np.flatnonzero(~np.all(np.isfinite(states), axis=1))
        if bad.size:
            raise GenerationError(
                f"non-finite state at step {int(bad[0])} of {spec.family} orbit"
            )
        energies = np.array([hamiltonian(spec, s) for s in states])
        drift = np.max(np.abs(energies - e0)) / scale
        if drift < DRIFT_BUDGET:
            times = dt * np.arange(1, n_steps + 1)
            return Orbit(spec=spec, times=times, states=states[1:], dt=dt)
        substeps *= 2
    raise GenerationError(
        f"energy drift {drift:.2e} still above {DRIFT_BUDGET} at {substeps // 2} substeps"
    )


def make_training_pairs(orbits, flavor: str, n_pairs: int,
                        rng: np.random.Generator) -> list[TrainingPair]:
    """Sample n_pairs states uniformly without replacement across all orbit
    samples and attach exact-field targets.

    nn pairs:  input (q, qdot), target (qdot, qddot)
    hnn pairs: input (q, p),    target (qdot, pdot)
    With m = 1 these coincide numerically.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}, expected one of {FLAVORS}")
    orbits = list(orbits)
    if not orbits:
        raise ValueError("no orbits given")
    spec = orbits[0].spec
    pool = np.concatenate([o.states for o in orbits], axis=0)
    if n_pairs > pool.shape[0]:
        raise ValueError(
            f"requested {n_pairs} pairs but only {pool.shape[0]} samples available"
        )
    chosen = rng.choice(pool.shape[0], size=n_pairs, replace=False)
    pairs = []
    for idx in chosen:
        state = pool[idx]
        deriv = exact_vector_field(spec, state)
        pairs.append(TrainingPair(flavor=flavor, input=state.copy(), target=deriv))
    return pairs


def stack_pairs(pairs) -> tuple[str, np.ndarray, np.ndarray]:
    """Validate a homogeneous pair list and stack it into input/target
    matrices for batch training."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty pair list")
    flavor = pairs[0].flavor
    if any(p.flavor != flavor for p in pairs):
        raise ValueError("pairs mix flavors")
    X = np.stack([p.input for p in pairs]).astype(np.float64)
    Y = np.stack([p.target for p in pairs]).astype(np.float64)
    return flavor, X, Y


def generate_training_set(spec: SystemSpec, energy_range, T: float, dt: float,
                          n_pairs: int, flavor: str, rng: np.random.Generator
                          ) -> tuple[list[Orbit], list[TrainingPair]]:
    """Generate just enough independent orbits (each from a fresh
    energy-range draw) to cover n_pairs, then subsample the pairs."""
    per_orbit = round(T / dt)
    n_orbits = -(-n_pairs // per_orbit)  # ceil
    orbits = []
    for _ in range(n_orbits):
        y0 = sample_initial_state(spec, energy_range, rng)
        orbits.append(generate_orbit(spec, y0, T, dt))
    return orbits, make_training_pairs(orbits, flavor, n_pairs, rng)


def write_orbit_csv(orbit: Orbit, path, header_lines=()) -> None:
    """One row per sample: t, q1..qd, p1..pd."""
    d = orbit.spec.d
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"q{i+1}" for i in range(d)] + [f"p{i+1}" for i in range(d)])
        for t, state in zip(orbit.times, orbit.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in state])


def write_pairs_csv(pairs, path, header_lines=()) -> None:
    """One row per pair: flavor, input..., target...."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty pair list")
    dim = pairs[0].input.size
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["flavor"]
            + [f"in{i+1}" for i in range(dim)]
            + [f"target{i+1}" for i in range(dim)]
        )
        for p in pairs:
            writer.writerow(
                [p.flavor]
                + [repr(float(v)) for v in p.input]
                + [repr(float(v)) for v in p.target]
            )
