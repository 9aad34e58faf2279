"""The three Hamiltonian system families: linear and quartic oscillators and
a chain of bistable wells with nearest-neighbor linear coupling.

States are flat float64 vectors [q_1..q_d, p_1..p_d] with unit masses, so
p doubles as the velocity. All functions are pure; the sampler takes an
explicit numpy Generator so parallel callers can use independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprgraph
from .exprgraph import Expr, Var

FAMILIES = ("linear", "quartic", "chain")
_FAMILY_CODES = {"linear": 0, "quartic": 1, "chain": 2}


class SamplingError(RuntimeError):
    """No state matching the requested energy range was found."""


@dataclass(frozen=True)
class PhaseState:
    """Positions and momenta as separate views of one phase-space point."""

    q: np.ndarray
    p: np.ndarray

    @classmethod
    def from_vector(cls, y) -> "PhaseState":
        y = np.asarray(y, dtype=np.float64)
        d = y.size // 2
        return cls(q=y[:d].copy(), p=y[d:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


@dataclass(frozen=True)
class SystemSpec:
    """Family tag, spatial dimension, and chain parameters (unused for the
    oscillators, where m = k = 1 is fixed)."""

    family: str
    d: int
    a: float = 1.0
    b: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.family == "chain" and not (self.a > 0 and self.b > 0 and self.kappa > 0):
            raise ValueError("chain parameters a, b, kappa must be positive")

    @property
    def phase_dim(self) -> int:
        return 2 * self.d

    @property
    def family_code(self) -> int:
        return _FAMILY_CODES[self.family]


def linear(d: int) -> SystemSpec:
    return SystemSpec("linear", d)


def quartic(d: int) -> SystemSpec:
    return SystemSpec("quartic", d)


def chain(d: int, a: float = 1.0, b: float = 1.0, kappa: float = 1.0) -> SystemSpec:
    return SystemSpec("chain", d, a=a, b=b, kappa=kappa)


def _split(spec: SystemSpec, state) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(state, dtype=np.float64)
    if y.shape != (spec.phase_dim,):
        raise ValueError(
            f"state has shape {y.shape}, expected ({spec.phase_dim},) for d={spec.d}"
        )
    return y[:spec.d], y[spec.d:]


def hamiltonian(spec: SystemSpec, state) -> float:
    """Total energy of a state."""
    q, p = _split(spec, state)
    kinetic = 0.5 * np.dot(p, p)
    if spec.family == "linear":
        return float(kinetic + 0.5 * np.dot(q, q))
    if spec.family == "quartic":
        return float(kinetic + 0.25 * np.sum(q ** 4))
    wells = -0.5 * spec.a * np.dot(q, q) + 0.25 * spec.b * np.sum(q ** 4)
    coupling = 0.5 * spec.kappa * np.sum(np.diff(q) ** 2)
    return float(kinetic + wells + coupling)


def exact_vector_field(spec: SystemSpec, state) -> np.ndarray:
    """Time derivative [qdot, pdot] of a state. qdot = p for every family;
    the chain's force uses free ends (ghost sites copy the edge sites, so
    the boundary coupling vanishes)."""
    q, p = _split(spec, state)
    if spec.family == "linear":
        pdot = -q
    elif spec.family == "quartic":
        pdot = -q ** 3
    else:
        qm = np.concatenate([q[:1], q[:-1]])
        qp = np.concatenate([q[1:], q[-1:]])
        pdot = spec.a * q - spec.b * q ** 3 + spec.kappa * (qm - 2.0 * q + qp)
    return np.concatenate([p, pdot])


def min_energy(spec: SystemSpec) -> float:
    """Global energy minimum: 0 for the oscillators, the all-same-well
    configuration for the chain."""
    if spec.family == "chain":
        return float(-spec.d * spec.a ** 2 / (4.0 * spec.b))
    return 0.0


_BISECT_TOL = 1e-10
_BISECT_MAX_ITER = 200


def sample_initial_state(spec: SystemSpec, energy_range, rng: np.random.Generator,
                         max_retries: int = 50) -> np.ndarray:
    """Draw a state with energy uniform in [e_lo, e_hi].

    A random direction in phase space is scaled until the target energy is
    reached (bisection on the ray). Retries with fresh directions bound the
    search; exhausting them raises SamplingError.
    """
    e_lo, e_hi = float(energy_range[0]), float(energy_range[1])
    if not (0.0 <= e_lo < e_hi):
        raise ValueError(f"need 0 <= e_lo < e_hi, got [{e_lo}, {e_hi}]")

    for _ in range(max_retries):
        u = rng.standard_normal(spec.phase_dim)
        norm = np.linalg.norm(u)
        if norm < 1e-12:
            continue
        u /= norm
        target = rng.uniform(e_lo, e_hi)
        if target <= 0.0:
            continue

        def ray_energy(r: float) -> float:
            return hamiltonian(spec, r * u)

        # bracket: energy grows without bound along every ray
        r_hi = 1.0
        ok = True
        for _ in range(200):
            if ray_energy(r_hi) >= target:
                break
            r_hi *= 2.0
        else:
            ok = False
        if not ok:
            continue
        r_lo = 0.0
        for _ in range(_BISECT_MAX_ITER):
            mid = 0.5 * (r_lo + r_hi)
            e_mid = ray_energy(mid)
            if abs(e_mid - target) <= _BISECT_TOL:
                r_lo = r_hi = mid
                break
            if e_mid < target:
                r_lo = mid
            else:
                r_hi = mid
        r = 0.5 * (r_lo + r_hi)
        state = r * u
        if e_lo <= hamiltonian(spec, state) <= e_hi:
            return state
    raise SamplingError(
        f"no state with energy in [{e_lo}, {e_hi}] found for {spec.family} "
        f"d={spec.d} after {max_retries} attempts"
    )


def hamiltonian_expression(spec: SystemSpec) -> tuple[Expr, list[Var], list[Var]]:
    """The exact Hamiltonian as an expression graph, for derivative
    cross-checks. Returns (H, q_vars, p_vars)."""
    qs = [Var(f"q{n}") for n in range(spec.d)]
    ps = [Var(f"p{n}") for n in range(spec.d)]
    h: Expr = exprgraph.Const(0.0)
    for pn in ps:
        h = h + pn * pn / 2
    if spec.family == "linear":
        for qn in qs:
            h = h + qn * qn / 2
    elif spec.family == "quartic":
        for qn in qs:
            h = h + qn ** 4 / 4
    else:
        for qn in qs:
            h = h + exprgraph.Const(-0.5 * spec.a) * qn ** 2 \
                  + exprgraph.Const(0.25 * spec.b) * qn ** 4
        for qa, qb in zip(qs, qs[1:]):
            diff = qa - qb
            h = h + exprgraph.Const(0.5 * spec.kappa) * diff * diff
    return h, qs, ps
