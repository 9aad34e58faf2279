"""System families: energies, vector fields, samplers, derivative cross-checks."""

import numpy as np
import pytest

from hamlearn import exprgraph as eg, systems
from hamlearn.systems import SystemSpec, chain, linear, quartic


class TestSpec:

    def test_rejects_unknown_family(self):
        with pytest.raises(ValueError, match="family"):
            SystemSpec("pendulum", 1)

    def test_rejects_nonpositive_chain_params(self):
        with pytest.raises(ValueError, match="positive"):
            chain(2, kappa=0.0)

    def test_phase_dim(self):
        assert quartic(3).phase_dim == 6


class TestHamiltonian:

    def test_linear_unit_displacement(self):
        assert systems.hamiltonian(linear(1), [1.0, 0.0]) == 0.5

    def test_quartic_unit_displacement(self):
        assert systems.hamiltonian(quartic(1), [1.0, 0.0]) == 0.25

    def test_chain_same_well_pair(self):
        # both masses at +1 with unit parameters: V = -1/4 each, no coupling
        spec = chain(2)
        assert systems.hamiltonian(spec, [1.0, 1.0, 0.0, 0.0]) == -0.5

    def test_chain_coupling_counts_interior_bonds_only(self):
        spec = chain(3, kappa=2.0)
        q = np.array([1.0, 0.0, 1.0])
        e = systems.hamiltonian(spec, np.concatenate([q, np.zeros(3)]))
        wells = (-0.5 + 0.25) * 2  # q = +-1 sites; q = 0 contributes nothing
        coupling = 0.5 * 2.0 * (1.0 + 1.0)
        assert e == pytest.approx(wells + coupling, abs=0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            systems.hamiltonian(linear(2), [1.0, 0.0])


class TestVectorField:

    def test_linear_restoring_force(self):
        f = systems.exact_vector_field(linear(1), [1.0, 0.0])
        assert list(f) == [0.0, -1.0]

    def test_quartic_cubic_force(self):
        f = systems.exact_vector_field(quartic(1), [2.0, 0.0])
        assert f[1] == -8.0

    def test_chain_equilibrium_in_shared_well(self):
        f = systems.exact_vector_field(chain(2), [1.0, 1.0, 0.0, 0.0])
        assert np.all(f == 0.0)

    def test_chain_with_zero_coupling_is_independent_wells(self):
        # kappa -> 0 limit realized with a tiny kappa times zero difference
        spec = chain(3, a=1.3, b=0.7, kappa=1e-30)
        rng = np.random.default_rng(5)
        y = rng.uniform(-2, 2, 6)
        f = systems.exact_vector_field(spec, y)
        q = y[:3]
        np.testing.assert_allclose(f[3:], 1.3 * q - 0.7 * q ** 3, rtol=1e-9)

    def test_chain_reversal_symmetry(self):
        # relabeling sites n -> d+1-n leaves the energy unchanged
        spec = chain(5, a=0.9, b=1.1, kappa=0.6)
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = rng.uniform(-2, 2, 5)
            p = rng.uniform(-2, 2, 5)
            e = systems.hamiltonian(spec, np.concatenate([q, p]))
            e_rev = systems.hamiltonian(spec, np.concatenate([q[::-1], p[::-1]]))
            assert e == pytest.approx(e_rev, rel=1e-14)

    def test_qdot_is_momentum_everywhere(self):
        rng = np.random.default_rng(1)
        for spec in (linear(3), quartic(2), chain(4)):
            y = rng.uniform(-1, 1, spec.phase_dim)
            f = systems.exact_vector_field(spec, y)
            np.testing.assert_array_equal(f[:spec.d], y[spec.d:])


class TestDerivativeCrossCheck:
    """The expression-graph gradient of each exact Hamiltonian must
    reproduce the hand-coded vector field: qdot = dH/dp, pdot = -dH/dq."""

    @pytest.mark.parametrize("spec", [
        linear(1), linear(3), quartic(1), quartic(2), chain(2), chain(5),
    ])
    def test_hamilton_recipe_matches_field(self, spec):
        h, qs, ps = systems.hamiltonian_expression(spec)
        rng = np.random.default_rng(42)
        for _ in range(100):
            y = rng.uniform(-2, 2, spec.phase_dim)
            res = eg.grad(h, qs + ps, y)
            assert res.value == pytest.approx(
                systems.hamiltonian(spec, y), rel=1e-12, abs=1e-12
            )
            field = systems.exact_vector_field(spec, y)
            dq = np.array([res.partials[v] for v in qs])
            dp = np.array([res.partials[v] for v in ps])
            np.testing.assert_allclose(dp, field[:spec.d], rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(-dq, field[spec.d:], rtol=1e-12, atol=1e-12)


class TestSampler:

    def test_linear_level_set_is_circle(self):
        spec = linear(1)
        rng = np.random.default_rng(0)
        y = systems.sample_initial_state(spec, (0.5, 0.5 + 1e-9), rng)
        assert np.dot(y, y) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("spec,lo,hi", [
        (linear(2), 0.0, 1.0),
        (quartic(3), 0.1, 2.0),
        (chain(4), 0.2, 1.0),
        (linear(6), 0.0, 100.0),
    ])
    def test_energy_always_in_range(self, spec, lo, hi):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            y = systems.sample_initial_state(spec, (lo, hi), rng)
            e = systems.hamiltonian(spec, y)
            assert lo <= e <= hi

    def test_same_seed_same_state(self):
        spec = chain(3)
        a = systems.sample_initial_state(spec, (0.1, 1.0), np.random.default_rng(7))
        b = systems.sample_initial_state(spec, (0.1, 1.0), np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError, match="e_lo"):
            systems.sample_initial_state(linear(1), (1.0, 0.5), np.random.default_rng(0))

    def test_min_energy(self):
        assert systems.min_energy(linear(3)) == 0.0
        assert systems.min_energy(chain(4, a=1.0, b=1.0)) == -1.0


class TestPhaseState:

    def test_vector_round_trip(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        state = systems.PhaseState.from_vector(y)
        np.testing.assert_array_equal(state.q, [1.0, 2.0])
        np.testing.assert_array_equal(state.p, [3.0, 4.0])
        np.testing.assert_array_equal(state.vector, y)
