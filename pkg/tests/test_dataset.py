"""Orbit generation fidelity and training-pair assembly."""

import numpy as np
import pytest

from hamlearn import dataset, systems
from hamlearn.dataset import TrainingPair, generate_orbit, make_training_pairs
from hamlearn.systems import chain, linear, quartic


class TestGenerateOrbit:

    def test_period_closure(self):
        # one full period of the unit-energy linear oscillator
        orbit = generate_orbit(linear(1), [1.0, 0.0], 2 * np.pi, 2 * np.pi / 64)
        np.testing.assert_allclose(orbit.states[-1], [1.0, 0.0], atol=1e-6)

    def test_sample_count_excludes_t0(self):
        orbit = generate_orbit(linear(1), [1.0, 0.0], 100.0, 0.1)
        assert len(orbit) == 1000
        assert orbit.times[0] == pytest.approx(0.1)
        assert orbit.times[-1] == pytest.approx(100.0)

    @pytest.mark.parametrize("spec,y0", [
        (linear(2), [1.0, 0.5, 0.0, -0.3]),
        (quartic(1), [1.3, 0.2]),
        (chain(3), [1.0, -1.0, 0.9, 0.1, 0.0, -0.2]),
    ])
    def test_energy_drift_under_budget(self, spec, y0):
        orbit = generate_orbit(spec, y0, 50.0, 0.1)
        e0 = systems.hamiltonian(spec, y0)
        drift = max(abs(systems.hamiltonian(spec, s) - e0) for s in orbit.states)
        assert drift / max(abs(e0), 1e-12) < 1e-8

    def test_rejects_non_dividing_dt(self):
        with pytest.raises(ValueError, match="divide"):
            generate_orbit(linear(1), [1.0, 0.0], 1.0, 0.3)

    def test_rejects_unknown_integrator(self):
        with pytest.raises(ValueError, match="integrator"):
            generate_orbit(linear(1), [1.0, 0.0], 1.0, 0.1, method="euler")


class TestMakeTrainingPairs:

    def orbits(self, spec, n=2, seed=0):
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(n):
            y0 = systems.sample_initial_state(spec, (0.2, 1.0), rng)
            out.append(generate_orbit(spec, y0, 10.0, 0.1))
        return out

    def test_linear_pair_content(self):
        # state (q, p) = (0, 1): qdot = 1, qddot = pdot = 0 for both flavors
        spec = linear(1)
        orbit = generate_orbit(spec, [0.0, 1.0], 0.1, 0.1)
        # use the exact state directly by building the pair set by hand
        state = np.array([0.0, 1.0])
        deriv = systems.exact_vector_field(spec, state)
        assert list(deriv) == [1.0, 0.0]
        assert orbit.states.shape == (1, 2)

    def test_quartic_target(self):
        deriv = systems.exact_vector_field(quartic(1), [1.0, 0.0])
        assert list(deriv) == [0.0, -1.0]

    def test_flavors_share_numbers(self):
        spec = linear(2)
        orbits = self.orbits(spec)
        nn = make_training_pairs(orbits, "nn", 64, np.random.default_rng(1))
        hnn = make_training_pairs(orbits, "hnn", 64, np.random.default_rng(1))
        for a, b in zip(nn, hnn):
            assert a.flavor == "nn" and b.flavor == "hnn"
            assert np.array_equal(a.input, b.input)
            assert np.array_equal(a.target, b.target)

    def test_targets_come_from_exact_field(self):
        spec = quartic(2)
        pairs = make_training_pairs(self.orbits(spec), "hnn", 32,
                                    np.random.default_rng(3))
        for p in pairs:
            np.testing.assert_allclose(
                p.target, systems.exact_vector_field(spec, p.input), atol=0
            )

    def test_deterministic_given_seed(self):
        orbits = self.orbits(linear(1))
        a = make_training_pairs(orbits, "nn", 16, np.random.default_rng(9))
        b = make_training_pairs(orbits, "nn", 16, np.random.default_rng(9))
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.input, pb.input)

    def test_insufficient_samples(self):
        orbits = [generate_orbit(linear(1), [1.0, 0.0], 1.0, 0.1)]
        with pytest.raises(ValueError, match="available"):
            make_training_pairs(orbits, "nn", 100, np.random.default_rng(0))

    def test_unknown_flavor(self):
        with pytest.raises(ValueError, match="flavor"):
            make_training_pairs(self.orbits(linear(1)), "cnn", 4,
                                np.random.default_rng(0))

    def test_without_replacement(self):
        orbits = [generate_orbit(linear(1), [1.0, 0.0], 5.0, 0.1)]
        pairs = make_training_pairs(orbits, "nn", 50, np.random.default_rng(2))
        rows = {tuple(p.input) for p in pairs}
        assert len(rows) == 50


class TestGenerateTrainingSet:

    def test_orbit_count_covers_pairs(self):
        spec = linear(1)
        orbits, pairs = dataset.generate_training_set(
            spec, (0.2, 1.0), 10.0, 0.1, 250, "hnn", np.random.default_rng(0)
        )
        assert len(orbits) == 3  # ceil(250 / 100)
        assert len(pairs) == 250

    def test_each_orbit_from_fresh_energy_draw(self):
        spec = linear(1)
        orbits, _ = dataset.generate_training_set(
            spec, (0.2, 1.0), 10.0, 0.1, 300, "nn", np.random.default_rng(4)
        )
        energies = {round(systems.hamiltonian(spec, o.states[0]), 6) for o in orbits}
        assert len(energies) == len(orbits)


class TestCsvExport:

    def test_orbit_csv(self, tmp_path):
        orbit = generate_orbit(linear(1), [1.0, 0.0], 1.0, 0.1)
        path = tmp_path / "orbit.csv"
        dataset.write_orbit_csv(orbit, path, header_lines=["meta: x"])
        lines = path.read_text().splitlines()
        assert lines[0] == "# meta: x"
        assert lines[1] == "t,q1,p1"
        assert len(lines) == 2 + 10

    def test_pairs_csv_round_numbers(self, tmp_path):
        pairs = [TrainingPair("nn", np.array([0.0, 1.0]), np.array([1.0, 0.0]))]
        path = tmp_path / "pairs.csv"
        dataset.write_pairs_csv(pairs, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "flavor,in1,in2,target1,target2"
        assert lines[1] == "nn,0.0,1.0,1.0,0.0"
