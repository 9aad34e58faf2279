"""Error metrics, aggregation, and power-law fitting."""

import numpy as np
import pytest

from hamlearn import metrics
from hamlearn.forecast import Trajectory
from hamlearn.metrics import (
    ErrorRecord,
    aggregate,
    energy_relative_error,
    fit_power_law,
    state_error,
)
from hamlearn.systems import linear


def circle_trajectory(n=100, radius=1.0, dt=0.1, divergent=False):
    t = dt * np.arange(n)
    states = radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    return Trajectory(times=t, states=states, method="rk4", divergent=divergent)


class TestEnergyRelativeError:

    def test_conserved_trajectory_is_zero(self):
        # axis-aligned unit states all have energy exactly 0.5
        states = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        traj = Trajectory(times=0.1 * np.arange(4), states=states, method="rk4")
        assert energy_relative_error(linear(1), traj) == 0.0

    def test_constant_offset(self):
        # E(t) = 1.1 E(0) for all later samples -> 0.1
        t = 0.1 * np.arange(10)
        states = np.zeros((10, 2))
        states[0] = [1.0, 0.0]                      # E = 0.5
        states[1:] = [np.sqrt(1.1), 0.0]            # E = 0.55
        traj = Trajectory(times=t, states=states, method="rk4")
        assert energy_relative_error(linear(1), traj) == pytest.approx(0.1, rel=1e-12)

    def test_linear_ramp_averages_to_half(self):
        # E(t) = E0 (1 + t/T) sampled uniformly over (0, T]
        n = 4000
        t = np.linspace(0.0, 1.0, n + 1)
        radii = np.sqrt(1.0 + t)
        states = np.stack([radii, np.zeros(n + 1)], axis=1)
        traj = Trajectory(times=t, states=states, method="rk4")
        err = energy_relative_error(linear(1), traj)
        assert err == pytest.approx(0.5, abs=1e-3)

    def test_zero_initial_energy_rejected(self):
        traj = Trajectory(times=np.array([0.0, 0.1]), states=np.zeros((2, 2)),
                          method="rk4")
        with pytest.raises(ValueError, match="initial energy"):
            energy_relative_error(linear(1), traj)

    def test_divergent_trajectory_capped(self):
        t = 0.1 * np.arange(3)
        states = np.array([[1.0, 0.0], [100.0, 0.0], [1000.0, 0.0]])
        traj = Trajectory(times=t, states=states, method="rk4", divergent=True)
        assert energy_relative_error(linear(1), traj) == 10.0

    def test_divergent_below_cap_keeps_value(self):
        t = 0.1 * np.arange(2)
        states = np.array([[1.0, 0.0], [np.sqrt(1.2), 0.0]])
        traj = Trajectory(times=t, states=states, method="rk4", divergent=True)
        assert energy_relative_error(linear(1), traj) == pytest.approx(0.2, rel=1e-12)

    def test_single_state_divergent_gets_cap(self):
        traj = Trajectory(times=np.array([0.0]), states=np.array([[1.0, 0.0]]),
                          method="rk4", divergent=True)
        assert energy_relative_error(linear(1), traj) == 10.0

    def test_invariant_under_time_relabeling(self):
        traj = circle_trajectory(n=50)
        shifted = Trajectory(times=traj.times + 7.0, states=traj.states,
                             method="rk4")
        assert energy_relative_error(linear(1), traj) == \
            energy_relative_error(linear(1), shifted)


class TestStateError:

    def test_identical_trajectories(self):
        traj = circle_trajectory()
        assert state_error(traj, traj) == 0.0

    def test_constant_offset_against_unit_reference(self):
        # reference on the unit circle (rms norm 1), forecast offset by a
        # constant vector of norm 0.5
        ref = circle_trajectory(n=200)
        forecast = Trajectory(times=ref.times, states=ref.states + [0.3, 0.4],
                              method="rk4")
        assert state_error(forecast, ref) == pytest.approx(0.5, rel=1e-12)

    def test_grid_mismatch_rejected(self):
        a = circle_trajectory(n=10)
        b = circle_trajectory(n=11)
        with pytest.raises(ValueError, match="grid"):
            state_error(a, b)


class TestAggregate:

    def test_small_list(self):
        agg = aggregate([1.0, 2.0, 3.0])
        assert agg.mean == 2.0
        assert agg.std == 1.0
        assert agg.count == 3
        assert agg.ci95 == pytest.approx(1.96 / np.sqrt(3), rel=1e-12)

    def test_singleton(self):
        agg = aggregate([5.0])
        assert (agg.mean, agg.std, agg.ci95, agg.count) == (5.0, 0.0, 0.0, 1)

    def test_constant_list_exact(self):
        agg = aggregate([0.1] * 32)
        assert agg.mean == 0.1
        assert agg.std == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            aggregate([])


class TestFitPowerLaw:

    def test_exact_recovery(self):
        ns = [2 ** k for k in range(5, 16)]
        points = [(n, 0.12 * n ** -0.22) for n in ns]
        c, alpha = fit_power_law(points)
        assert abs(c - 0.12) < 1e-10
        assert abs(alpha - (-0.22)) < 1e-10

    def test_constant_errors_flat(self):
        c, alpha = fit_power_law([(10, 0.3), (100, 0.3), (1000, 0.3)])
        assert alpha == pytest.approx(0.0, abs=1e-14)
        assert c == pytest.approx(0.3, rel=1e-12)

    def test_two_point_line(self):
        c, alpha = fit_power_law([(1, 1.0), (10, 0.1)])
        assert c == pytest.approx(1.0, rel=1e-12)
        assert alpha == pytest.approx(-1.0, rel=1e-12)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(17)
        ns = [2 ** k for k in range(5, 13)]
        errs = [0.5 * n ** -0.3 * np.exp(rng.normal(0, 0.2)) for n in ns]
        c1, a1 = fit_power_law(list(zip(ns, errs)))
        c2, a2 = fit_power_law([(n, 7.0 * e) for n, e in zip(ns, errs)])
        assert a2 == pytest.approx(a1, abs=1e-12)
        assert c2 == pytest.approx(7.0 * c1, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="positive"):
            fit_power_law([(10, 0.0), (100, 0.1)])

    def test_rejects_single_point(self):
        with pytest.raises(ValueError, match="two points"):
            fit_power_law([(10, 1.0)])


class TestRecordCsv:

    def records(self):
        return [
            ErrorRecord(family="linear", d=2, N=128, seed=0, flavor="hnn",
                        method="rk4", dE_over_E=0.015, dr=0.1,
                        cost=1e-4, divergent=False),
            ErrorRecord(family="linear", d=2, N=128, seed=0, flavor="nn",
                        method="rk4", dE_over_E=10.0, dr=5.0,
                        cost=2e-4, divergent=True),
        ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "records.csv"
        metrics.write_records_csv(self.records(), path, header_lines=["k: v"])
        loaded = metrics.read_records_csv(path)
        assert loaded == self.records()

    def test_schema_header(self, tmp_path):
        path = tmp_path / "records.csv"
        metrics.write_records_csv(self.records(), path)
        first = path.read_text().splitlines()[0]
        assert first == "family,d,N,seed,flavor,method,dE_over_E,dr,cost,divergent"
