import math
from types import SimpleNamespace

import numpy as np
import pytest

from hjdirac import dynamics as dyn
from hjdirac import statmech as sm
from hjdirac.errors import DegenerateData, NotIntegrable, TooLarge, UsageError


class TestConfigAndDensity:
    def test_temperature_eigenvalue_relation(self):
        cfg = sm.EnsembleConfig(n=10, m0=2.0, T=4.0, kB=0.5)
        assert cfg.k == 1.0 / (cfg.kB * cfg.T)
        assert cfg.sigma2 == cfg.kB * cfg.T / (2.0 * cfg.m0)

    def test_invalid_config(self):
        with pytest.raises(UsageError):
            sm.EnsembleConfig(n=10, m0=1.0, T=0.0)
        with pytest.raises(UsageError):
            sm.EnsembleConfig(n=-1, m0=1.0, T=1.0)
        with pytest.raises(UsageError):
            sm.config_from_dict({"n": 1, "m0": 1.0, "T": 1.0, "beta": 2.0})

    def test_density_point_values(self):
        cfg = sm.EnsembleConfig(n=1, m0=1.0, T=2.0)
        assert sm.mb_density(cfg, [0.0, 0.0, 0.0]) == 1.0
        assert abs(sm.mb_density(cfg, [1.0, 0.0, 0.0]) - math.exp(-0.25)) < 1e-15

    def test_probability_density_is_squared_amplitude(self):
        cfg = sm.EnsembleConfig(n=1, m0=1.3, T=0.8)
        v = np.array([0.2, -0.4, 0.1])
        norm = (2.0 * np.pi * cfg.sigma2) ** -1.5
        assert abs(sm.mb_probability_density(cfg, v)
                   - norm * sm.mb_density(cfg, v) ** 2) < 1e-15

    def test_probability_density_variance(self):
        # quadrature second moment of the squared amplitude, one axis
        cfg = sm.EnsembleConfig(n=1, m0=1.0, T=2.0)
        u = np.linspace(-12.0, 12.0, 2001)
        pts = np.zeros(u.shape + (3,))
        pts[:, 0] = u
        dens = sm.mb_probability_density(cfg, pts)
        marginal_var = np.trapezoid(u ** 2 * dens, u) / np.trapezoid(dens, u)
        assert abs(marginal_var - cfg.sigma2) < 1e-10


class TestSampling:
    def test_variance_within_three_se(self):
        cfg = sm.EnsembleConfig(n=10 ** 6, m0=1.0, T=2.0, seed=11)
        mom = sm.sample_mb(cfg).moments()
        for var in mom["variance"]:
            assert abs(var - cfg.sigma2) < 3.0 * mom["variance_se"]
        assert mom["within_3se"]

    def test_mean_and_kurtosis_gaussian(self):
        cfg = sm.EnsembleConfig(n=200000, m0=1.0, T=1.0, seed=2)
        mom = sm.sample_mb(cfg).moments()
        sigma = math.sqrt(cfg.sigma2)
        for mu in mom["mean"]:
            assert abs(mu) < 4.0 * sigma / math.sqrt(cfg.n)
        for kurt in mom["excess_kurtosis"]:
            assert abs(kurt) < 3.0 * mom["kurtosis_se"]

    def test_population_variance_tracks_temperature(self):
        base = None
        for i, temp in enumerate((1.0, 2.0, 4.0)):
            cfg = sm.EnsembleConfig(n=400000, m0=1.0, T=temp, seed=40 + i)
            var = sm.sample_mb(cfg).velocities.var()
            base = var if base is None else base
            assert abs(var / base - temp) < 0.02 * temp

    def test_cold_limit_collapses(self):
        cfg = sm.EnsembleConfig(n=1000, m0=1.0, T=1e-12, seed=0)
        sample = sm.sample_mb(cfg)
        assert np.abs(sample.velocities).max() < 1e-4
        assert (sample.energies >= 0.0).all()

    def test_seed_determinism_across_worker_counts(self, monkeypatch):
        cfg = sm.EnsembleConfig(n=200000, m0=1.0, T=2.0, seed=3)
        monkeypatch.setenv("HJDIRAC_THREADS", "1")
        a = sm.sample_mb(cfg).velocities
        monkeypatch.setenv("HJDIRAC_THREADS", "4")
        b = sm.sample_mb(cfg).velocities
        assert np.array_equal(a, b)

    def test_energy_definition(self):
        cfg = sm.EnsembleConfig(n=500, m0=1.7, T=1.0, seed=1)
        sample = sm.sample_mb(cfg)
        expected = 0.5 * cfg.m0 * (sample.velocities ** 2).sum(axis=1)
        assert np.array_equal(sample.energies, expected)

    def test_csv_outputs_deterministic(self, tmp_path):
        cfg = sm.EnsembleConfig(n=300, m0=1.0, T=2.0, seed=6)
        sample = sm.sample_mb(cfg)
        out = tmp_path / "samples.csv"
        sm.write_samples_csv(sample, out)
        first = out.read_bytes()
        assert first.decode().splitlines()[0] == "index,vx,vy,vz,energy"
        sm.write_samples_csv(sm.sample_mb(cfg), out)
        assert out.read_bytes() == first
        hist = tmp_path / "hist.csv"
        sm.write_histogram_csv(sample, hist, bins=20)
        lines = hist.read_text().splitlines()
        assert lines[0] == "bin_lo,bin_hi,count,expected"
        assert len(lines) == 21
        counts = sum(int(row.split(",")[2]) for row in lines[1:])
        assert counts == cfg.n  # 5 sigma window holds every draw here


class TestSliceNormalize:
    def test_gaussian_constant(self):
        res = sm.slice_normalize(
            lambda x, t: np.exp(-(np.asarray(x) ** 2).sum(axis=-1)),
            0.0, sm.grid_cube(6.0, 49))
        assert abs(res.constant - np.pi ** 1.5) < 1e-6
        pt = np.array([0.3, -0.2, 0.5])
        assert abs(res.density(pt)
                   - np.exp(-(pt ** 2).sum()) / np.pi ** 1.5) < 1e-12

    def test_stationary_constant_matches_across_slices(self):
        psi2 = lambda x, t: np.exp(-(np.asarray(x) ** 2).sum(axis=-1))
        c0 = sm.slice_normalize(psi2, 0.0, sm.grid_cube(6.0, 49)).constant
        c1 = sm.slice_normalize(psi2, 1.0, sm.grid_cube(6.0, 49)).constant
        assert abs(c0 - c1) < 1e-10

    def test_refinement_halving_is_quadratic(self):
        kink = lambda x, t: np.exp(-2.0 * np.abs(np.asarray(x)).sum(axis=-1))
        e1 = abs(sm.slice_normalize(kink, 0.0, sm.grid_cube(8.0, 65)).constant - 1.0)
        e2 = abs(sm.slice_normalize(kink, 0.0, sm.grid_cube(8.0, 129)).constant - 1.0)
        assert 3.5 < e1 / e2 < 4.5

    def test_non_decaying_density_rejected(self):
        flat = lambda x, t: np.ones(np.asarray(x).shape[:-1])
        with pytest.raises(NotIntegrable):
            sm.slice_normalize(flat, 0.0, sm.grid_cube(2.0, 17))

    def test_bad_grid(self):
        with pytest.raises(UsageError):
            sm.grid_cube(0.0, 10)
        with pytest.raises(UsageError):
            sm.grid_cube(1.0, 1)


class TestPartitionEnumeration:
    def test_two_level_hand_oracles(self):
        be = sm.partition_enumerate([0.0, 1.0], 2, 1.0, "BE")
        assert be.occupations == [(0, 2), (1, 1), (2, 0)]
        assert abs(be.z - (1.0 + math.exp(-1.0) + math.exp(-2.0))) < 1e-15

        fd = sm.partition_enumerate([0.0, 1.0], 2, 1.0, "FD")
        assert fd.occupations == [(1, 1)]
        assert fd.probabilities[0] == 1.0

        mb = sm.partition_enumerate([0.0, 1.0], 2, 1.0, "MB-distinguishable")
        assert abs(mb.z - (1.0 + math.exp(-1.0)) ** 2) < 1e-14

    @pytest.mark.parametrize("L,n", [(5, 4), (7, 3), (4, 4)])
    def test_state_counts_and_factorization(self, L, n):
        levels = np.linspace(0.0, 1.0, L)
        be = sm.partition_enumerate(levels, n, 0.7, "BE")
        assert len(be.occupations) == math.comb(n + L - 1, n)
        fd = sm.partition_enumerate(levels, n, 0.7, "FD")
        assert len(fd.occupations) == math.comb(L, n)
        mb = sm.partition_enumerate(levels, n, 0.7, "MB")
        assert abs(mb.z - mb.single_particle_z() ** n) < 1e-12 * mb.z

    def test_probabilities_normalized_and_ordered(self):
        table = sm.partition_enumerate([0.0, 0.3, 0.9], 3, 1.2, "BE")
        assert abs(table.probabilities.sum() - 1.0) < 1e-14
        assert table.occupations == sorted(table.occupations)
        assert all(sum(occ) == 3 for occ in table.occupations)

    def test_exclusion_bounds_occupation(self):
        table = sm.partition_enumerate([0.0, 0.5, 1.0], 2, 1.0, "FD")
        assert all(max(occ) <= 1 for occ in table.occupations)
        with pytest.raises(UsageError):
            sm.partition_enumerate([0.0, 1.0], 3, 1.0, "FD")

    def test_enumeration_bound(self):
        with pytest.raises(TooLarge):
            sm.partition_enumerate(np.zeros(13), 2, 1.0, "BE")
        with pytest.raises(TooLarge):
            sm.partition_enumerate([0.0, 1.0], 13, 1.0, "BE")
        with pytest.raises(UsageError):
            sm.partition_enumerate([0.0], 1, 1.0, "boltzmann-ish")

    def test_occupancy_csv(self, tmp_path):
        table = sm.partition_enumerate([0.0, 1.0], 2, 1.0, "BE")
        out = tmp_path / "occ.csv"
        sm.write_occupancy_csv(table, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "state,energy,probability"
        assert lines[1].startswith("0;2,")
        assert len(lines) == 4


class TestArrivalEstimator:
    def test_unit_gaps(self):
        assert sm.exp_arrival_estimator(sm.ArrivalData(np.arange(5.0))) == 1.0

    def test_two_gap_example(self):
        data = sm.ArrivalData(np.array([0.0, 0.5, 3.5]))
        assert abs(sm.exp_arrival_estimator(data) - 2.0 / 3.5) < 1e-15

    def test_scale_equivariance(self):
        times = np.array([0.0, 0.4, 1.1, 2.9, 3.0])
        base = sm.exp_arrival_estimator(sm.ArrivalData(times))
        scaled = sm.exp_arrival_estimator(sm.ArrivalData(4.0 * times))
        assert scaled == base / 4.0

    def test_recovers_rate_within_three_se(self):
        theta = 2.5
        data = sm.synthetic_arrivals(theta, 10 ** 5, seed=9)
        est = sm.exp_arrival_estimator(data)
        assert abs(est - theta) < 3.0 * theta / math.sqrt(10 ** 5)

    def test_degenerate_and_invalid(self):
        with pytest.raises(DegenerateData):
            sm.exp_arrival_estimator(sm.ArrivalData(np.array([2.0, 2.0, 2.0])))
        with pytest.raises(UsageError):
            sm.ArrivalData(np.array([1.0]))
        with pytest.raises(UsageError):
            sm.ArrivalData(np.array([0.0, 2.0, 1.0]))
        with pytest.raises(UsageError):
            sm.synthetic_arrivals(-1.0, 10)


class TestEigenSolutionCheck:
    def test_geodesic_momentum_is_stationary(self):
        model = dyn.free_particle_model(1.0)
        traj = dyn.integrate(model, np.zeros(4), np.array([0.0, 0.4, -0.3, 0.2]),
                             2.0, step=1e-2)
        report = sm.eigen_solution_check(0.5, traj)
        assert report["psi_constant"]
        assert report["invariant_drift"] == 0.0
        assert report["chain_rule_residual"] < 1e-12

    def test_mass_shell_preserving_flow(self):
        # proper-time projectile flow keeps p.p fixed, so psi sits still
        model = dyn.projectile_model(1.0, 0.5, 1.0, 0.2)
        p0 = model.reference.tangent(0.0)
        traj = dyn.integrate(model, np.zeros(4), p0, 2.0, step=1e-3)
        report = sm.eigen_solution_check(0.5, traj)
        assert report["psi_constant"]
        assert report["eigen_residual"] < 1e-8
        assert report["chain_rule_residual"] < 1e-6

    def test_canonical_flow_moves_invariant(self):
        model = dyn.projectile_model(1.0, 0.5, 1.0, 0.2)
        p0 = model.reference.tangent(0.0)
        traj = dyn.integrate(model, np.zeros(4), p0, 2.0, step=1e-3,
                             canonical=True)
        report = sm.eigen_solution_check(0.5, traj)
        assert not report["psi_constant"]
        assert report["invariant_drift"] > 1e-2
        assert report["chain_rule_residual"] < 1e-6

    def test_hyperbolic_momentum_constant_invariant(self):
        s = np.linspace(0.0, 2.0, 2001)
        p = np.stack([np.cosh(s), np.sinh(s), 0 * s, 0 * s], axis=1)
        report = sm.eigen_solution_check(0.7, SimpleNamespace(s=s, p=p))
        assert report["invariant_drift"] < 1e-12
        assert report["psi_variation"] < 1e-12
        assert report["chain_rule_residual"] < 1e-10

    def test_sign_convention_recorded(self):
        s = np.linspace(0.0, 1.0, 101)
        p = np.stack([np.cosh(s), np.sinh(s), 0 * s, 0 * s], axis=1)
        report = sm.eigen_solution_check(1.0, SimpleNamespace(s=s, p=p))
        assert report["sign_convention"].startswith("+")

    def test_input_validation(self):
        with pytest.raises(UsageError):
            sm.eigen_solution_check(1.0, SimpleNamespace(
                s=np.array([0.0, 1.0]), p=np.zeros((2, 4))))
        with pytest.raises(UsageError):
            sm.eigen_solution_check(1.0, SimpleNamespace(
                s=np.array([0.0, 0.5, 2.0]), p=np.zeros((3, 4))))
