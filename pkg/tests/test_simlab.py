"""Simulation generators, metrics, and protocol reproducibility."""

import dataclasses

import numpy as np
import pytest

from pfp.funkdata import DiscreteSample, make_grid
from pfp.simlab import (SimConfig, add_ar1_error, gen_operator, mipe, pmse,
                        run_protocol, sigma_vector, simulate_far)

QUICK = SimConfig(kappa1=0.8, n_curves=120, window=50, n_train=50, n_eval=10,
                  replications=2, d_max=6, dx_max=8, dy_max=8, seed=5)


class TestOperators:
    def test_zero_kappa(self):
        rng = np.random.default_rng(0)
        psi = gen_operator(sigma_vector("sigma1", 15), 0.0, rng)
        assert np.abs(psi).max() == 0.0

    def test_spectral_norm_equals_kappa(self):
        rng = np.random.default_rng(1)
        psi = gen_operator(sigma_vector("sigma1", 15), 1.8, rng)
        assert np.linalg.norm(psi, 2) == pytest.approx(1.8, abs=1e-10)

    def test_entry_variance_matches_profile(self):
        sigma = sigma_vector("sigma2", 6)
        rng = np.random.default_rng(2)
        draws = np.stack([gen_operator(sigma, 1.0, rng, normalize=False)
                          for _ in range(10_000)])
        target = np.outer(sigma, sigma)
        assert np.abs(draws.var(axis=0) / target - 1.0).max() < 0.05


class TestSimulateFar:
    def test_independent_curves_have_no_lag_correlation(self):
        cfg = dataclasses.replace(QUICK, kappa1=0.0, kappa2=0.0, n_curves=400)
        sim = simulate_far(cfg, np.random.default_rng(3))
        scores = sim.series.coeffs[:, 0]
        r = np.corrcoef(scores[:-1], scores[1:])[0, 1]
        assert abs(r) < 0.1

    def test_scalar_reduction_matches_direct_recursion(self):
        cfg = SimConfig(kappa1=0.5, dimension=1, n_curves=50, burn_in=10,
                        replications=1, n_grid=16)
        rng = np.random.default_rng(4)
        psi = np.array([[0.5]])
        sim = simulate_far(cfg, rng, operators=(psi, np.zeros((1, 1))))
        rng2 = np.random.default_rng(4)
        innov = rng2.normal(size=(60, 1))
        direct = np.zeros(60)
        direct[0] = innov[0, 0]
        for k in range(1, 60):
            direct[k] = 0.5 * direct[k - 1] + innov[k, 0]
        assert np.abs(sim.series.coeffs[:, 0] - direct[10:]).max() < 1e-12

    def test_explosive_operator_warns(self):
        cfg = SimConfig(kappa1=1.8, dimension=2, n_curves=10, burn_in=0,
                        replications=1, n_grid=8)
        with pytest.warns(UserWarning, match="explosive"):
            simulate_far(cfg, np.random.default_rng(5),
                         operators=(np.eye(2) * 1.2, np.zeros((2, 2))))


class TestNoise:
    def test_zero_noise_is_identity(self):
        sample = DiscreteSample(make_grid(10), np.ones((3, 10)))
        out = add_ar1_error(sample, 0.5, 0.0, np.random.default_rng(0))
        assert out is sample

    def test_lag_one_autocorrelation(self):
        sample = DiscreteSample(make_grid(48), np.zeros((400, 48)))
        out = add_ar1_error(sample, 0.5, 0.2, np.random.default_rng(1))
        e = out.values.ravel()
        r = np.corrcoef(e[:-1], e[1:])[0, 1]
        assert abs(r - 0.5) < 0.05
        assert abs(e.std() - 0.2) < 0.01

    def test_unit_root_rejected(self):
        sample = DiscreteSample(make_grid(10), np.zeros((2, 10)))
        with pytest.raises(ValueError):
            add_ar1_error(sample, 1.0, 0.1, np.random.default_rng(2))


class TestMetrics:
    def test_perfect_prediction(self):
        grid = make_grid(20)
        vals = np.random.default_rng(0).normal(size=(4, 20))
        assert pmse(vals, vals, grid) == 0.0

    def test_constant_offset(self):
        pts = np.linspace(0.5, 1.0, 25)
        from pfp.funkdata import Grid, trapezoid_weights

        grid = Grid(pts, trapezoid_weights(pts))
        truth = np.zeros((1, 25))
        pred = truth + 0.3
        value = pmse(truth, pred, grid)
        assert value == pytest.approx(0.3 ** 2 * grid.weights.sum(), abs=1e-12)
        assert value == pytest.approx(0.3 ** 2 * 0.5, rel=0.03)

    def test_mipe_is_normalised_pmse(self):
        pts = np.linspace(0.5, 1.0, 25)
        from pfp.funkdata import Grid, trapezoid_weights

        grid = Grid(pts, trapezoid_weights(pts))
        truth = np.random.default_rng(1).normal(size=(1, 25))
        pred = truth + 1.0
        assert mipe(truth, pred, grid, 0.5) == pytest.approx(
            pmse(truth, pred, grid) / 0.5)

    def test_shape_guard(self):
        grid = make_grid(10)
        with pytest.raises(ValueError):
            pmse(np.zeros((2, 10)), np.zeros((2, 9)), grid)


class TestProtocol:
    def test_seeded_rerun_is_byte_identical(self):
        a = run_protocol(QUICK).to_csv()
        b = run_protocol(QUICK).to_csv()
        assert a == b

    def test_parallel_schedule_does_not_change_results(self):
        serial = run_protocol(QUICK).to_csv()
        parallel = run_protocol(dataclasses.replace(QUICK, n_jobs=2)).to_csv()
        assert serial == parallel

    def test_window_accounting(self):
        report = run_protocol(QUICK)
        assert report.meta["replications"] == 2
        # 120 curves, window 50 -> 70 residuals; 50 train + 10 eval used
        from pfp.far import sliding_residuals
        from pfp.simlab import simulate_far as sf

        sim = sf(QUICK, np.random.default_rng(0))
        rs = sliding_residuals(sim.series, 0, 2, QUICK.window)
        assert rs.n_curves == QUICK.n_curves - QUICK.window

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(sigma_profile="sigma3")
        with pytest.raises(ValueError):
            SimConfig(n_curves=100, window=80, n_train=30,
                      n_eval=10).check_protocol()

    def test_report_csv_shape(self):
        report = run_protocol(QUICK)
        lines = report.to_csv().strip().split("\n")
        assert lines[0].startswith("kappa1,kappa2,sigma")
        assert len(lines) == 2
        assert report.to_markdown().startswith("| kappa1 |")
