"""Bootstrap band construction and the interval score."""

import numpy as np
import pytest

from pfp.bootstrap import (averaged_score, band_replicates,
                           bands_from_replicates, bootstrap_bands,
                           interval_score, mean_width)
from pfp.funkdata import FunctionalSeries, fourier_basis, make_grid
from pfp.model import pfp_fit
from pfp.simlab import SimConfig, simulate_far

BASIS = fourier_basis(make_grid(48), 15)


class TestIntervalScore:
    def test_covered_point_scores_width(self):
        assert interval_score(2.0, 1.0, 1.5, 0.05) == pytest.approx(1.0)

    def test_degenerate_band_overshoot(self):
        assert interval_score(0.0, 0.0, 1.0, 0.05) == pytest.approx(40.0)

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(0)
        lower = rng.normal(size=200)
        upper = lower + rng.uniform(0.1, 2.0, size=200)
        y = rng.normal(size=200, scale=2.0)
        alpha = 0.2
        mine = interval_score(upper, lower, y, alpha)
        oracle = np.empty(200)
        for i in range(200):
            s = upper[i] - lower[i]
            if y[i] > upper[i]:
                s += 2.0 / alpha * (y[i] - upper[i])
            if y[i] < lower[i]:
                s += 2.0 / alpha * (lower[i] - y[i])
            oracle[i] = s
        assert np.abs(mine - oracle).max() < 1e-12

    def test_widening_a_covering_band_increases_score(self):
        base = interval_score(1.0, -1.0, 0.0, 0.1)
        assert interval_score(2.0, -2.0, 0.0, 0.1) > base

    def test_crossed_band_rejected(self):
        with pytest.raises(ValueError):
            interval_score(np.array([0.0]), np.array([1.0]), np.array([0.5]), 0.05)


class TestAveragedScore:
    def test_constant_width_covered(self):
        grid = np.linspace(0.5, 1, 10)
        bands = []
        truths = []
        for _ in range(3):
            b = bands_from_replicates(np.zeros((120, 10)), 0.05, 1, grid)
            b = type(b)(b.alpha, b.lower - 0.5, b.upper + 0.5, 120, 1, grid)
            bands.append(b)
            truths.append(np.zeros(10))
        assert averaged_score(bands, truths, 0.05) == pytest.approx(1.0)
        assert mean_width(bands) == pytest.approx(1.0)

    def test_single_point_equals_interval_score(self):
        grid = np.array([0.75])
        band = bands_from_replicates(np.linspace(-1, 1, 200)[:, None], 0.1, 1, grid)
        truth = np.array([5.0])
        expected = interval_score(band.upper, band.lower, truth, 0.1)[0]
        assert averaged_score([band], [truth], 0.1) == pytest.approx(expected)


@pytest.fixture(scope="module")
def pfp_model():
    rng = np.random.default_rng(1)
    cfg = SimConfig(kappa1=0.8, n_curves=240, replications=1)
    series = simulate_far(cfg, rng).series
    model = pfp_fit(series, 0.5, 1, 5, 6, 6, window=120)
    partial = series.values()[-1][: len(model.pred_grid)]
    return model, partial


class TestBands:
    def test_replicate_count_guard(self, pfp_model):
        model, partial = pfp_model
        with pytest.raises(ValueError):
            bootstrap_bands(model, partial, n_replicates=50)

    def test_band_order_and_determinism(self, pfp_model):
        model, partial = pfp_model
        b1 = bootstrap_bands(model, partial, n_replicates=120, seed=7)
        b2 = bootstrap_bands(model, partial, n_replicates=120, seed=7)
        assert np.all(b1.upper >= b1.lower)
        assert np.array_equal(b1.lower, b2.lower)
        assert np.array_equal(b1.upper, b2.upper)

    def test_alpha_monotonicity(self, pfp_model):
        model, partial = pfp_model
        b = bootstrap_bands(model, partial, n_replicates=150, seed=3,
                            keep_replicates=True)
        inner = bands_from_replicates(b.replicates, 0.10, b.d_e, b.grid_points)
        assert np.all(inner.lower >= b.lower - 1e-12)
        assert np.all(inner.upper <= b.upper + 1e-12)

    def test_quantile_sandwich(self, pfp_model):
        model, partial = pfp_model
        alpha = 0.1
        b = bootstrap_bands(model, partial, n_replicates=200, alpha=alpha,
                            seed=5, keep_replicates=True)
        inside = ((b.replicates >= b.lower) & (b.replicates <= b.upper)).mean(axis=0)
        assert np.all(inside >= 1 - alpha - 2.0 / 200)
        assert np.all(inside <= 1 - alpha + 2.0 / 200)

    def test_degenerate_pool_zero_width(self):
        coeffs = np.tile(np.arange(15.0), (30, 1))
        pool = FunctionalSeries(BASIS, coeffs)
        with pytest.warns(UserWarning, match="degenerate"):
            reps, d_e = band_replicates(pool, 0.5, 2, 2,
                                        np.zeros(24), 100, seed=1)
        band = bands_from_replicates(reps[0], 0.05, d_e, np.zeros(24))
        assert np.abs(band.width).max() < 1e-12
