"""The composite update: fit, predict, rough-data path, moving block."""

import numpy as np
import pytest

from pfp.far import sliding_residuals
from pfp.ffr import fit_ffr, fitted_residual_values
from pfp.fpca import fpca
from pfp.funkdata import (DiscreteSample, FunctionalSeries, fourier_basis,
                          make_grid, split_at)
from pfp.model import (moving_block_predict, pfp_fit, pfp_predict,
                       pfp_predict_noisy, recombine_blocks)
from pfp.simlab import SimConfig, pmse, simulate_far

BASIS = fourier_basis(make_grid(48), 15)
SIGMA = 1.0 / np.arange(1, 16)


def _far1_series(n, rng, kappa=0.8):
    cfg = SimConfig(kappa1=kappa, kappa2=0.0, n_curves=n, replications=1)
    return simulate_far(cfg, rng).series


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(0)
    series = _far1_series(240, rng)
    model = pfp_fit(series, 0.5, 1, 5, 6, 6, window=120)
    return series, model


class TestFit:
    def test_residual_ffr_matches_manual_recomposition(self, fitted):
        series, model = fitted
        rs = sliding_residuals(series, 1, 5, 120)
        x, y = split_at(rs.residuals, 0.5)
        manual = fit_ffr(x, y, 6, 6)
        assert np.abs(manual.b_matrix - model.residual_ffr.b_matrix).max() < 1e-12

    def test_deterministic_series_yields_null_update(self):
        # rotation dynamics: exactly predictable, so residuals ~ 0 and the
        # intraday update contributes nothing
        theta = 0.3
        rot = np.eye(15)
        rot[:2, :2] = [[np.cos(theta), -np.sin(theta)],
                       [np.sin(theta), np.cos(theta)]]
        coeffs = np.zeros((160, 15))
        coeffs[0, 0] = 1.0
        coeffs[0, 2] = 0.5
        for k in range(1, 160):
            coeffs[k] = rot @ coeffs[k - 1]
        series = FunctionalSeries(BASIS, coeffs)
        with pytest.warns(UserWarning):  # unit-modulus dynamics
            model = pfp_fit(series, 0.5, 1, 2, 2, 2, window=80)
        assert np.abs(fitted_residual_values(model.residual_ffr)).max() < 1e-6
        partial = BASIS.evaluate(rot @ coeffs[-1])[: len(model.pred_grid)]
        pred = pfp_predict(model, partial)
        assert np.abs(pred.residual_part).max() < 1e-6


class TestPredict:
    def test_additivity(self, fitted):
        series, model = fitted
        partial = series.values()[-1][: len(model.pred_grid)]
        pred = pfp_predict(model, partial)
        assert np.array_equal(pred.combined,
                              pred.full_curve_part + pred.residual_part)

    def test_zero_centered_residual_gives_mean_adjusted_update(self, fitted):
        series, model = fitted
        ffr = model.residual_ffr
        far_pred_vals = ffr.pred_es.basis.eval @ _far_next_coeffs(model)
        mean_pred_vals = ffr.pred_es.mean_values()
        pred = pfp_predict(model, far_pred_vals + mean_pred_vals)
        # centered residual is exactly zero, so the update is the response
        # residual mean alone
        assert np.abs(pred.residual_part - ffr.resp_es.mean_values()).max() < 1e-10

    def test_partial_shape_guard(self, fitted):
        _, model = fitted
        with pytest.raises(ValueError):
            pfp_predict(model, np.zeros(5))

    def test_update_beats_far_on_linear_construction(self):
        # noiseless curves whose second half is a linear map of the first:
        # the update must dominate the plain forecast for any split choice
        rng = np.random.default_rng(1)
        series = _far1_series(260, rng, kappa=0.4)
        for tau in (0.375, 0.5, 0.625):
            model = pfp_fit(series.take(slice(0, 240)), tau, 1, 5, 8, 8, window=120)
            resp_grid = model.resp_grid
            n_pred = len(model.pred_grid)
            errs_pfp, errs_far = [], []
            for k in range(240, 260):
                hist = series.take(slice(k - 120, k))
                truth = series.values()[k]
                pred = pfp_predict(model, truth[:n_pred], history=hist)
                errs_pfp.append(pmse(truth[n_pred:], pred.combined, resp_grid))
                errs_far.append(pmse(truth[n_pred:], pred.full_curve_part, resp_grid))
            assert np.mean(errs_pfp) <= np.mean(errs_far)


def _far_next_coeffs(model):
    from pfp.far import predict_scores

    fm = model.far_model
    scores = predict_scores(fm, fm.es.scores[:, :fm.d], 1)
    return fm.es.mean + fm.es.eigenfunctions[:, :fm.d] @ scores


class TestNoisy:
    def test_requires_error_model(self, fitted):
        _, model = fitted
        with pytest.raises(RuntimeError):
            pfp_predict_noisy(model, np.zeros(len(model.pred_grid)), 2)

    def test_zero_error_reduces_to_smooth_prediction(self):
        rng = np.random.default_rng(2)
        series = _far1_series(220, rng)
        zeros = DiscreteSample(series.grid, np.zeros((220, 48)))
        model = pfp_fit(series, 0.5, 1, 4, 5, 5, window=110,
                        presmooth_residuals=zeros)
        partial = series.values()[-1][: len(model.pred_grid)]
        smooth_pred = pfp_predict(model, partial)
        noisy_pred = pfp_predict_noisy(model, partial, 4)
        assert np.abs(noisy_pred.combined - smooth_pred.combined[:4]).max() < 1e-10

    def test_long_horizon_converges_to_smooth_plus_constant(self):
        rng = np.random.default_rng(3)
        series = _far1_series(220, rng)
        r = np.zeros((220, 48)).ravel()
        phi = 0.5
        shocks = rng.normal(scale=0.2, size=r.size)
        for t in range(1, r.size):
            r[t] = phi * r[t - 1] + shocks[t]
        model = pfp_fit(series, 0.5, 1, 4, 5, 5, window=110,
                        presmooth_residuals=r.reshape(220, 48))
        partial = series.values()[-1][: len(model.pred_grid)]
        h = len(model.resp_grid)
        pred = pfp_predict_noisy(model, partial, h)
        ar_mean = model.error_model.intercept / (1 - model.error_model.coef.sum()) \
            if model.error_model.order else model.error_model.intercept
        assert abs(pred.error_part[-1] - ar_mean) < 0.02
        assert np.array_equal(
            pred.combined,
            pred.full_curve_part + pred.residual_part + pred.error_part)

    def test_horizon_guard(self):
        rng = np.random.default_rng(4)
        series = _far1_series(220, rng)
        model = pfp_fit(series, 0.5, 1, 4, 4, 4, window=110,
                        presmooth_residuals=np.zeros((220, 48)))
        with pytest.raises(ValueError):
            pfp_predict_noisy(model, series.values()[-1][:len(model.pred_grid)], 99)


class TestMovingBlock:
    def test_recombination_counts(self):
        values = np.arange(40.0).reshape(5, 8)
        pred_mask = np.array([True] * 4 + [False] * 4)
        rec = recombine_blocks(values, pred_mask, None)
        assert rec.shape == (4, 8)
        rec2 = recombine_blocks(values, pred_mask, np.zeros(4))
        assert rec2.shape == (5, 8)
        # row 0 = curve 0's response block followed by curve 1's predictor block
        assert np.array_equal(rec[0], np.r_[values[0, 4:], values[1, :4]])

    def test_tau_zero_equals_plain_far(self):
        rng = np.random.default_rng(5)
        series = _far1_series(150, rng)
        from pfp.far import fit_far, predict_curve

        mb = moving_block_predict(series, None, 0.0, 1, 4)
        model = fit_far(series, 1, 4)
        direct = series.basis.evaluate(predict_curve(model, series, 1)).ravel()
        assert np.abs(mb - direct).max() < 1e-10

    def test_prediction_shape(self):
        rng = np.random.default_rng(6)
        series = _far1_series(150, rng)
        n_pred = int(np.sum(series.grid.points <= 0.5 + 1e-12))
        partial = series.values()[-1][:n_pred]
        mb = moving_block_predict(series.take(slice(0, 149)), partial, 0.5, 1, 4)
        assert mb.shape == (48 - n_pred,)
