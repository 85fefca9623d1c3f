"""The composite partial-prediction algorithm and the moving-block competitor.

A fitted model bundles the full-curve FAR forecaster, an intraday regression
trained on sliding-window prediction residuals split at the current time
tau, the residual mean adjustment, and (for rough data) an AR model of the
pre-smoothing residual sequence.  Predicting the unobserved block of a new
curve adds the intraday update of its observed residual to the full-curve
forecast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arma import ArModel, fit_ar, forecast_ar
from .far import FarModel, ResidualSet, fit_far, predict_curve, sliding_residuals
from .ffr import FfrModel, fit_ffr, predict_ffr
from .funkdata import DiscreteSample, FunctionalSeries, project_values, split_at


@dataclass(frozen=True)
class PfpModel:
    far_model: FarModel
    residual_ffr: FfrModel
    resid_mean: np.ndarray            # full-domain mean coefficients of the residual pool
    residual_set: ResidualSet
    tau: float
    window: int
    error_model: ArModel | None = None
    error_history: np.ndarray | None = None   # flattened pre-smoothing residuals

    @property
    def basis(self):
        return self.residual_set.residuals.basis

    @property
    def pred_grid(self):
        return self.residual_ffr.pred_es.basis.grid

    @property
    def resp_grid(self):
        return self.residual_ffr.resp_es.basis.grid


@dataclass(frozen=True)
class PfpPrediction:
    """Additive parts of the updated prediction on the response grid."""

    full_curve_part: np.ndarray
    residual_part: np.ndarray
    combined: np.ndarray
    grid_points: np.ndarray
    error_part: np.ndarray | None = None


def pfp_fit(series: FunctionalSeries, tau: float, p: int, d: int, dx: int, dy: int,
            window: int, targets=None,
            presmooth_residuals: DiscreteSample | np.ndarray | None = None,
            error_q_max: int = 5) -> PfpModel:
    """Fit the composite model on fully observed curves.

    Residual curves come from one-step sliding-window FAR predictions over
    ``targets`` (default: every curve with a full window of history); the
    intraday regression is trained on their split at tau.  The FAR model kept
    for prediction is refit on the final window.  If the pre-smoothing
    residual matrix of the raw data is supplied, an AR error model is fitted
    to its flattened time order for the rough-data prediction path.
    """
    resid_set = sliding_residuals(series, p, d, window, targets)
    x, y = split_at(resid_set.residuals, tau)
    residual_ffr = fit_ffr(x, y, dx, dy)
    resid_mean = resid_set.residuals.coeffs.mean(axis=0)
    n = series.n_curves
    far_model = fit_far(series.take(slice(n - window, n)), p, d)
    error_model = None
    error_history = None
    if presmooth_residuals is not None:
        r = presmooth_residuals.values if isinstance(presmooth_residuals, DiscreteSample) \
            else np.asarray(presmooth_residuals, dtype=float)
        error_history = r.ravel()
        error_model = fit_ar(error_history, error_q_max)
    return PfpModel(far_model, residual_ffr, resid_mean, resid_set, tau, window,
                    error_model, error_history)


def pfp_predict(model: PfpModel, partial_values: np.ndarray,
                history: FunctionalSeries | None = None) -> PfpPrediction:
    """Update the full-curve forecast with the observed [0, tau] block.

    ``partial_values`` are the observed values on the predictor grid.  The
    observed residual is the partial observation minus the full-curve
    forecast there; its intraday regression prediction (which carries the
    residual-mean adjustment on both sides) is added to the forecast on the
    response grid.
    """
    partial_values = np.asarray(partial_values, dtype=float)
    if partial_values.shape != (len(model.pred_grid),):
        raise ValueError("partial observation does not match the predictor grid")
    if history is None:
        far_coeffs = model.far_model.es.mean + \
            model.far_model.es.eigenfunctions[:, :model.far_model.d] @ _next_scores(model.far_model)
    else:
        far_coeffs = predict_curve(model.far_model, history, 1)
    far_pred_vals = model.residual_ffr.pred_es.basis.evaluate(far_coeffs).ravel()
    far_resp_vals = model.residual_ffr.resp_es.basis.evaluate(far_coeffs).ravel()
    eps_partial = partial_values - far_pred_vals
    residual_part = predict_ffr(model.residual_ffr, eps_partial)
    return PfpPrediction(
        full_curve_part=far_resp_vals,
        residual_part=residual_part,
        combined=far_resp_vals + residual_part,
        grid_points=model.resp_grid.points.copy(),
    )


def _next_scores(far_model: FarModel) -> np.ndarray:
    from .far import predict_scores

    return predict_scores(far_model, far_model.es.scores[:, :far_model.d], 1)


def pfp_predict_noisy(model: PfpModel, partial_raw: np.ndarray, h: int,
                      history: FunctionalSeries | None = None) -> PfpPrediction:
    """Rough-data prediction of the next h grid points after tau.

    The smooth part is the usual update evaluated at the next h grid points;
    the AR error model forecasts the pre-smoothing residual sequence
    continued through the target's observed block.
    """
    if model.error_model is None:
        raise RuntimeError("no AR error model was fitted; supply pre-smoothing "
                           "residuals to pfp_fit for the rough-data path")
    if not 1 <= h <= len(model.resp_grid):
        raise ValueError(f"h must be in 1..{len(model.resp_grid)}")
    partial_raw = np.asarray(partial_raw, dtype=float)
    smooth = pfp_predict(model, partial_raw, history)
    # pre-smoothing residuals of the observed block: raw minus its basis fit
    pred_basis = model.residual_ffr.pred_es.basis
    part_coeffs = project_values(partial_raw, pred_basis)
    r_partial = partial_raw - pred_basis.evaluate(part_coeffs).ravel()
    hist = r_partial if model.error_history is None \
        else np.r_[model.error_history, r_partial]
    error_part = forecast_ar(model.error_model, hist, h)
    return PfpPrediction(
        full_curve_part=smooth.full_curve_part[:h],
        residual_part=smooth.residual_part[:h],
        combined=smooth.combined[:h] + error_part,
        grid_points=smooth.grid_points[:h],
        error_part=error_part,
    )


def recombine_blocks(values: np.ndarray, pred_mask: np.ndarray,
                     partial_values: np.ndarray | None) -> np.ndarray:
    """Shift the time support: row m = curve m's response block then curve
    m+1's predictor block; a supplied partial observation completes one extra
    row from the last full curve."""
    resp_mask = ~pred_mask
    if not pred_mask.any():
        return values
    glued = np.concatenate([values[:-1][:, resp_mask], values[1:][:, pred_mask]], axis=1)
    blocks = [glued]
    if partial_values is not None:
        partial_values = np.asarray(partial_values, dtype=float)
        if partial_values.shape != (int(pred_mask.sum()),):
            raise ValueError("partial observation does not match the predictor block")
        last = np.concatenate([values[-1][resp_mask], partial_values])
        blocks.append(last[None, :])
    return np.concatenate(blocks, axis=0)


def moving_block_predict(history: FunctionalSeries, partial_values: np.ndarray | None,
                         tau: float, p: int, d: int) -> np.ndarray:
    """Competitor that shifts the time support by tau before forecasting.

    Each recombined curve glues one curve's (tau, 1] block to the next
    curve's [0, tau] block; the partial observation (if given) completes the
    last recombined curve.  A FAR forecast of the next recombined curve is
    computed and its leading block - the target's unobserved (tau, 1] part -
    is returned as values on the response grid.
    """
    values = history.values()
    t = history.grid.points
    # tau at or below the first grid point means no shift (the tau -> 0 limit)
    if tau <= t[0] + 1e-12:
        pred_mask = np.zeros(t.size, dtype=bool)
    else:
        pred_mask = t <= tau + 1e-12
    recombined = recombine_blocks(values, pred_mask, partial_values)
    rec_coeffs = project_values(recombined, history.basis)
    rec_series = FunctionalSeries(history.basis, rec_coeffs, history.domain)
    far_model = fit_far(rec_series, p, d)
    pred_coeffs = predict_curve(far_model, rec_series, 1)
    pred_values = history.basis.evaluate(pred_coeffs).ravel()
    n_resp = int((~pred_mask).sum()) if pred_mask.any() else values.shape[1]
    return pred_values[:n_resp]
