"""Residual-bootstrap pointwise prediction bands and the interval score.

The innovation pool (prediction-residual curves for the composite model, raw
curves for the regression-only comparison) is decomposed into leading fPC
scores plus leftover curves.  Each replicate resamples both pools
independently, rebuilds a bootstrap innovation sample, refits the intraday
regression on it, predicts the target's unobserved block from the observed
predictor, and adds a resampled regression-error curve.  Band limits are
pointwise empirical quantiles over replicates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ffr import fit_ffr, fitted_residual_values, predict_ffr
from .fpca import fpca, fve_dimension
from .funkdata import FunctionalSeries, NumericalError, split_at
from .model import PfpModel, pfp_predict


@dataclass(frozen=True)
class BootstrapBands:
    alpha: float
    lower: np.ndarray
    upper: np.ndarray
    n_replicates: int
    d_e: int
    grid_points: np.ndarray
    replicates: np.ndarray | None = None   # B x J_resp predictions if retained

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def band_replicates(pool: FunctionalSeries, tau: float, dx: int, dy: int,
                    x_values: np.ndarray, n_replicates: int,
                    var_threshold: float = 0.8, seed: int = 0,
                    base_values: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Replicate predictions of the (tau, 1] block for one or more targets.

    ``x_values``: observed predictor-block values, shape (m, J_pred) or
    (J_pred,).  Returns (m, B, J_resp) replicate predictions (plus
    ``base_values`` if given) and the number of score components resampled.
    """
    if n_replicates < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    if not 0 < var_threshold <= 1:
        raise ValueError("var_threshold must be in (0, 1]")
    x_values = np.atleast_2d(np.asarray(x_values, dtype=float))
    seed_key = (seed,) if np.isscalar(seed) else tuple(int(s) for s in seed)
    n = pool.n_curves
    es = fpca(pool)
    d_e = fve_dimension(es, var_threshold)
    centered = pool.coeffs - es.mean
    if es.eigenvalues.sum() <= 1e-12 * (1.0 + np.abs(pool.coeffs).max()):
        # identical pool curves: every replicate reproduces the same update
        warnings.warn("degenerate innovation pool; bands collapse to zero width",
                      stacklevel=2)
        _, yb = split_at(pool, tau)
        resp_mean = yb.values().mean(axis=0)
        row = np.tile(resp_mean, (n_replicates, 1))
        out = np.repeat(row[None, :, :], x_values.shape[0], axis=0)
        if base_values is not None:
            out += np.atleast_2d(np.asarray(base_values, dtype=float))[:, None, :]
        return out, d_e
    lead = es.eigenfunctions[:, :d_e]
    leftovers = centered - es.scores[:, :d_e] @ lead.T
    pred_grid_len = None
    out = None
    for b in range(n_replicates):
        rng = np.random.default_rng(np.random.SeedSequence((*seed_key, b)))
        for _ in range(10):
            idx_scores = rng.integers(0, n, n)
            idx_left = rng.integers(0, n, n)
            coeffs_b = es.scores[idx_scores, :d_e] @ lead.T + leftovers[idx_left]
            series_b = FunctionalSeries(pool.basis, coeffs_b, pool.domain)
            xb, yb = split_at(series_b, tau)
            try:
                model_b = fit_ffr(xb, yb, dx, dy)
                break
            except NumericalError:
                continue
        else:
            raise NumericalError("degenerate bootstrap sample: regression kept failing")
        if pred_grid_len is None:
            pred_grid_len = len(model_b.pred_es.basis.grid)
            if x_values.shape[1] != pred_grid_len:
                raise ValueError("x_values do not match the predictor grid of the pool split")
            out = np.empty((x_values.shape[0], n_replicates,
                            len(model_b.resp_es.basis.grid)))
        update_b = predict_ffr(model_b, x_values)
        delta_pool = fitted_residual_values(model_b)
        delta_idx = rng.integers(0, n, x_values.shape[0])
        # classic prediction-variance inflation 1 + x'(X'X)^{-1}x: targets far
        # from the training score cloud get proportionally wider bands
        scores_b = model_b.pred_es.scores[:, :dx]
        xtx = scores_b.T @ scores_b
        xi = model_b.pred_es.project_values(x_values, dx)
        lever = np.einsum("ij,ij->i", xi, np.linalg.solve(xtx, xi.T).T)
        scale = np.sqrt(1.0 + np.clip(lever, 0.0, None))
        out[:, b, :] = update_b + scale[:, None] * delta_pool[delta_idx]
    if base_values is not None:
        out += np.atleast_2d(np.asarray(base_values, dtype=float))[:, None, :]
    return out, d_e


def bands_from_replicates(replicates: np.ndarray, alpha: float, d_e: int,
                          grid_points: np.ndarray,
                          keep_replicates: bool = False) -> BootstrapBands:
    """Pointwise empirical alpha/2 and 1-alpha/2 quantiles (type-7 interpolation)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    lower = np.quantile(replicates, alpha / 2, axis=0)
    upper = np.quantile(replicates, 1 - alpha / 2, axis=0)
    return BootstrapBands(alpha, lower, upper, replicates.shape[0], d_e,
                          np.asarray(grid_points),
                          replicates.copy() if keep_replicates else None)


def bootstrap_bands(model: PfpModel, partial_values: np.ndarray,
                    n_replicates: int = 1000, alpha: float = 0.05,
                    var_threshold: float = 0.8, seed: int = 0,
                    keep_replicates: bool = False) -> BootstrapBands:
    """Prediction bands for the composite update of one partially observed curve.

    The innovation pool is the model's training residual set; each replicate
    refits the intraday regression on a resampled pool and predicts from the
    target's observed residual, so the bands carry both the kernel estimation
    uncertainty and the regression innovation spread around the full-curve
    forecast.  Identical pool curves collapse the bands to zero width.
    """
    from .far import predict_scores

    partial_values = np.asarray(partial_values, dtype=float)
    base = pfp_predict(model, partial_values)
    ffr = model.residual_ffr
    far_model = model.far_model
    next_scores = predict_scores(far_model, far_model.es.scores[:, :far_model.d], 1)
    far_coeffs = far_model.es.mean + far_model.es.eigenfunctions[:, :far_model.d] @ next_scores
    far_pred_vals = ffr.pred_es.basis.evaluate(far_coeffs).ravel()
    eps_partial = partial_values - far_pred_vals
    reps, d_e = band_replicates(model.residual_set.residuals, model.tau,
                                ffr.dx, ffr.dy, eps_partial, n_replicates,
                                var_threshold, seed,
                                base_values=base.full_curve_part)
    return bands_from_replicates(reps[0], alpha, d_e, base.grid_points, keep_replicates)


def interval_score(upper, lower, y, alpha: float):
    """Gneiting-Raftery interval score, elementwise.

    width + (2/alpha) * (y - u) for overshoots + (2/alpha) * (l - y) for
    undershoots; lower scores are better and a covered point scores the width.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(upper < lower - 1e-12):
        raise ValueError("upper band below lower band")
    return (upper - lower) \
        + (2.0 / alpha) * (y - upper) * (y > upper) \
        + (2.0 / alpha) * (lower - y) * (lower > y)


def averaged_score(bands, truths, alpha: float) -> float:
    """Interval score averaged over all grid points and all target curves."""
    scores = []
    for band, truth in zip(bands, truths, strict=True):
        scores.append(interval_score(band.upper, band.lower, truth, alpha).ravel())
    return float(np.concatenate(scores).mean())


def mean_width(bands) -> float:
    """Band width averaged over all grid points and all target curves."""
    return float(np.concatenate([b.width.ravel() for b in bands]).mean())
