"""Full-curve FAR(p) prediction through a VAR(p) on fPC score vectors.

Pipeline: FPCA the curves, fit a vector autoregression (with intercept) to
the leading d score columns by multivariate least squares, retransform score
predictions to curves through the truncated Karhunen-Loeve expansion.  The
functional FPE criterion selects (p, d); sliding one-step-ahead fits over a
moving window produce the prediction-residual curves that the intraday
update is trained on.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .fpca import EigenSystem, fpca, fve_dimension
from .funkdata import FunctionalSeries, NumericalError


@dataclass(frozen=True)
class FarModel:
    p: int
    d: int
    es: EigenSystem
    coef: tuple[np.ndarray, ...]   # p matrices, each d x d
    intercept: np.ndarray          # d
    innov_cov: np.ndarray          # d x d

    @property
    def n_fitted(self) -> int:
        return self.es.scores.shape[0]


@dataclass(frozen=True)
class ResidualSet:
    """One-step prediction residual curves from a sliding-window protocol."""

    residuals: FunctionalSeries
    predictions: FunctionalSeries
    window: int
    targets: np.ndarray  # 0-based indices of the predicted curves

    @property
    def n_curves(self) -> int:
        return self.residuals.n_curves


def _var_design(scores: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    n, d = scores.shape
    x = np.ones((n - p, 1 + p * d))
    for j in range(p):
        x[:, 1 + j * d:1 + (j + 1) * d] = scores[p - 1 - j:n - 1 - j]
    return x, scores[p:]


def _fit_var(scores: np.ndarray, p: int):
    """LS fit of a VAR(p) with intercept; returns (coef tuple, intercept, innov cov)."""
    n, d = scores.shape
    if p == 0:
        intercept = scores.mean(axis=0)
        resid = scores - intercept
        return (), intercept, resid.T @ resid / n
    x, y = _var_design(scores, p)
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise NumericalError("singular regressor cross-product in VAR fit")
    resid = y - x @ beta
    denom = n - p - p * d
    if denom <= 0:
        raise ValueError("sample too short for the requested (p, d)")
    innov_cov = resid.T @ resid / denom
    coef = tuple(beta[1 + j * d:1 + (j + 1) * d].T for j in range(p))
    return coef, beta[0], innov_cov


def companion_spectral_radius(coef: tuple[np.ndarray, ...]) -> float:
    """Largest eigenvalue modulus of the VAR companion matrix."""
    p = len(coef)
    if p == 0:
        return 0.0
    d = coef[0].shape[0]
    comp = np.zeros((p * d, p * d))
    for j, mat in enumerate(coef):
        comp[:d, j * d:(j + 1) * d] = mat
    if p > 1:
        comp[d:, :-d] = np.eye((p - 1) * d)
    return float(np.abs(np.linalg.eigvals(comp)).max())


def fit_far(series: FunctionalSeries, p: int, d: int,
            es: EigenSystem | None = None) -> FarModel:
    """Fit a FAR(p) model using the leading d principal component scores."""
    if p < 0:
        raise ValueError("order p must be >= 0")
    n = series.n_curves
    if n <= p * d + 1:
        raise ValueError(f"need more than p*d + 1 = {p * d + 1} curves, got {n}")
    es = fpca(series) if es is None else es
    if d > es.n_components:
        raise ValueError(f"d={d} exceeds the available {es.n_components} components")
    coef, intercept, innov_cov = _fit_var(es.scores[:, :d], p)
    if p > 0 and companion_spectral_radius(coef) >= 1.0:
        warnings.warn("fitted VAR is not stationary (companion spectral radius >= 1)",
                      stacklevel=2)
    return FarModel(p, d, es, coef, intercept, innov_cov)


def predict_scores(model: FarModel, score_history: np.ndarray, h: int = 1) -> np.ndarray:
    """Iterated h-step conditional-mean forecast of the score vector."""
    if h < 1:
        raise ValueError("horizon h must be >= 1")
    if model.p == 0:
        return model.intercept.copy()
    hist = [np.asarray(row, dtype=float) for row in score_history[-model.p:]]
    if len(hist) < model.p:
        raise ValueError(f"history must contain at least p={model.p} curves")
    for _ in range(h):
        nxt = model.intercept.copy()
        for j, mat in enumerate(model.coef):
            nxt = nxt + mat @ hist[-1 - j]
        hist.append(nxt)
    return hist[-1]


def predict_curve(model: FarModel, history: FunctionalSeries, h: int = 1) -> np.ndarray:
    """h-step-ahead curve forecast; returns basis coefficients."""
    scores = model.es.project_coeffs(history.coeffs, model.d) if model.p else np.empty((0, model.d))
    pred = predict_scores(model, scores, h)
    return model.es.mean + model.es.eigenfunctions[:, :model.d] @ pred


def ffpe_ts(series: FunctionalSeries, p: int, d: int,
            es: EigenSystem | None = None) -> float:
    """Functional FPE for the FAR fit: (n + p d)/n tr(innov cov) + eigenvalue tail."""
    es = fpca(series) if es is None else es
    model = fit_far(series, p, d, es=es)
    n = series.n_curves
    return float((n + p * d) / n * np.trace(model.innov_cov) + es.eigenvalues[d:].sum())


def select_order(series: FunctionalSeries, p_max: int = 3, d_max: int = 10,
                 fve_cap: float | None = 0.98,
                 es: EigenSystem | None = None) -> tuple[int, int]:
    """Grid-minimise the functional FPE over orders and dimensions.

    The dimension grid is capped at the smallest d whose explained variance
    reaches ``fve_cap``: beyond that point the extra score columns are
    numerically negligible regressors and the criterion landscape is flat.
    """
    es = fpca(series) if es is None else es
    if fve_cap is not None:
        d_max = min(d_max, fve_dimension(es, fve_cap))
    best = (np.inf, 0, 1)
    for p in range(p_max + 1):
        for d in range(1, d_max + 1):
            value = ffpe_ts(series, p, d, es=es)
            if value < best[0] - 1e-15:
                best = (value, p, d)
    return best[1], best[2]


class SlidingWindows:
    """Per-window FPCA cache for a sliding one-step-ahead protocol.

    Window i covers curves ``targets[i]-window .. targets[i]-1`` (0-based)
    and is used to predict curve ``targets[i]``.  The FPCA of each window is
    computed once and shared across all (p, d) choices, which makes the joint
    order/dimension grid search affordable.
    """

    def __init__(self, series: FunctionalSeries, window: int, targets: np.ndarray):
        targets = np.asarray(targets, dtype=int)
        if targets.size == 0:
            raise ValueError("no target indices given")
        if targets.min() - window < 0:
            raise ValueError("window exceeds the available history for some target")
        if targets.max() >= series.n_curves:
            raise ValueError("target index beyond the end of the series")
        self.series = series
        self.window = window
        self.targets = targets
        self.systems = [fpca(series.take(slice(k - window, k))) for k in targets]

    def residuals(self, p: int, d: int) -> ResidualSet:
        """One-step residual curves for every target at the given (p, d)."""
        n_t = self.targets.size
        dim = self.series.basis.dimension
        preds = np.empty((n_t, dim))
        for i, k in enumerate(self.targets):
            es = self.systems[i]
            coef, intercept, _ = _fit_var(es.scores[:, :d], p)
            if p == 0:
                score_pred = intercept
            else:
                score_pred = intercept.copy()
                for j, mat in enumerate(coef):
                    score_pred = score_pred + mat @ es.scores[-1 - j, :d]
            preds[i] = es.mean + es.eigenfunctions[:, :d] @ score_pred
        resid = self.series.coeffs[self.targets] - preds
        mk = lambda c: FunctionalSeries(self.series.basis, c, self.series.domain)
        return ResidualSet(mk(resid), mk(preds), self.window, self.targets)


def sliding_residuals(series: FunctionalSeries, p: int, d: int, window: int,
                      targets=None) -> ResidualSet:
    """Fit-and-predict each target curve from the window ending just before it.

    ``targets`` defaults to every index with a full window of history,
    i.e. curves window+1 .. n in 1-based terms.
    """
    if targets is None:
        targets = np.arange(window, series.n_curves)
    return SlidingWindows(series, window, np.asarray(targets, dtype=int)).residuals(p, d)
