"""Scalar AR(q) modelling of the flattened pre-smoothing residual sequence.

Yule-Walker estimation per candidate order, AIC order selection, and
iterated conditional-mean forecasting.  The intraday residual sequence is
the curves' pre-smoothing residuals concatenated in time order, so a
forecast of h steps means the next h grid points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_toeplitz


@dataclass(frozen=True)
class ArModel:
    order: int
    coef: np.ndarray        # AR coefficients phi_1..phi_q
    intercept: float
    sigma2: float           # innovation variance
    aic: float
    mean: float


def _autocovariances(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = x.size
    acov = np.empty(max_lag + 1)
    acov[0] = x @ x / n
    for lag in range(1, max_lag + 1):
        acov[lag] = x[:-lag] @ x[lag:] / n
    return acov


def _aic(sigma2: float, order: int, n: int) -> float:
    return n * np.log(max(sigma2, 1e-300)) + 2 * (order + 1)


def fit_ar(series: np.ndarray, q_max: int = 5) -> ArModel:
    """Yule-Walker AR fit with the order chosen by AIC over 0..q_max."""
    x = np.asarray(series, dtype=float).ravel()
    if q_max < 0:
        raise ValueError("q_max must be >= 0")
    if x.size <= 10 * max(q_max, 1):
        raise ValueError(f"series too short for q_max={q_max} (need > {10 * max(q_max, 1)})")
    mean = float(x.mean())
    xc = x - mean
    acov = _autocovariances(xc, q_max)
    if acov[0] <= 0:
        return ArModel(0, np.empty(0), mean, 0.0, -np.inf, mean)
    best: ArModel | None = None
    for q in range(q_max + 1):
        if q == 0:
            sigma2 = acov[0]
            coef = np.empty(0)
        else:
            try:
                coef = solve_toeplitz(acov[:q], acov[1:q + 1])
            except np.linalg.LinAlgError:
                continue
            sigma2 = float(acov[0] - coef @ acov[1:q + 1])
            if sigma2 <= 0:
                continue
        aic = _aic(sigma2, q, x.size)
        if best is None or aic < best.aic - 1e-12:
            intercept = mean * (1.0 - coef.sum())
            best = ArModel(q, coef, float(intercept), float(sigma2), float(aic), mean)
    return best


def forecast_ar(model: ArModel, history: np.ndarray, h: int) -> np.ndarray:
    """Iterated conditional-mean forecasts for the next h steps."""
    if h < 1:
        raise ValueError("horizon h must be >= 1")
    history = np.asarray(history, dtype=float).ravel()
    if history.size < model.order:
        raise ValueError(f"history shorter than the AR order {model.order}")
    if model.order == 0:
        return np.full(h, model.intercept)
    if np.abs(np.roots(np.r_[1.0, -model.coef])).max() >= 1.0:
        warnings.warn("AR model is not stationary; forecasts may diverge", stacklevel=2)
    buf = list(history[-model.order:])
    out = np.empty(h)
    for i in range(h):
        nxt = model.intercept + model.coef @ np.array(buf[::-1])
        out[i] = nxt
        buf.append(nxt)
        buf.pop(0)
    return out
