"""Fully functional linear regression between curve sets on split sub-domains.

Both sides are reduced to fPC scores on their own sub-domain and the
regression is estimated as dy separate least-squares fits of response scores
on the leading dx predictor scores (identical to the stacked Kronecker form,
without building it).  The regression FPE criterion trades the residual
trace against the response eigenvalue tail to pick (dx, dy), and the joint
criterion extends the search over the upstream FAR order and dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .far import SlidingWindows
from .fpca import EigenSystem, fpca
from .funkdata import FunctionalSeries, NumericalError, split_at


@dataclass(frozen=True)
class FfrModel:
    tau: float
    dx: int
    dy: int
    pred_es: EigenSystem
    resp_es: EigenSystem
    b_matrix: np.ndarray      # dy x dx
    resid_cov: np.ndarray     # dy x dy
    n_fitted: int

    def predictor_scores(self, x_values: np.ndarray) -> np.ndarray:
        return self.pred_es.project_values(x_values, self.dx)


class JointSelection(NamedTuple):
    p: int
    d: int
    dx: int
    dy: int
    value: float


def _score_regression(xs: np.ndarray, ys: np.ndarray):
    """Least squares of response scores on predictor scores; returns (B, resid)."""
    beta, _, rank, _ = np.linalg.lstsq(xs, ys, rcond=None)
    if rank < xs.shape[1]:
        raise NumericalError("singular predictor score cross-product")
    return beta.T, ys - xs @ beta


def fit_ffr(x: FunctionalSeries, y: FunctionalSeries, dx: int, dy: int,
            pred_es: EigenSystem | None = None,
            resp_es: EigenSystem | None = None) -> FfrModel:
    """Fit the score-space regression of response curves on predictor curves.

    Means are estimated and removed on each sub-domain, so the model predicts
    response-mean plus score regression.
    """
    if x.n_curves != y.n_curves:
        raise ValueError("predictor and response samples must be paired")
    n = x.n_curves
    if n <= dx + 1:
        raise ValueError(f"need n > dx + 1 = {dx + 1} paired curves, got {n}")
    pred_es = fpca(x) if pred_es is None else pred_es
    resp_es = fpca(y) if resp_es is None else resp_es
    if dx > pred_es.n_components or dy > resp_es.n_components:
        raise ValueError("requested dimensions exceed the available components")
    b_matrix, resid = _score_regression(pred_es.scores[:, :dx], resp_es.scores[:, :dy])
    resid_cov = resid.T @ resid / (n - dx)
    tau = x.domain[1]
    return FfrModel(tau, dx, dy, pred_es, resp_es, b_matrix, resid_cov, n)


def predict_ffr(model: FfrModel, x_values: np.ndarray) -> np.ndarray:
    """Predicted response values on the response grid for predictor value row(s).

    x_values holds curve values on the model's predictor grid; 1-d input
    returns a 1-d prediction.
    """
    x_values = np.asarray(x_values, dtype=float)
    single = x_values.ndim == 1
    if x_values.shape[-1] != len(model.pred_es.basis.grid):
        raise ValueError("predictor values do not match the model's predictor grid")
    xi = model.pred_es.project_values(x_values, model.dx)
    zeta = xi @ model.b_matrix.T
    resp_vals = model.resp_es.mean_values() + zeta @ model.resp_es.eigenfunction_values()[:, :model.dy].T
    return resp_vals[0] if single else resp_vals


def predict_ffr_coeffs(model: FfrModel, x_values: np.ndarray) -> np.ndarray:
    """Predicted response curve as basis coefficients (response-side basis)."""
    xi = model.pred_es.project_values(x_values, model.dx)
    zeta = np.atleast_2d(xi @ model.b_matrix.T)
    return model.resp_es.mean + zeta @ model.resp_es.eigenfunctions[:, :model.dy].T


def fitted_residual_values(model: FfrModel) -> np.ndarray:
    """In-sample prediction-error curves (values on the response grid).

    Each row is the observed response curve minus its regression prediction,
    including the part outside the dy-dimensional response subspace; this is
    the innovation pool the bootstrap bands resample.
    """
    fitted_scores = model.pred_es.scores[:, :model.dx] @ model.b_matrix.T
    fitted_vals = model.resp_es.mean_values() + \
        fitted_scores @ model.resp_es.eigenfunction_values()[:, :model.dy].T
    return model.resp_es.series.values() - fitted_vals


def ffpe_r(x: FunctionalSeries, y: FunctionalSeries, dx: int, dy: int,
           pred_es: EigenSystem | None = None,
           resp_es: EigenSystem | None = None) -> float:
    """Regression FPE: (n + dx)/n tr(unbiased resid cov) + response eigenvalue tail.

    The parameter penalty multiplies the unbiased residual-trace estimate
    rss/(n - dx), which is the (n + dx)/(n - dx)-times-trace form written
    with the divisor-n covariance.
    """
    model = fit_ffr(x, y, dx, dy, pred_es=pred_es, resp_es=resp_es)
    n = model.n_fitted
    tail = model.resp_es.eigenvalues[dy:].sum()
    return float((n + dx) / n * np.trace(model.resid_cov) + tail)


def _criterion_table(pred_es: EigenSystem, resp_es: EigenSystem, n: int,
                     dx_max: int, dy_max: int) -> np.ndarray:
    """fFPE_r values over the (dx, dy) grid, sharing the nested regressions."""
    table = np.full((dx_max, dy_max), np.inf)
    lam_y = resp_es.eigenvalues
    tails = np.array([lam_y[dy:].sum() for dy in range(1, dy_max + 1)])
    for dx in range(1, dx_max + 1):
        if n <= dx + 1:
            break
        _, resid = _score_regression(pred_es.scores[:, :dx], resp_es.scores[:, :dy_max])
        rss = np.cumsum((resid ** 2).sum(axis=0))
        table[dx - 1] = (n + dx) / n * rss / (n - dx) + tails
    return table


def select_dims(x: FunctionalSeries, y: FunctionalSeries,
                dx_max: int | None = None, dy_max: int | None = None) -> tuple[int, int]:
    """Minimise the regression FPE over the dimension grid.

    Bounds default to min(components, n/4) to keep the regression well posed;
    ties break toward the smaller dx, then the smaller dy.
    """
    n = x.n_curves
    pred_es, resp_es = fpca(x), fpca(y)
    cap = max(1, min(pred_es.n_components, n // 4))
    dx_max = cap if dx_max is None else min(dx_max, pred_es.n_components, n - 2)
    dy_max = cap if dy_max is None else min(dy_max, resp_es.n_components)
    table = _criterion_table(pred_es, resp_es, n, dx_max, dy_max)
    flat = np.argmin(table)  # row-major: smallest dx wins ties, then smallest dy
    dx, dy = np.unravel_index(flat, table.shape)
    return int(dx + 1), int(dy + 1)


def ffpe_joint(series: FunctionalSeries, tau: float,
               p_range: Iterable[int], d_range: Iterable[int],
               dx_range: Iterable[int], dy_range: Iterable[int],
               window: int, targets=None,
               windows: SlidingWindows | None = None) -> JointSelection:
    """Jointly select the FAR order/dimension and the regression dimensions.

    For each (p, d) the sliding residual curves are rebuilt, split at tau,
    and scored by the regression FPE over the (dx, dy) grid; the global
    argmin is returned with its criterion value.
    """
    p_range = sorted(set(int(p) for p in p_range))
    d_range = sorted(set(int(d) for d in d_range))
    dx_list = sorted(set(int(v) for v in dx_range))
    dy_list = sorted(set(int(v) for v in dy_range))
    if not (p_range and d_range and dx_list and dy_list):
        raise ValueError("all search ranges must be nonempty")
    if windows is None:
        if targets is None:
            targets = np.arange(window, series.n_curves)
        windows = SlidingWindows(series, window, np.asarray(targets, dtype=int))
    n = windows.targets.size
    best: JointSelection | None = None
    for p in p_range:
        for d in d_range:
            resid = windows.residuals(p, d).residuals
            x, y = split_at(resid, tau)
            pred_es, resp_es = fpca(x), fpca(y)
            table = _criterion_table(pred_es, resp_es, n, max(dx_list), max(dy_list))
            for dx in dx_list:
                for dy in dy_list:
                    value = table[dx - 1, dy - 1]
                    if best is None or value < best.value - 1e-15:
                        best = JointSelection(p, d, dx, dy, float(value))
    return best


def score_noise_floor(es: EigenSystem, noise_var: float) -> np.ndarray:
    """Variance that pointwise white measurement noise adds to each score.

    Quadrature scores of raw values pick up noise with variance
    noise_var * sum_j w_j^2 v_i(t_j)^2 in component i; training on smoothed
    curves does not see this, so components whose eigenvalue sits below this
    floor amplify noise at prediction time instead of transferring signal.
    """
    w = es.basis.grid.weights
    fun_vals = es.eigenfunction_values()
    return noise_var * ((w[:, None] ** 2) * fun_vals ** 2).sum(axis=0)


def snr_dimension_cap(es: EigenSystem, noise_var: float, ratio: float = 1.0) -> int:
    """Largest leading dimension whose eigenvalues all clear the noise floor."""
    floor = score_noise_floor(es, noise_var)
    ok = es.eigenvalues >= ratio * floor
    cap = int(np.argmin(ok)) if not ok.all() else es.n_components
    return max(cap, 1)


def kernel_surface(model: FfrModel) -> np.ndarray:
    """Regression kernel beta(s, t) on the predictor x response grid."""
    phi = model.pred_es.eigenfunction_values()[:, :model.dx]   # J_pred x dx
    psi = model.resp_es.eigenfunction_values()[:, :model.dy]   # J_resp x dy
    return phi @ model.b_matrix.T @ psi.T
