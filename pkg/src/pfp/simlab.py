"""Simulation laboratory: FAR process generation and benchmark protocols.

Each protocol replication generates a FAR(2) sample in a 15-dimensional
Fourier space, builds sliding-window prediction residuals, trains the
intraday update on the first block of residuals, and evaluates competing
predictors on the held-out curves.  All randomness is keyed by
(master seed, replication, purpose) so parallel execution cannot change any
number.
"""

from __future__ import annotations

import collections
import dataclasses
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .arma import fit_ar, forecast_ar
from .bootstrap import band_replicates, bands_from_replicates, interval_score
from .far import SlidingWindows, select_order
from .ffr import _criterion_table, fit_ffr, predict_ffr, snr_dimension_cap
from .fpca import fpca, fve_dimension
from .funkdata import (DiscreteSample, FunctionalSeries, Grid, fourier_basis,
                       make_grid, nodal_basis, project_values, smooth, split_at)
from .model import moving_block_predict

DEFAULT_SETTINGS = ((1.8, 0.0), (0.8, 0.0), (0.2, 0.0), (0.4, 0.4), (0.0, 0.8))


@dataclass(frozen=True)
class NoiseConfig:
    """AR(1) measurement-error layer for the rough-data protocol."""

    phi: float = 0.5
    sigma_e: float = 0.2
    h_max: int = 5
    correction_q_max: int = 5
    competitor_q_max: int = 5
    interpolation_variant: bool = True   # also run the pipeline on raw values


@dataclass(frozen=True)
class BandConfig:
    n_replicates: int = 1000
    alpha: float = 0.05
    var_threshold: float = 0.8


@dataclass(frozen=True)
class SimConfig:
    kappa1: float = 1.8
    kappa2: float = 0.0
    sigma_profile: str = "sigma1"
    dimension: int = 15
    n_curves: int = 400
    n_grid: int = 48
    tau: float = 0.5
    window: int = 200
    n_train: int = 180
    n_eval: int = 20
    replications: int = 100
    seed: int = 0
    burn_in: int = 100
    p_max: int = 3
    d_max: int = 10
    fve_cap: float = 0.98
    dx_max: int = 12
    dy_max: int = 12
    rho_max: float | None = 0.98
    moving_block: bool = False
    noise: NoiseConfig | None = None
    bands: BandConfig | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.sigma_profile not in ("sigma1", "sigma2"):
            raise ValueError("sigma_profile must be 'sigma1' or 'sigma2'")
        for name in ("dimension", "n_curves", "n_grid", "window", "n_train",
                     "n_eval", "replications"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def check_protocol(self) -> "SimConfig":
        if self.n_train + self.n_eval + self.window > self.n_curves:
            raise ValueError("window + n_train + n_eval exceeds n_curves")
        return self


class SimulatedSeries(NamedTuple):
    series: FunctionalSeries
    psi1: np.ndarray
    psi2: np.ndarray
    spectral_radius: float
    innovations: np.ndarray


def sigma_vector(profile: str, dimension: int) -> np.ndarray:
    """Innovation standard deviations: j^-1 or 1.2^-j."""
    j = np.arange(1, dimension + 1, dtype=float)
    if profile == "sigma1":
        return 1.0 / j
    if profile == "sigma2":
        return 1.2 ** -j
    raise ValueError(f"unknown sigma profile {profile!r}")


def gen_operator(sigma: np.ndarray, kappa: float, rng: np.random.Generator,
                 normalize: bool = True) -> np.ndarray:
    """Random operator matrix with entry variances sigma_j sigma_j'.

    With ``normalize`` the matrix is scaled to spectral norm kappa.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    sigma = np.asarray(sigma, dtype=float)
    g = rng.normal(size=(sigma.size, sigma.size)) * np.sqrt(np.outer(sigma, sigma))
    if not normalize:
        return kappa * g
    norm = np.linalg.norm(g, 2)
    return kappa * g / norm if norm > 0 else g * 0.0


def companion_radius(psi1: np.ndarray, psi2: np.ndarray) -> float:
    d = psi1.shape[0]
    comp = np.zeros((2 * d, 2 * d))
    comp[:d, :d] = psi1
    comp[:d, d:] = psi2
    comp[d:, :d] = np.eye(d)
    return float(np.abs(np.linalg.eigvals(comp)).max())


def draw_stable_operators(sigma: np.ndarray, kappa1: float, kappa2: float,
                          rng: np.random.Generator,
                          rho_max: float | None = 0.98,
                          max_tries: int = 500):
    """Draw the shared operator shape, rejecting explosive configurations.

    With rho_max=None a single draw is returned regardless of stability (a
    warning is emitted when the companion spectral radius reaches 1).
    """
    for _ in range(max_tries):
        base = gen_operator(sigma, 1.0, rng)
        psi1, psi2 = kappa1 * base, kappa2 * base
        rho = companion_radius(psi1, psi2)
        if rho_max is None or rho <= rho_max:
            if rho >= 1.0:
                warnings.warn(f"explosive operator configuration (radius {rho:.3f})",
                              stacklevel=2)
            return psi1, psi2, rho
    raise RuntimeError(f"no stable operator draw in {max_tries} tries "
                       f"(kappa1={kappa1}, kappa2={kappa2})")


def simulate_far(config: SimConfig, rng: np.random.Generator,
                 operators: tuple[np.ndarray, np.ndarray] | None = None) -> SimulatedSeries:
    """Generate a FAR(2) coefficient recursion in the Fourier basis.

    The burn-in block is discarded; innovations are independent normals with
    the profile's standard deviations per coordinate.
    """
    sigma = sigma_vector(config.sigma_profile, config.dimension)
    if operators is None:
        psi1, psi2, rho = draw_stable_operators(sigma, config.kappa1, config.kappa2,
                                                rng, config.rho_max)
    else:
        psi1, psi2 = operators
        rho = companion_radius(psi1, psi2)
        if rho >= 1.0:
            warnings.warn(f"explosive operator configuration (radius {rho:.3f})",
                          stacklevel=2)
    total = config.n_curves + config.burn_in
    innov = rng.normal(size=(total, config.dimension)) * sigma
    coeffs = np.zeros((total, config.dimension))
    coeffs[0] = innov[0]
    coeffs[1] = psi1 @ coeffs[0] + innov[1]
    for k in range(2, total):
        coeffs[k] = psi1 @ coeffs[k - 1] + psi2 @ coeffs[k - 2] + innov[k]
    basis = fourier_basis(make_grid(config.n_grid), config.dimension)
    series = FunctionalSeries(basis, coeffs[config.burn_in:])
    return SimulatedSeries(series, psi1, psi2, rho, innov[config.burn_in:])


def add_ar1_error(sample: DiscreteSample, phi: float, sigma_e: float,
                  rng: np.random.Generator) -> DiscreteSample:
    """Add a stationary AR(1) error sequence, concatenated in time order.

    ``sigma_e`` is the marginal standard deviation of the error process.
    """
    if abs(phi) >= 1:
        raise ValueError("|phi| must be < 1")
    if sigma_e == 0:
        return sample
    n_total = sample.values.size
    innov_sd = sigma_e * np.sqrt(1.0 - phi * phi)
    shocks = rng.normal(scale=innov_sd, size=n_total)
    e = np.empty(n_total)
    e[0] = rng.normal(scale=sigma_e)
    for t in range(1, n_total):
        e[t] = phi * e[t - 1] + shocks[t]
    return DiscreteSample(sample.grid, sample.values + e.reshape(sample.values.shape))


def pmse(truth_values: np.ndarray, pred_values: np.ndarray, grid: Grid) -> float:
    """Integrated squared prediction error over the grid's sub-domain."""
    truth_values = np.asarray(truth_values, dtype=float)
    pred_values = np.asarray(pred_values, dtype=float)
    if truth_values.shape != pred_values.shape or truth_values.shape[-1] != len(grid):
        raise ValueError("truth and prediction must share the evaluation grid")
    return float(np.mean(((truth_values - pred_values) ** 2 @ grid.weights)))


def mipe(truth_values: np.ndarray, pred_values: np.ndarray, grid: Grid,
         tau: float) -> float:
    """Mean integrated prediction error: PMSE normalised by the block length."""
    if not 0 <= tau < 1:
        raise ValueError("tau must be in [0, 1)")
    return pmse(truth_values, pred_values, grid) / (1.0 - tau)


# ---------------------------------------------------------------------------
# shared per-replication machinery


def _rng(seed: int, rep: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, rep, purpose)))


def _capped_d_max(sw: SlidingWindows, config: SimConfig) -> int:
    cap = config.d_max
    if config.fve_cap:
        cap = min(cap, fve_dimension(sw.systems[0], config.fve_cap))
    return max(cap, 1)


def _select_fit_ffr(x: FunctionalSeries, y: FunctionalSeries, dx_max: int, dy_max: int,
                    noise_var: float | None = None):
    """fFPE-selected regression fit; returns (model, criterion value).

    ``noise_var`` caps the predictor dimension where measurement noise in
    prediction-time scores would overwhelm the training signal.
    """
    n = x.n_curves
    pred_es, resp_es = fpca(x), fpca(y)
    dx_max = min(dx_max, pred_es.n_components, n - 2)
    if noise_var:
        dx_max = min(dx_max, snr_dimension_cap(pred_es, noise_var))
    dy_max = min(dy_max, resp_es.n_components)
    table = _criterion_table(pred_es, resp_es, n, dx_max, dy_max)
    dx, dy = np.unravel_index(np.argmin(table), table.shape)
    model = fit_ffr(x, y, int(dx + 1), int(dy + 1), pred_es=pred_es, resp_es=resp_es)
    return model, float(table[dx, dy])


class _FittedProtocol(NamedTuple):
    sw: SlidingWindows
    p: int
    d: int
    resid: FunctionalSeries
    far_preds: FunctionalSeries
    ffr_model: object
    ffpe_pfp: float


def _order_and_residuals(series: FunctionalSeries, config: SimConfig):
    """Order selection on the first window, then sliding residuals.

    The time-series FPE carries its own (n + p d)/n parameter penalty, so the
    search runs over the plain grid; only the joint criterion (whose d
    direction is penalty-free) needs the explained-variance envelope.
    """
    targets = np.arange(config.window, series.n_curves)
    sw = SlidingWindows(series, config.window, targets)
    p, d = select_order(series.take(slice(0, config.window)), config.p_max,
                        config.d_max, fve_cap=None, es=sw.systems[0])
    return sw, p, d, sw.residuals(p, d)


def _fit_smooth_protocol(series: FunctionalSeries, config: SimConfig,
                         noise_var: float | None = None) -> _FittedProtocol:
    """Sliding residuals plus the trained intraday update.

    ``noise_var`` (pointwise measurement-error variance) restricts the
    regression to predictor components whose training scores stand clear of
    the noise that raw-value scores will carry at prediction time.
    """
    sw, p, d, rs = _order_and_residuals(series, config)
    train = slice(0, config.n_train)
    x, y = split_at(rs.residuals.take(train), config.tau)
    ffr_model, ffpe_pfp = _select_fit_ffr(x, y, config.dx_max, config.dy_max,
                                          noise_var=noise_var)
    return _FittedProtocol(sw, p, d, rs.residuals, rs.predictions, ffr_model, ffpe_pfp)


def _eval_blocks(fit: _FittedProtocol, series: FunctionalSeries, config: SimConfig):
    """Truth and forecast values on both sub-grids for the evaluation curves."""
    left, right = split_at(series.take([0]), config.tau)
    pred_basis, resp_basis = left.basis, right.basis
    eval_slice = slice(config.n_train, config.n_train + config.n_eval)
    eval_targets = fit.sw.targets[eval_slice]
    truth_coeffs = series.coeffs[eval_targets]
    far_coeffs = fit.far_preds.coeffs[eval_slice]
    return (eval_targets,
            pred_basis.evaluate(truth_coeffs), resp_basis.evaluate(truth_coeffs),
            pred_basis.evaluate(far_coeffs), resp_basis.evaluate(far_coeffs))


def _smooth_rep(config: SimConfig, rep: int) -> dict:
    """One replication of the smooth-curve comparison protocol."""
    rng = _rng(config.seed, rep, 0)
    sim = simulate_far(config, rng)
    series = sim.series
    fit = _fit_smooth_protocol(series, config)
    raw_train = series.take(slice(config.window, config.window + config.n_train))
    xr, yr = split_at(raw_train, config.tau)
    flr_model, ffpe_flr = _select_fit_ffr(xr, yr, config.dx_max, config.dy_max)
    (eval_targets, truth_pred, truth_resp,
     far_pred, far_resp) = _eval_blocks(fit, series, config)
    resp_grid = fit.ffr_model.resp_es.basis.grid
    update = predict_ffr(fit.ffr_model, truth_pred - far_pred)
    flr_vals = predict_ffr(flr_model, truth_pred)
    row = {
        "p": fit.p, "d": fit.d,
        "dx": fit.ffr_model.dx, "dy": fit.ffr_model.dy,
        "rho": sim.spectral_radius,
        "ffpe_pfp": fit.ffpe_pfp,
        "pmse_pfp": pmse(truth_resp, far_resp + update, resp_grid),
        "pmse_ts": pmse(truth_resp, far_resp, resp_grid),
        "ffpe_r": ffpe_flr,
        "pmse_r": pmse(truth_resp, flr_vals, resp_grid),
    }
    if config.moving_block:
        mb = np.empty((config.n_eval, len(resp_grid)))
        for i, k in enumerate(eval_targets):
            history = series.take(slice(k - config.window, k))
            mb[i] = moving_block_predict(history, truth_pred[i], config.tau,
                                         fit.p, fit.d)
        row["pmse_mb"] = pmse(truth_resp, mb, resp_grid)
    return row


# ---------------------------------------------------------------------------
# Table-1 style protocol


@dataclass
class EvaluationReport:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)
    per_rep: object = None

    def to_csv(self) -> str:
        def fmt(v):
            if isinstance(v, str):
                return v
            if isinstance(v, (int, np.integer)):
                return str(int(v))
            return "%.6f" % float(v)

        lines = [",".join(self.columns)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        def fmt(v):
            if isinstance(v, str):
                return v
            if isinstance(v, (int, np.integer)):
                return str(int(v))
            return "%.4f" % float(v)

        head = "| " + " | ".join(self.columns) + " |"
        sep = "|" + "|".join("---" for _ in self.columns) + "|"
        body = ["| " + " | ".join(fmt(v) for v in row) + " |" for row in self.rows]
        meta = [f"- {k}: {v}" for k, v in sorted(self.meta.items())]
        return "\n".join([head, sep, *body, "", *meta]) + "\n"


def _run_reps(worker, config: SimConfig) -> list:
    config.check_protocol()
    reps = range(config.replications)
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            return list(pool.map(worker, [config] * config.replications, reps))
    return [worker(config, r) for r in reps]


def run_protocol(config: SimConfig) -> EvaluationReport:
    """Smooth-curve protocol for one (kappa1, kappa2, sigma) setting."""
    rows = _run_reps(_smooth_rep, config)
    keys = ["ffpe_pfp", "pmse_pfp", "pmse_ts", "ffpe_r", "pmse_r"]
    if config.moving_block:
        keys += ["pmse_mb"]
    agg = [config.kappa1, config.kappa2, config.sigma_profile]
    agg += [float(np.mean([r[k] for r in rows])) for k in keys]
    if config.moving_block:
        agg.append(float(np.mean([r["pmse_pfp"] < r["pmse_mb"] for r in rows])))
    columns = ["kappa1", "kappa2", "sigma", *keys]
    if config.moving_block:
        columns.append("pfp_beats_mb")
    meta = {"replications": config.replications, "seed": config.seed,
            "tau": config.tau, "window": config.window}
    return EvaluationReport(columns, [agg], meta, per_rep=rows)


def run_table(config: SimConfig, settings=DEFAULT_SETTINGS,
              profiles=("sigma1", "sigma2")) -> EvaluationReport:
    """Smooth-curve protocol over a list of (kappa1, kappa2) x sigma settings."""
    report = None
    all_reps = {}
    for profile in profiles:
        for k1, k2 in settings:
            sub = dataclasses.replace(config, kappa1=k1, kappa2=k2,
                                      sigma_profile=profile)
            part = run_protocol(sub)
            all_reps[(profile, k1, k2)] = part.per_rep
            if report is None:
                report = part
            else:
                report.rows.extend(part.rows)
    report.per_rep = all_reps
    return report


# ---------------------------------------------------------------------------
# Table-2 style protocol: joint order and dimension selection


def _joint_rep(config: SimConfig, rep: int) -> dict:
    rng = _rng(config.seed, rep, 0)
    sim = simulate_far(config, rng)
    series = sim.series
    targets = np.arange(config.window, series.n_curves)
    sw = SlidingWindows(series, config.window, targets)
    d_cap = _capped_d_max(sw, config)
    n_train, n_eval = config.n_train, config.n_eval
    shape = (config.p_max + 1, config.d_max, config.dx_max, config.dy_max)
    ffpe_grid = np.full(shape, np.nan)
    pmse_grid = np.full(shape, np.nan)
    for p in range(config.p_max + 1):
        for d in range(1, config.d_max + 1):
            rs = sw.residuals(p, d)
            x, y = split_at(rs.residuals.take(slice(0, n_train)), config.tau)
            pred_es, resp_es = fpca(x), fpca(y)
            dx_max = min(config.dx_max, pred_es.n_components, n_train - 2)
            dy_max = min(config.dy_max, resp_es.n_components)
            table = _criterion_table(pred_es, resp_es, n_train, dx_max, dy_max)
            ffpe_grid[p, d - 1, :dx_max, :dy_max] = table
            pred_basis, resp_basis = pred_es.basis, resp_es.basis
            eval_coeffs = series.coeffs[targets[n_train:n_train + n_eval]]
            far_coeffs = rs.predictions.coeffs[n_train:n_train + n_eval]
            truth_resp = resp_basis.evaluate(eval_coeffs)
            far_resp = resp_basis.evaluate(far_coeffs)
            eps_pred = pred_basis.evaluate(eval_coeffs) - pred_basis.evaluate(far_coeffs)
            resp_fun_vals = resp_es.eigenfunction_values()[:, :dy_max]
            resp_mean_vals = resp_es.mean_values()
            xi_full = pred_es.project_values(eps_pred, dx_max)
            for dx in range(1, dx_max + 1):
                b_t, _, _, _ = np.linalg.lstsq(pred_es.scores[:, :dx],
                                               resp_es.scores[:, :dy_max], rcond=None)
                zeta = xi_full[:, :dx] @ b_t
                for dy in range(1, dy_max + 1):
                    update = resp_mean_vals + zeta[:, :dy] @ resp_fun_vals[:, :dy].T
                    pmse_grid[p, d - 1, dx - 1, dy - 1] = pmse(
                        truth_resp, far_resp + update, resp_basis.grid)
    # selection is restricted to the explained-variance envelope of the
    # first window; the landscapes keep the full grid
    searched = np.zeros(shape, dtype=bool)
    searched[:, :d_cap] = ~np.isnan(ffpe_grid[:, :d_cap])
    searchable = np.where(searched, ffpe_grid, np.inf)
    sel = np.unravel_index(np.argmin(searchable), shape)
    return {
        "p": int(sel[0]), "d": int(sel[1] + 1),
        "dx": int(sel[2] + 1), "dy": int(sel[3] + 1),
        "ffpe_sel": float(ffpe_grid[sel]),
        "pmse_sel": float(pmse_grid[sel]),
        "ffpe_grid": ffpe_grid,
        "pmse_grid": pmse_grid,
        "searched": searched,
    }


def run_joint_protocol(config: SimConfig) -> EvaluationReport:
    """Joint (p, d, dx, dy) selection with fFPE/PMSE landscape aggregation.

    Reported values follow the benchmark convention: fFPE_a / PMSE_a are the
    replication averages at each run's selected cell; PMSE_b is the minimum
    of the replication-averaged PMSE landscape over the searched grid, and
    fFPE_b the averaged criterion at that cell.
    """
    rows = _run_reps(_joint_rep, config)
    pmse_stack = np.stack([r["pmse_grid"] for r in rows])
    ffpe_stack = np.stack([r["ffpe_grid"] for r in rows])
    # the oracle floor is taken over cells the (variance-capped) search
    # reaches in at least half the replications, averaging each cell over
    # the replications that searched it
    searched = np.stack([r["searched"] for r in rows])
    eligible = searched.mean(axis=0) >= 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pmse_mean = np.where(eligible, np.nanmean(
            np.where(searched, pmse_stack, np.nan), axis=0), np.nan)
        ffpe_mean = np.where(eligible, np.nanmean(
            np.where(searched, ffpe_stack, np.nan), axis=0), np.nan)
    cell_b = np.unravel_index(np.nanargmin(pmse_mean), pmse_mean.shape)
    modal = collections.Counter((r["p"], r["d"], r["dx"], r["dy"]) for r in rows)
    (p_m, d_m, dx_m, dy_m), _ = modal.most_common(1)[0]
    row = [config.kappa1, config.kappa2, config.sigma_profile,
           p_m, d_m, dx_m, dy_m,
           float(np.mean([r["ffpe_sel"] for r in rows])),
           float(ffpe_mean[cell_b]),
           float(np.mean([r["pmse_sel"] for r in rows])),
           float(pmse_mean[cell_b])]
    columns = ["kappa1", "kappa2", "sigma", "p", "d", "dx", "dy",
               "ffpe_a", "ffpe_b", "pmse_a", "pmse_b"]
    meta = {"replications": config.replications, "seed": config.seed,
            "tau": config.tau}
    return EvaluationReport(columns, [row], meta, per_rep=rows)


# ---------------------------------------------------------------------------
# Table-3 style protocol: rough curves with AR(1) measurement error


def _pipeline_point_predictions(series: FunctionalSeries, config: SimConfig,
                                raw_values: np.ndarray,
                                noise_var: float | None = None):
    """Update predictions on the response grid for the evaluation targets.

    With ``noise_var`` the regression's predictor dimension stops at the
    measurement-noise floor; without it the smooth-case pipeline is applied
    to the rough data as-is, which overstates the usable high-order
    predictor components.
    """
    fit = _fit_smooth_protocol(series, config, noise_var=noise_var)
    (eval_targets, _, _, far_pred, far_resp) = _eval_blocks(fit, series, config)
    n_pred = far_pred.shape[1]
    partial = raw_values[eval_targets][:, :n_pred]
    update = predict_ffr(fit.ffr_model, partial - far_pred)
    return fit, eval_targets, far_resp + update


def _noisy_rep(config: SimConfig, rep: int) -> dict:
    noise = config.noise or NoiseConfig()
    rng = _rng(config.seed, rep, 0)
    sim = simulate_far(config, rng)
    smooth_sample = DiscreteSample(sim.series.grid, sim.series.values())
    raw = add_ar1_error(smooth_sample, noise.phi, noise.sigma_e, _rng(config.seed, rep, 1))
    basis = sim.series.basis
    series15, presmooth = smooth(raw, basis)
    dof = 1.0 - basis.dimension / len(raw.grid)
    noise_var = float(presmooth.values.var() / dof)
    fit, eval_targets, pred_rough = _pipeline_point_predictions(
        series15, config, raw.values, noise_var=noise_var)
    _, _, pred_naive = _pipeline_point_predictions(
        series15, config, raw.values)
    pred_basis = split_at(series15.take([0]), config.tau)[0].basis
    n_pred = len(pred_basis.grid)
    h_max = noise.h_max
    mse = {k: np.zeros(h_max) for k in ("c", "n", "a")}
    if noise.interpolation_variant:
        nodal = FunctionalSeries(nodal_basis(raw.grid), raw.values)
        _, _, interp_pred = _pipeline_point_predictions(nodal, config, raw.values)
        mse["i"] = np.zeros(h_max)
    for i, k in enumerate(eval_targets):
        truth = raw.values[k, n_pred:n_pred + h_max]
        partial_raw = raw.values[k, :n_pred]
        # AR correction from the pre-smoothing residual sequence
        r_hist = presmooth.values[k - config.window:k].ravel()
        fitted_partial = pred_basis.evaluate(
            project_values(partial_raw, pred_basis)).ravel()
        r_partial = partial_raw - fitted_partial
        ar_model = fit_ar(r_hist, noise.correction_q_max)
        r_hat = forecast_ar(ar_model, np.r_[r_hist, r_partial], h_max)
        # scalar AR competitor on the raw concatenated series
        raw_hist = raw.values[k - config.window:k].ravel()
        comp_model = fit_ar(raw_hist, noise.competitor_q_max)
        comp_fc = forecast_ar(comp_model, np.r_[raw_hist, partial_raw], h_max)
        mse["c"] += (pred_rough[i, :h_max] + r_hat - truth) ** 2
        mse["n"] += (pred_naive[i, :h_max] - truth) ** 2
        mse["a"] += (comp_fc - truth) ** 2
        if noise.interpolation_variant:
            mse["i"] += (interp_pred[i, :h_max] - truth) ** 2
    return {k: v / len(eval_targets) for k, v in mse.items()}


def run_noisy_protocol(config: SimConfig) -> EvaluationReport:
    """Rough-data protocol: pointwise MSE of the corrected and plain updates.

    Columns mirror the benchmark table: corrected update (msec), smooth-case
    update (msen), scalar AR competitor (msea), and the raw-value pipeline
    variant (msei).
    """
    noise = config.noise or NoiseConfig()
    rows = _run_reps(_noisy_rep, config)
    keys = ["c", "n", "a"] + (["i"] if noise.interpolation_variant else [])
    out_rows = []
    for h in range(noise.h_max):
        out_rows.append([h + 1] + [float(np.mean([r[k][h] for r in rows])) for k in keys])
    columns = ["h"] + [f"mse{k}" for k in keys]
    meta = {"replications": config.replications, "seed": config.seed,
            "phi": noise.phi, "sigma_e": noise.sigma_e, "tau": config.tau}
    return EvaluationReport(columns, out_rows, meta, per_rep=rows)


# ---------------------------------------------------------------------------
# Table-4/5 style protocol: bootstrap band width, score, and coverage


def _band_rep(config: SimConfig, rep: int) -> dict:
    bands_cfg = config.bands or BandConfig()
    rng = _rng(config.seed, rep, 0)
    sim = simulate_far(config, rng)
    series = sim.series
    fit = _fit_smooth_protocol(series, config)
    raw_train = series.take(slice(config.window, config.window + config.n_train))
    xr, yr = split_at(raw_train, config.tau)
    flr_model, _ = _select_fit_ffr(xr, yr, config.dx_max, config.dy_max)
    (eval_targets, truth_pred, truth_resp,
     far_pred, far_resp) = _eval_blocks(fit, series, config)
    resid_train = fit.resid.take(slice(0, config.n_train))
    out = {}
    specs = {
        "pfp": (resid_train, fit.ffr_model, truth_pred - far_pred, far_resp),
        "flr": (raw_train, flr_model, truth_pred, None),
    }
    for m_idx, (name, (pool, mdl, x_vals, base)) in enumerate(specs.items()):
        reps_arr, d_e = band_replicates(
            pool, config.tau, mdl.dx, mdl.dy, x_vals,
            bands_cfg.n_replicates, bands_cfg.var_threshold,
            seed=(config.seed, rep, 7, m_idx), base_values=base)
        widths, scores, covered, total = [], [], 0, 0
        for i in range(truth_resp.shape[0]):
            band = bands_from_replicates(reps_arr[i], bands_cfg.alpha, d_e,
                                         fit.ffr_model.resp_es.basis.grid.points)
            widths.append(band.width.mean())
            scores.append(interval_score(band.upper, band.lower, truth_resp[i],
                                         bands_cfg.alpha).mean())
            covered += int(np.sum((truth_resp[i] >= band.lower)
                                  & (truth_resp[i] <= band.upper)))
            total += band.lower.size
        out[name] = {"width": float(np.mean(widths)),
                     "score": float(np.mean(scores)),
                     "coverage": covered / total}
    return out


def run_band_protocol(config: SimConfig) -> EvaluationReport:
    bands_cfg = config.bands or BandConfig()
    rows = _run_reps(_band_rep, config)
    row = [config.kappa1, config.kappa2, config.sigma_profile, config.tau]
    columns = ["kappa1", "kappa2", "sigma", "tau"]
    for name in ("pfp", "flr"):
        for key in ("score", "width", "coverage"):
            columns.append(f"{key}_{name}")
            row.append(float(np.mean([r[name][key] for r in rows])))
    meta = {"replications": config.replications, "seed": config.seed,
            "bootstrap": bands_cfg.n_replicates, "alpha": bands_cfg.alpha}
    return EvaluationReport(columns, [row], meta, per_rep=rows)
