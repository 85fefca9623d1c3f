"""Functional principal component analysis on a FunctionalSeries.

The eigenproblem of the sample covariance operator is solved in basis
coordinates: with coefficient covariance S and Gram matrix W = L L', the
symmetric problem L' S L u = lambda u is solved and eigenfunction
coefficients are recovered as b = L'^{-1} u, which makes the eigenfunctions
orthonormal in the quadrature inner product.  Works on any domain, full or
restricted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .funkdata import FunctionalSeries, NumericalError


@dataclass(frozen=True)
class EigenSystem:
    """Mean curve, eigenvalues (descending), eigenfunctions and fPC scores."""

    series: FunctionalSeries          # the analysed (uncentered) series
    mean: np.ndarray                  # basis coefficients of the mean curve
    eigenvalues: np.ndarray           # nonnegative, descending
    eigenfunctions: np.ndarray        # D x K coefficient columns
    scores: np.ndarray                # n x K

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size

    @property
    def basis(self):
        return self.series.basis

    @property
    def domain(self):
        return self.series.domain

    def mean_values(self) -> np.ndarray:
        return self.basis.evaluate(self.mean).ravel()

    def eigenfunction_values(self) -> np.ndarray:
        """J x K matrix of eigenfunction values on the grid."""
        return self.basis.eval @ self.eigenfunctions

    def project_coeffs(self, coeffs: np.ndarray, k: int | None = None) -> np.ndarray:
        """Scores of coefficient row(s): <curve - mean, v_j> for j <= k."""
        k = self.n_components if k is None else k
        c = np.atleast_2d(np.asarray(coeffs, dtype=float)) - self.mean
        return c @ self.basis.gram @ self.eigenfunctions[:, :k]

    def project_values(self, values: np.ndarray, k: int | None = None) -> np.ndarray:
        """Scores of raw value row(s) on the grid (quadrature inner products)."""
        k = self.n_components if k is None else k
        v = np.atleast_2d(np.asarray(values, dtype=float)) - self.mean_values()
        w = self.basis.grid.weights
        return (v * w) @ self.eigenfunction_values()[:, :k]

    def explained_variance_ratio(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total


def _gram_sqrt(gram: np.ndarray):
    """Return (apply_Lt, solve_Lt) for W = L L'; eigh fallback if not SPD."""
    try:
        l_factor = linalg.cholesky(gram, lower=True)
        return (
            lambda m: l_factor.T @ m,
            lambda m: linalg.solve_triangular(l_factor.T, m, lower=False),
        )
    except linalg.LinAlgError:
        vals, vecs = linalg.eigh(gram)
        floor = vals.max() * 1e-14
        keep = vals > floor
        root = np.sqrt(vals[keep])
        vk = vecs[:, keep]
        return (
            lambda m: (root[:, None] * (vk.T @ m)),
            lambda m: vk @ (m / root[:, None]),
        )


def fpca(series: FunctionalSeries) -> EigenSystem:
    """Eigendecomposition of the sample covariance operator (divisor n)."""
    n = series.n_curves
    if n < 2:
        raise ValueError("FPCA needs at least 2 curves")
    mean = series.coeffs.mean(axis=0)
    centered = series.coeffs - mean
    cov = centered.T @ centered / n
    apply_lt, solve_lt = _gram_sqrt(series.basis.gram)
    m = apply_lt(apply_lt(cov).T)
    m = (m + m.T) / 2
    try:
        vals, vecs = linalg.eigh(m)
    except linalg.LinAlgError as exc:  # pragma: no cover - rare LAPACK failure
        raise NumericalError("eigendecomposition failed to converge") from exc
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    eigenfunctions = solve_lt(vecs[:, order])
    # re-orthonormalise against the quadrature metric, working with function
    # values: the triangular solve (and any coefficient-space product) loses
    # digits when the restricted-domain Gram matrix is ill conditioned
    w = series.basis.grid.weights
    fun_vals = series.basis.eval @ eigenfunctions
    overlap = fun_vals.T @ (w[:, None] * fun_vals)
    ovals, ovecs = linalg.eigh((overlap + overlap.T) / 2)
    ovals = np.clip(ovals, 1e-30, None)
    polish = (ovecs / np.sqrt(ovals)) @ ovecs.T
    eigenfunctions = eigenfunctions @ polish
    # deterministic sign: largest-magnitude coefficient of each column positive
    lead = np.argmax(np.abs(eigenfunctions), axis=0)
    signs = np.sign(eigenfunctions[lead, np.arange(eigenfunctions.shape[1])])
    signs[signs == 0] = 1.0
    eigenfunctions = eigenfunctions * signs
    # value-space scores match what projections of raw observations produce
    fun_vals = series.basis.eval @ eigenfunctions
    scores = (centered @ series.basis.eval.T) @ (w[:, None] * fun_vals)
    return EigenSystem(series, mean, vals, eigenfunctions, scores)


def reconstruct(es: EigenSystem, scores: np.ndarray, d: int) -> np.ndarray:
    """Truncated Karhunen-Loeve curve: mean + sum of d score-weighted eigenfunctions.

    Returns basis coefficients; evaluate through ``es.basis`` for values.
    """
    if not 1 <= d <= es.n_components:
        raise ValueError(f"d must be in 1..{es.n_components}")
    scores = np.asarray(scores, dtype=float)
    if scores.shape[-1] < d:
        raise ValueError("score vector shorter than d")
    return es.mean + scores[..., :d] @ es.eigenfunctions[:, :d].T


def fve_dimension(es: EigenSystem, threshold: float) -> int:
    """Smallest number of components whose explained variance reaches threshold."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    ratio = np.cumsum(es.explained_variance_ratio())
    idx = np.searchsorted(ratio, threshold - 1e-12)
    return int(min(idx + 1, es.n_components))
