"""Grids, quadrature, basis systems and basis-smoothing of discrete curve data.

Curves live on a common observation grid in [0, 1].  All inner products are
trapezoidal quadrature sums against the grid weights, so every module that
consumes these objects agrees on what an integral means.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline

# condition number above which the smoothing solve falls back to SVD
_COND_LIMIT = 1e10


class NumericalError(RuntimeError):
    """A linear-algebra step failed (singular system, non-convergence)."""


@dataclass(frozen=True)
class Grid:
    """Ordered evaluation points in [0, 1] with quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if points.ndim != 1 or points.shape != weights.shape:
            raise ValueError("points and weights must be 1-d arrays of equal length")
        if points.size < 2:
            raise ValueError("a grid needs at least 2 points")
        if np.any(np.diff(points) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.points.size

    @property
    def span(self) -> float:
        return float(self.points[-1] - self.points[0])

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Quadrature inner product of two value vectors on this grid."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if f.shape[-1] != len(self) or g.shape[-1] != len(self):
            raise ValueError("value vectors do not match the grid length")
        return float(np.sum(self.weights * f * g))


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Trapezoidal-rule weights for ordered points; exact for degree-1 polynomials."""
    points = np.asarray(points, dtype=float)
    w = np.empty_like(points)
    w[0] = (points[1] - points[0]) / 2
    w[-1] = (points[-1] - points[-2]) / 2
    w[1:-1] = (points[2:] - points[:-2]) / 2
    return w


def make_grid(n_points: int, kind: str = "closed") -> Grid:
    """Equally spaced grid on [0, 1].

    kind="closed" puts points at (j-1)/(J-1), including both endpoints, with
    trapezoidal weights (weights sum to the span, constants integrate exactly).
    kind="mid" puts points at (j-0.5)/J with weights 1/J (midpoint rule over
    [0, 1]; the weight sum covers the unit interval, not the point span).
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if kind == "closed":
        points = np.linspace(0.0, 1.0, n_points)
        return Grid(points, trapezoid_weights(points))
    if kind == "mid":
        points = (np.arange(n_points) + 0.5) / n_points
        return Grid(points, np.full(n_points, 1.0 / n_points))
    raise ValueError(f"unknown grid kind {kind!r}")


def inner_product(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Quadrature approximation of the L2 inner product on ``grid``."""
    return grid.inner(f, g)


@dataclass(frozen=True)
class DiscreteSample:
    """Raw curve observations: one row per curve on a shared grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[1] != len(self.grid):
            raise ValueError(
                f"value matrix has {values.shape[1]} columns, grid has {len(self.grid)} points"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_curves(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BasisSystem:
    """A finite basis evaluated on a grid, with its quadrature Gram matrix."""

    kind: str
    grid: Grid
    eval: np.ndarray  # J x D basis values
    gram: np.ndarray  # D x D pairwise inner products

    @property
    def dimension(self) -> int:
        return self.eval.shape[1]

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        """Curve values on the grid for coefficient row(s)."""
        return np.asarray(coeffs, dtype=float) @ self.eval.T


def _gram(grid: Grid, eval_matrix: np.ndarray) -> np.ndarray:
    g = eval_matrix.T @ (grid.weights[:, None] * eval_matrix)
    return (g + g.T) / 2


def fourier_basis(grid: Grid, dimension: int) -> BasisSystem:
    """Fourier system: 1, sqrt(2) sin(2*pi*m*t), sqrt(2) cos(2*pi*m*t), ..."""
    if dimension < 1:
        raise ValueError("dimension must be positive")
    t = grid.points
    e = np.empty((len(grid), dimension))
    e[:, 0] = 1.0
    for j in range(1, dimension):
        m = (j + 1) // 2
        if j % 2 == 1:
            e[:, j] = np.sqrt(2.0) * np.sin(2 * np.pi * m * t)
        else:
            e[:, j] = np.sqrt(2.0) * np.cos(2 * np.pi * m * t)
    return BasisSystem("fourier", grid, e, _gram(grid, e))


def bspline_basis(grid: Grid, dimension: int, degree: int = 3) -> BasisSystem:
    """Cubic B-spline system with equally spaced interior knots on [0, 1]."""
    if dimension < degree + 1:
        raise ValueError(f"dimension must be at least degree+1 = {degree + 1}")
    n_interior = dimension - degree - 1
    interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    x = np.clip(grid.points, 0.0, 1.0 - 1e-12)  # design_matrix is half-open at 1
    e = BSpline.design_matrix(x, knots, degree).toarray()
    return BasisSystem("bspline", grid, e, _gram(grid, e))


def nodal_basis(grid: Grid) -> BasisSystem:
    """Identity ('linear interpolation') system: one basis function per grid point.

    Coefficients are the grid values themselves; the Gram matrix is the
    diagonal quadrature-weight matrix.  Used to run the functional pipeline
    directly on raw discrete data without smoothing.
    """
    e = np.eye(len(grid))
    return BasisSystem("nodal", grid, e, np.diag(grid.weights))


@dataclass(frozen=True)
class FunctionalSeries:
    """Curves represented by coefficient rows against a shared basis."""

    basis: BasisSystem
    coeffs: np.ndarray  # n x D
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if coeffs.shape[1] != self.basis.dimension:
            raise ValueError("coefficient columns do not match the basis dimension")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_curves(self) -> int:
        return self.coeffs.shape[0]

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    def values(self) -> np.ndarray:
        """n x J matrix of curve values on the grid."""
        return self.basis.evaluate(self.coeffs)

    def inner(self, other_coeffs: np.ndarray) -> np.ndarray:
        """Inner products of every curve with the given coefficient vector(s)."""
        return self.coeffs @ self.basis.gram @ np.asarray(other_coeffs, dtype=float).T

    def take(self, index) -> "FunctionalSeries":
        return dataclasses.replace(self, coeffs=np.atleast_2d(self.coeffs[index]))


def smooth(raw: DiscreteSample, basis: BasisSystem) -> tuple[FunctionalSeries, DiscreteSample]:
    """Project raw curves onto the basis by weighted least squares.

    The fit minimises the quadrature norm of the residual, so residuals are
    orthogonal to every basis function.  Returns the smoothed series and the
    pre-smoothing residual matrix (raw minus fitted values).
    """
    if basis.eval.shape[0] != len(raw.grid):
        raise ValueError("basis is evaluated on a different grid than the sample")
    if basis.dimension > len(raw.grid):
        raise ValueError("basis dimension exceeds the number of grid points")
    coeffs = project_values(raw.values, basis)
    fitted = coeffs @ basis.eval.T
    residuals = raw.values - fitted
    series = FunctionalSeries(basis, coeffs, (raw.grid.points[0], raw.grid.points[-1]))
    return series, DiscreteSample(raw.grid, residuals)


def project_values(values: np.ndarray, basis: BasisSystem) -> np.ndarray:
    """Weighted least-squares coefficients of value row(s) against a basis."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    w = basis.grid.weights
    a = basis.gram
    b = basis.eval.T @ (w[:, None] * values.T)
    if np.linalg.cond(a) < _COND_LIMIT:
        try:
            c = linalg.cho_factor(a)
            return linalg.cho_solve(c, b).T
        except linalg.LinAlgError:
            pass
    # near rank-deficient basis on this grid: minimum-norm solve
    sol, _, rank, _ = linalg.lstsq(a, b)
    if rank == 0:
        raise NumericalError("basis evaluation matrix is rank deficient")
    return sol.T


def restrict(series: FunctionalSeries, lo: float, hi: float,
             include_lo: bool = True, include_hi: bool = True) -> FunctionalSeries:
    """Restriction of every curve to the sub-interval [lo, hi].

    Grid points, weights, and basis rows are cut down to the sub-domain and
    the Gram matrix is recomputed there.  A point exactly at a boundary is
    kept or dropped according to ``include_lo`` / ``include_hi``; by default
    a point at ``lo`` or ``hi`` belongs to the sub-domain.
    """
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError("need 0 <= lo < hi <= 1")
    t = series.grid.points
    eps = 1e-12
    mask = (t >= lo - eps) & (t <= hi + eps)
    if not include_lo:
        mask &= t > lo + eps
    if not include_hi:
        mask &= t < hi - eps
    if mask.sum() < 2:
        raise ValueError("fewer than 2 grid points fall inside the sub-domain")
    if mask.all():
        return series
    sub_points = t[mask]
    sub_grid = Grid(sub_points, trapezoid_weights(sub_points))
    sub_eval = series.basis.eval[mask]
    sub_basis = BasisSystem(series.basis.kind, sub_grid, sub_eval, _gram(sub_grid, sub_eval))
    return FunctionalSeries(sub_basis, series.coeffs, (lo, hi))


def split_at(series: FunctionalSeries, tau: float) -> tuple[FunctionalSeries, FunctionalSeries]:
    """Split at the current time tau: predictor block [0, tau], response block (tau, 1]."""
    left = restrict(series, series.domain[0], tau)
    right = restrict(series, tau, series.domain[1], include_lo=False)
    return left, right


def center(series: FunctionalSeries) -> tuple[FunctionalSeries, np.ndarray]:
    """Remove the sample mean curve; returns (centered series, mean coefficients)."""
    mean = series.coeffs.mean(axis=0)
    return dataclasses.replace(series, coeffs=series.coeffs - mean), mean


def sqrt_transform(raw: DiscreteSample) -> DiscreteSample:
    """Elementwise square root (variance stabilisation); values must be nonnegative."""
    if np.any(raw.values < 0):
        raise ValueError("square root transform requires nonnegative values")
    return DiscreteSample(raw.grid, np.sqrt(raw.values))


def read_csv(path, grid: Grid | None = None) -> DiscreteSample:
    """Read wide-format curve data: header row, one curve per line.

    If the header cells parse as numbers they are taken as the grid points
    (trapezoidal weights are attached); otherwise pass ``grid`` explicitly or
    an equally spaced closed grid on [0, 1] is assumed.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    cells = [c.strip() for c in header.split(",")]
    if grid is None:
        try:
            points = np.array([float(c) for c in cells])
            grid = Grid(points, trapezoid_weights(points))
        except ValueError:
            grid = make_grid(len(cells))
    return DiscreteSample(grid, values)


def write_csv(path, sample: DiscreteSample, fmt: str = "%.6f") -> None:
    header = ",".join(fmt % p for p in sample.grid.points)
    np.savetxt(path, sample.values, delimiter=",", header=header, comments="", fmt=fmt)
