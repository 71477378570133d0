"""
Bi-harmonic spline interpolation of scattered observations.

The interpolant is a weighted sum of the 2-D biharmonic Green's function
r^2 (ln r - 1) centered at the data points; the weights solve a dense
symmetric linear system so the surface passes through every data value.
``BiharmonicSpline`` follows the scikit-learn estimator API (fit/predict,
get_params) so it composes with the wider ecosystem.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

_PREDICT_CHUNK = 2048  # grid rows per distance-matrix block, caps memory


class DegenerateInputError(ValueError):
    """Fewer than two distinct points to interpolate."""


class ConditioningError(RuntimeError):
    """The Green's matrix could not be solved to the exactness tolerance."""

    def __init__(self, message, n_points=None, residual=None, condition=None):
        super().__init__(message)
        self.n_points = n_points
        self.residual = residual
        self.condition = condition


def greens_function(r):
    """Biharmonic Green's function r^2 (ln r - 1), with the r=0 limit of 0.

    Accepts scalars or arrays; r must be non-negative.
    """
    scalar = np.isscalar(r)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r * r * (np.log(r) - 1.0)
    out = np.where(r == 0.0, 0.0, out)
    if scalar:
        return float(out)
    return out


@dataclass(frozen=True)
class GridSpec:
    """Regular nx-by-ny lattice spanning [0, width] x [0, height], edges included."""

    nx: int
    ny: int
    width: float
    height: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid must be at least 2 x 2")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid extent must be positive")

    def x_coords(self):
        return np.linspace(0.0, self.width, self.nx)

    def y_coords(self):
        return np.linspace(0.0, self.height, self.ny)

    def points(self):
        """All lattice points as an (nx*ny, 2) array, x-major order."""
        xx, yy = np.meshgrid(self.x_coords(), self.y_coords(), indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(eq=False)
class Reconstruction:
    """Field values on a regular lattice; grid[i, j] sits at (x_i, y_j)."""

    grid: np.ndarray
    grid_spec: GridSpec
    iteration_index: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.shape != (self.grid_spec.nx, self.grid_spec.ny):
            raise ValueError(
                f"grid shape {self.grid.shape} does not match spec "
                f"({self.grid_spec.nx}, {self.grid_spec.ny})"
            )
        if not np.all(np.isfinite(self.grid)):
            raise ValueError("grid values must be finite")


def value_range(recon: Reconstruction):
    """(min, max) over the reconstruction grid."""
    return float(np.min(recon.grid)), float(np.max(recon.grid))


def _merge_coincident(points, values, radius):
    """Average values of points closer than ``radius``; coincident centers
    would make the Green's matrix exactly singular."""
    pairs = cKDTree(points).query_pairs(r=radius, output_type="ndarray")
    if len(pairs) == 0:
        return points, values, 0
    # union-find over the near-coincident pairs
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    roots = np.array([find(i) for i in range(len(points))])
    _, inverse = np.unique(roots, return_inverse=True)
    n_groups = inverse.max() + 1
    counts = np.bincount(inverse, minlength=n_groups).astype(float)
    px = np.bincount(inverse, weights=points[:, 0], minlength=n_groups) / counts
    py = np.bincount(inverse, weights=points[:, 1], minlength=n_groups) / counts
    pv = np.bincount(inverse, weights=values, minlength=n_groups) / counts
    merged = len(points) - n_groups
    return np.column_stack([px, py]), pv, merged


class BiharmonicSpline(RegressorMixin, BaseEstimator):
    """Exact scattered-data interpolator on biharmonic Green's functions.

    Parameters
    ----------
    merge_radius: float
        Points closer than this are merged (values averaged) before
        fitting, since coincident centers make the system singular.
    ridge_scale: float
        When the plain solve misses the exactness tolerance, a diagonal
        ridge of ridge_scale times the mean |G| entry is added and the
        solve retried.
    exactness_tol: float
        Relative tolerance of the per-point exactness check
        |f(p_k) - v_k| <= tol * (1 + |v_k|).

    Attributes
    ----------
    centers_: (n, 2) array of interpolation centers after merging.
    coefficients_: (n,) Green's-function weights.
    ridge_: diagonal regularization actually applied (0.0 for the plain solve).
    n_merged_: number of input points absorbed into coincident groups.
    """

    def __init__(self, merge_radius=1e-9, ridge_scale=1e-8, exactness_tol=1e-6):
        self.merge_radius = merge_radius
        self.ridge_scale = ridge_scale
        self.exactness_tol = exactness_tol

    def fit(self, X, y):
        X = check_array(X, ensure_2d=True, dtype=float)
        y = check_array(y, ensure_2d=False, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected (n, 2) coordinates, got shape {X.shape}")
        if y.ndim != 1 or len(y) != len(X):
            raise ValueError("values must be a 1-D array matching the points")

        points, values, n_merged = _merge_coincident(X, y, self.merge_radius)
        if len(points) < 2:
            raise DegenerateInputError(
                f"need at least 2 distinct points, got {len(points)} after merging"
            )

        G = greens_function(cdist(points, points))
        coef, ridge = self._solve_checked(G, values)

        self.centers_ = points
        self.coefficients_ = coef
        self.ridge_ = ridge
        self.n_merged_ = n_merged
        return self

    def _solve_checked(self, G, values):
        tol = self.exactness_tol * (1.0 + np.abs(values))

        def try_solve(ridge):
            A = G if ridge == 0.0 else G + ridge * np.eye(len(G))
            coef = solve(A, values)
            residual = np.abs(G @ coef - values)
            return coef, float(np.max(residual / (1.0 + np.abs(values)))), np.all(residual <= tol)

        try:
            coef, rel, ok = try_solve(0.0)
            if ok:
                return coef, 0.0
        except np.linalg.LinAlgError:
            rel = np.inf
        ridge = self.ridge_scale * float(np.mean(np.abs(G)))
        try:
            coef, rel, ok = try_solve(ridge)
        except np.linalg.LinAlgError as err:
            raise ConditioningError(
                f"singular Green's matrix for {len(G)} points", n_points=len(G)
            ) from err
        if not ok:
            raise ConditioningError(
                f"interpolation residual {rel:.3e} exceeds tolerance "
                f"{self.exactness_tol:.1e} after ridge {ridge:.3e} "
                f"({len(G)} points, cond {np.linalg.cond(G):.3e})",
                n_points=len(G),
                residual=rel,
                condition=float(np.linalg.cond(G)),
            )
        return coef, ridge

    def predict(self, X):
        check_is_fitted(self, "coefficients_")
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected (n, 2) coordinates, got shape {X.shape}")
        out = np.empty(len(X))
        for start in range(0, len(X), _PREDICT_CHUNK):
            block = X[start : start + _PREDICT_CHUNK]
            out[start : start + _PREDICT_CHUNK] = (
                greens_function(cdist(block, self.centers_)) @ self.coefficients_
            )
        return out


def fit_biharmonic_spline(points, values, **params) -> BiharmonicSpline:
    """Convenience wrapper: fit a BiharmonicSpline on (n, 2) points."""
    return BiharmonicSpline(**params).fit(np.asarray(points, dtype=float), values)


def evaluate_spline(model: BiharmonicSpline, grid_spec: GridSpec, iteration_index: int = 0) -> Reconstruction:
    """Evaluate a fitted spline over the full lattice of ``grid_spec``."""
    values = model.predict(grid_spec.points())
    return Reconstruction(
        grid=values.reshape(grid_spec.nx, grid_spec.ny),
        grid_spec=grid_spec,
        iteration_index=iteration_index,
    )


def field_on_grid(field_model, grid_spec: GridSpec, iteration_index: int = 0) -> Reconstruction:
    """Sample a synthetic field model on the lattice, as a Reconstruction."""
    xx, yy = np.meshgrid(grid_spec.x_coords(), grid_spec.y_coords(), indexing="ij")
    return Reconstruction(
        grid=field_model.evaluate(xx, yy),
        grid_spec=grid_spec,
        iteration_index=iteration_index,
    )


def reconstruction_to_csv(recon: Reconstruction, path) -> None:
    """Rows: i, j, x, y, value."""
    xs = recon.grid_spec.x_coords()
    ys = recon.grid_spec.y_coords()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j", "x", "y", "value"])
        for i in range(recon.grid_spec.nx):
            for j in range(recon.grid_spec.ny):
                writer.writerow([i, j, repr(float(xs[i])), repr(float(ys[j])), repr(float(recon.grid[i, j]))])
