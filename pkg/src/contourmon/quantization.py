"""
Contour level placement: uniform partitions and Lloyd-Max optimal levels.

Levels play the role of scalar quantizer reproduction points against the
empirical pdf of the reconstructed signal strength. The Lloyd-Max
iteration alternates midpoint cell boundaries with per-cell centroids
until the levels stop moving; all integrals are evaluated in closed form
per histogram bin, not by sampling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

_ZERO_MASS = 1e-15  # cells with less probability mass keep their level for the iteration


class DegeneratePdfError(ValueError):
    """The value range has zero width, so no density can be formed."""


class ConvergenceError(RuntimeError):
    """Lloyd-Max failed to converge; carries the last iterate."""

    def __init__(self, message, last_levels):
        super().__init__(message)
        self.last_levels = last_levels


@dataclass(frozen=True, eq=False)
class ContourLevelSet:
    """M strictly increasing levels inside the open range (lmin, lmax)."""

    levels: np.ndarray
    lmin: float
    lmax: float

    def __post_init__(self):
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=float))
        if self.levels.ndim != 1 or len(self.levels) < 1:
            raise ValueError("need at least one level")
        if not self.lmin < self.lmax:
            raise ValueError(f"invalid range ({self.lmin}, {self.lmax})")
        bounded = np.concatenate([[self.lmin], self.levels, [self.lmax]])
        if not np.all(np.diff(bounded) > 0):
            raise ValueError("levels must be strictly increasing inside the range")

    @property
    def m(self) -> int:
        return len(self.levels)


@dataclass(frozen=True, eq=False)
class EmpiricalPdf:
    """Piecewise-constant density over strictly increasing bin edges."""

    bin_edges: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bin_edges", np.asarray(self.bin_edges, dtype=float))
        object.__setattr__(self, "densities", np.asarray(self.densities, dtype=float))
        if len(self.bin_edges) != len(self.densities) + 1:
            raise ValueError("need one more edge than densities")
        if not np.all(np.diff(self.bin_edges) > 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.densities < 0):
            raise ValueError("densities must be non-negative")
        total = float(np.sum(self.densities * np.diff(self.bin_edges)))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"densities must integrate to 1, got {total}")

    @property
    def support(self):
        return float(self.bin_edges[0]), float(self.bin_edges[-1])


def uniform_levels(lmin: float, lmax: float, m: int) -> ContourLevelSet:
    """M equally spaced interior levels: l_i = lmin + i (lmax-lmin)/(M+1).

    Endpoints are excluded; contour lines at the extremes of a field are
    empty sets.
    """
    if not lmin < lmax:
        raise ValueError(f"invalid range ({lmin}, {lmax})")
    if m < 1:
        raise ValueError("m must be a positive integer")
    step = (lmax - lmin) / (m + 1)
    levels = lmin + step * np.arange(1, m + 1)
    return ContourLevelSet(levels=levels, lmin=float(lmin), lmax=float(lmax))


def estimate_pdf(recon, bin_count: int = 64) -> EmpiricalPdf:
    """Normalized histogram of the reconstruction grid over its value range."""
    if bin_count < 1:
        raise ValueError("bin_count must be positive")
    values = np.asarray(recon.grid, dtype=float).ravel()
    lo, hi = float(np.min(values)), float(np.max(values))
    if not hi > lo:
        raise DegeneratePdfError(f"constant grid (value {lo}) has no spread to bin")
    densities, edges = np.histogram(values, bins=bin_count, range=(lo, hi), density=True)
    return EmpiricalPdf(bin_edges=edges, densities=densities)


def _cumulants(pdf: EmpiricalPdf):
    """Closed-form cumulative moments of the piecewise-constant density.

    Returns a function moments(x) -> (F0, F1, F2) where Fk(x) is the
    integral of t^k f(t) over [support_lo, x], exact per bin.
    """
    edges = pdf.bin_edges
    dens = pdf.densities
    p1 = edges**1
    p2 = edges**2 / 2.0
    p3 = edges**3 / 3.0
    c0 = np.concatenate([[0.0], np.cumsum(dens * np.diff(p1))])
    c1 = np.concatenate([[0.0], np.cumsum(dens * np.diff(p2))])
    c2 = np.concatenate([[0.0], np.cumsum(dens * np.diff(p3))])

    def moments(x):
        x = np.clip(np.asarray(x, dtype=float), edges[0], edges[-1])
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(dens) - 1)
        e = edges[idx]
        d = dens[idx]
        f0 = c0[idx] + d * (x - e)
        f1 = c1[idx] + d * (x**2 - e**2) / 2.0
        f2 = c2[idx] + d * (x**3 - e**3) / 3.0
        return f0, f1, f2

    return moments


def _cell_boundaries(levels: np.ndarray, support) -> np.ndarray:
    """Support endpoints plus midpoints between adjacent levels."""
    lo, hi = support
    return np.concatenate([[lo], (levels[1:] + levels[:-1]) / 2.0, [hi]])


def quantizer_mse(pdf: EmpiricalPdf, levels: ContourLevelSet) -> float:
    """Mean squared quantization error of the levels against the pdf,
    with cells bounded by level midpoints and the support endpoints."""
    ls = levels.levels
    bounds = _cell_boundaries(ls, pdf.support)
    moments = _cumulants(pdf)
    f0, f1, f2 = moments(bounds)
    d0 = np.diff(f0)
    d1 = np.diff(f1)
    d2 = np.diff(f2)
    mse = float(np.sum(d2 - 2.0 * ls * d1 + ls**2 * d0))
    return max(mse, 0.0)


def lloyd_max_levels(
    pdf: EmpiricalPdf,
    m: int,
    initial: ContourLevelSet,
    tol_scale: float = 1e-6,
    max_iter: int = 5000,
    return_mse_history: bool = False,
):
    """Lloyd-Max level placement against an empirical pdf.

    Alternates midpoint boundaries y_i = (l_i + l_{i-1})/2 with per-cell
    centroids l_i = int x f / int f over [y_i, y_{i+1}] until the largest
    level movement falls below tol_scale * support width. Cells with no
    probability mass keep their level for that iteration, so the level
    count is preserved.

    Returns the converged ContourLevelSet, or (levels, mse_history) when
    return_mse_history is set. Raises ConvergenceError (carrying the last
    iterate) after max_iter sweeps; convergence is geometric but slows
    markedly as m grows, hence the generous default cap.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    if initial.m != m:
        raise ValueError(f"initial level count {initial.m} != m = {m}")
    lo, hi = pdf.support
    levels = np.asarray(initial.levels, dtype=float)
    if not (lo < levels[0] and levels[-1] < hi):
        raise ValueError("initial levels must lie strictly inside the pdf support")

    moments = _cumulants(pdf)
    tol = tol_scale * (hi - lo)
    history = [quantizer_mse(pdf, ContourLevelSet(levels, lo, hi))]
    for _ in range(max_iter):
        bounds = _cell_boundaries(levels, (lo, hi))
        f0, f1, _ = moments(bounds)
        mass = np.diff(f0)
        first = np.diff(f1)
        new_levels = levels.copy()
        ok = mass > _ZERO_MASS
        new_levels[ok] = first[ok] / mass[ok]
        movement = float(np.max(np.abs(new_levels - levels)))
        levels = new_levels
        history.append(quantizer_mse(pdf, ContourLevelSet(levels, lo, hi)))
        if movement < tol:
            result = ContourLevelSet(levels=levels, lmin=lo, lmax=hi)
            if return_mse_history:
                return result, history
            return result
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations (last movement {movement:.3e})",
        last_levels=ContourLevelSet(levels=levels, lmin=lo, lmax=hi),
    )


class LloydMaxQuantizer(TransformerMixin, BaseEstimator):
    """Scalar quantizer fitted to sample values, scikit-learn style.

    fit() histograms the samples, then places n_levels reproduction
    points by Lloyd-Max starting from the uniform partition. transform()
    maps values to their nearest level.

    Attributes
    ----------
    levels_: fitted ContourLevelSet.
    pdf_: the EmpiricalPdf the levels were optimized against.
    mse_: quantizer MSE of the fitted levels.
    """

    def __init__(self, n_levels=8, n_bins=64, tol_scale=1e-6, max_iter=5000):
        self.n_levels = n_levels
        self.n_bins = n_bins
        self.tol_scale = tol_scale
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False, dtype=float)
        values = X.ravel()
        lo, hi = float(np.min(values)), float(np.max(values))
        if not hi > lo:
            raise DegeneratePdfError("constant samples have no spread to quantize")
        densities, edges = np.histogram(values, bins=self.n_bins, range=(lo, hi), density=True)
        pdf = EmpiricalPdf(bin_edges=edges, densities=densities)
        initial = uniform_levels(lo, hi, self.n_levels)
        self.levels_ = lloyd_max_levels(
            pdf, self.n_levels, initial, tol_scale=self.tol_scale, max_iter=self.max_iter
        )
        self.pdf_ = pdf
        self.mse_ = quantizer_mse(pdf, self.levels_)
        return self

    def transform(self, X):
        check_is_fitted(self, "levels_")
        X = check_array(X, ensure_2d=False, dtype=float)
        ls = self.levels_.levels
        idx = np.searchsorted((ls[1:] + ls[:-1]) / 2.0, X.ravel())
        return ls[idx].reshape(X.shape)


def levels_to_csv(levels: ContourLevelSet, path) -> None:
    """Rows: index, level; range recorded once as lmin/lmax columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "level", "lmin", "lmax"])
        for i, level in enumerate(levels.levels, start=1):
            writer.writerow([i, repr(float(level)), repr(float(levels.lmin)), repr(float(levels.lmax))])


def pdf_to_csv(pdf: EmpiricalPdf, path) -> None:
    """Rows: bin_lo, bin_hi, density."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "density"])
        for lo, hi, d in zip(pdf.bin_edges[:-1], pdf.bin_edges[1:], pdf.densities):
            writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(d))])
