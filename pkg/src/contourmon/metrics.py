"""Error and cost metrics for the monitoring loop."""

from __future__ import annotations

import numpy as np


class GridMismatchError(ValueError):
    """Reconstructions live on different grids."""


def mean_abs_diff(a, b) -> float:
    """Mean absolute difference between two reconstructions on the same grid.

    This is the norm-1 error driving the margin adaptation; it is also
    reused against the true field sampled on the grid for evaluation.
    """
    if a.grid_spec != b.grid_spec:
        raise GridMismatchError(f"grid specs differ: {a.grid_spec} vs {b.grid_spec}")
    return float(np.mean(np.abs(a.grid - b.grid)))


def cumulative_cost(report_counts) -> list:
    """Running totals of per-iteration reporting counts.

    Accepts a sequence of counts or anything exposing ``report_counts()``
    (e.g. a MonitoringReport).
    """
    counts = report_counts.report_counts() if hasattr(report_counts, "report_counts") else report_counts
    return [int(c) for c in np.cumsum(list(counts))]


def reporting_fraction(count: int, total_sensors: int) -> float:
    """Fraction of the deployment that reported."""
    if total_sensors <= 0:
        raise ValueError("total_sensors must be positive")
    if not 0 <= count <= total_sensors:
        raise ValueError(f"count {count} outside [0, {total_sensors}]")
    return count / total_sensors


def error_db(error: float, reference: float) -> float:
    """Error on a dB axis: 20 log10(error / reference).

    The reference is a plotting convention (the discovered signal range),
    not a property of the error itself.
    """
    if reference <= 0:
        raise ValueError("reference must be positive")
    if error < 0:
        raise ValueError("error must be non-negative")
    if error == 0:
        return float("-inf")
    return 20.0 * float(np.log10(error / reference))
