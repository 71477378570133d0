"""
The fusion-center monitoring engine.

Spatial monitoring progressively discovers the signal range, the contour
levels, and the reporting margin: each iteration queries the sensors
whose reading falls within the margin of some level, reconstructs the
field with a bi-harmonic spline, measures the successive-reconstruction
error, adapts the margin from the normalized error gradient, adds one
level, and re-places the level set. Temporal monitoring then tracks the
field period by period with the converged level count and margin frozen.

Three level-placement schemes are supported:

  U-SG      uniform levels, adapted margin, unknown range
  LM-fixed  Lloyd-Max levels from a known pdf and range, fixed margin
  LM-SG     Lloyd-Max levels from the estimated pdf, adapted margin
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .field import ObservationSet, SensorDeployment, moving_average, observe
from .interpolation import (
    ConditioningError,
    GridSpec,
    Reconstruction,
    evaluate_spline,
    field_on_grid,
    fit_biharmonic_spline,
    value_range,
)
from .metrics import mean_abs_diff, reporting_fraction
from .quantization import (
    ContourLevelSet,
    DegeneratePdfError,
    EmpiricalPdf,
    estimate_pdf,
    lloyd_max_levels,
    uniform_levels,
)
from .seeding import PROBE, SPATIAL_NOISE, TEMPORAL_NOISE, subseed

_ZERO_ERROR = 1e-12  # below this, consecutive errors are treated as both zero


class Scheme(enum.Enum):
    """Level-placement scheme of a monitoring run."""

    U_SG = "U-SG"
    LM_FIXED = "LM-fixed"
    LM_SG = "LM-SG"

    @property
    def adapts_delta(self) -> bool:
        return self is not Scheme.LM_FIXED

    @property
    def uses_lloyd_max(self) -> bool:
        return self is not Scheme.U_SG

    @classmethod
    def from_string(cls, name: str) -> "Scheme":
        for member in cls:
            if member.value == name:
                return member
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown scheme {name!r}; valid schemes: {valid}")


class SplineConditioningError(RuntimeError):
    """Spline fit failed inside an iteration; carries the pre-iteration state."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


@dataclass
class DeltaState:
    """Reporting margin and the error history that drives its adaptation."""

    delta: float
    error_history: list = field(default_factory=list)
    mu: float | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass
class MonitoringState:
    """Snapshot of the fusion-center loop between iterations."""

    scheme: Scheme
    level_set: ContourLevelSet
    delta_state: DeltaState
    last_reconstruction: Reconstruction
    iteration: int = 0
    cost_log: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.level_set.m


@dataclass(frozen=True, eq=False)
class ReportingSet:
    """Sensors whose reading fell within the margin of at least one level.

    Each sensor appears once even when it matches several bands;
    matched_levels records the indices of every matched level per report.
    """

    sensor_ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    matched_levels: list

    def __len__(self):
        return len(self.sensor_ids)


@dataclass(frozen=True)
class MonitoringSettings:
    """Knobs shared by the spatial and temporal loops."""

    grid_spec: GridSpec
    noise_sigma: float = 0.3
    ma_taps: int = 1
    initial_m: int = 3
    m_max: int = 25
    probe_count: int = 2
    eps_stop_frac: float = 0.01
    initial_delta_scale: float = 1.0
    pdf_bins: int = 64
    delta_floor_frac: float = 1e-6
    lm_tol_scale: float = 1e-6
    lm_max_iter: int = 5000
    temporal_adapt_delta: bool = False
    known_pdf: EmpiricalPdf | None = None
    known_range: tuple | None = None

    def __post_init__(self):
        if self.initial_m < 1 or self.m_max < self.initial_m:
            raise ValueError("need 1 <= initial_m <= m_max")
        if self.probe_count < 2:
            raise ValueError("probe_count must be at least 2")
        if self.ma_taps < 1:
            raise ValueError("ma_taps must be a positive integer")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.initial_delta_scale <= 0:
            raise ValueError("initial_delta_scale must be positive")


@dataclass
class SpatialRow:
    n: int
    m: int
    delta: float
    reports: int
    cumulative_cost: int
    error_proxy: float
    error_vs_truth: float
    range_width: float


@dataclass
class TemporalRow:
    period: int
    reports: int
    fraction: float
    error_vs_truth: float
    range_width: float


@dataclass
class DeltaRow:
    n: int
    delta: float


@dataclass
class MonitoringReport:
    """Per-iteration, per-period, and margin traces of one run."""

    scheme: str = ""
    spatial_rows: list = field(default_factory=list)
    temporal_rows: list = field(default_factory=list)
    delta_rows: list = field(default_factory=list)
    probe_cost: int = 0
    total_sensors: int = 0

    def report_counts(self):
        return [row.reports for row in self.spatial_rows]

    def write_csvs(self, outdir, replicate: int = 0) -> None:
        write_report_csvs([(replicate, self)], outdir)


SPATIAL_COLUMNS = ["replicate", "n", "M", "delta", "reports", "cumulative_cost",
                   "error_proxy", "error_vs_truth", "range_width"]
TEMPORAL_COLUMNS = ["replicate", "period", "reports", "fraction", "error_vs_truth", "range_width"]
DELTA_COLUMNS = ["replicate", "n", "delta"]


def _f(value) -> str:
    """Full-precision decimal form; plain-float repr round-trips exactly."""
    return repr(float(value))


def write_report_csvs(reports, outdir) -> None:
    """Write spatial.csv, temporal.csv, delta_trace.csv for (replicate, report) pairs."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "spatial.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPATIAL_COLUMNS)
        for rep, report in reports:
            for r in report.spatial_rows:
                writer.writerow([rep, r.n, r.m, _f(r.delta), r.reports, r.cumulative_cost,
                                 _f(r.error_proxy), _f(r.error_vs_truth), _f(r.range_width)])
    with open(os.path.join(outdir, "temporal.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TEMPORAL_COLUMNS)
        for rep, report in reports:
            for r in report.temporal_rows:
                writer.writerow([rep, r.period, r.reports, _f(r.fraction),
                                 _f(r.error_vs_truth), _f(r.range_width)])
    with open(os.path.join(outdir, "delta_trace.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DELTA_COLUMNS)
        for rep, report in reports:
            for r in report.delta_rows:
                writer.writerow([rep, r.n, _f(r.delta)])


# -- core operations ----------------------------------------------------------


def initial_range_probe(deployment: SensorDeployment, observations: ObservationSet,
                        probe_count: int, rng_seed: int):
    """Ask a few arbitrary sensors for readings; their min/max seed the range."""
    if probe_count < 2:
        raise ValueError("probe_count must be at least 2")
    if probe_count > len(deployment):
        raise ValueError(f"probe_count {probe_count} exceeds sensor count {len(deployment)}")
    if not np.array_equal(observations.sensor_ids, deployment.sensor_ids):
        raise ValueError("observations do not match the deployment")
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(len(deployment), size=probe_count, replace=False)
    picked = observations.values[idx]
    return float(np.min(picked)), float(np.max(picked))


def query_sensors(observations: ObservationSet, deployment: SensorDeployment,
                  levels: ContourLevelSet, delta: float) -> ReportingSet:
    """Sensors whose reading lies within delta of at least one level.

    The query cost is the number of reports; a sensor matching several
    bands still transmits once.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not np.array_equal(observations.sensor_ids, deployment.sensor_ids):
        raise ValueError("observations do not match the deployment")
    within = np.abs(observations.values[:, None] - levels.levels[None, :]) <= delta
    mask = within.any(axis=1)
    idx = np.flatnonzero(mask)
    return ReportingSet(
        sensor_ids=deployment.sensor_ids[idx],
        x=deployment.x[idx],
        y=deployment.y[idx],
        values=observations.values[idx],
        matched_levels=[np.flatnonzero(within[i]) for i in idx],
    )


def update_delta(delta_prev: float, err_prev: float, err_prev2: float) -> float:
    """Normalized stochastic-gradient margin update.

    delta <- delta * (1 + (err_prev - err_prev2) / (err_prev + err_prev2)).
    The multiplier stays strictly inside (0, 2) for positive errors, so
    the margin remains positive without any tuning constant. When both
    errors are below 1e-12 the margin is returned unchanged instead of
    evaluating 0/0.
    """
    if not delta_prev > 0:
        raise ValueError(f"delta_prev must be positive, got {delta_prev}")
    if err_prev < 0 or err_prev2 < 0:
        raise ValueError(f"errors must be positive, got ({err_prev}, {err_prev2})")
    if max(err_prev, err_prev2) <= _ZERO_ERROR:
        return float(delta_prev)
    if err_prev <= 0 or err_prev2 <= 0:
        raise ValueError(f"errors must be positive, got ({err_prev}, {err_prev2})")
    return float(delta_prev * (1.0 + (err_prev - err_prev2) / (err_prev + err_prev2)))


def update_delta_mu(delta_prev: float, err_prev: float, err_prev2: float,
                    mu: float, delta_floor: float = 1e-12) -> float:
    """Unnormalized margin update delta * (1 + mu (err_prev - err_prev2)).

    Kept for comparison experiments: without normalization the update is
    not self-stabilizing, so non-positive results are clamped to
    delta_floor with a warning.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not delta_prev > 0:
        raise ValueError(f"delta_prev must be positive, got {delta_prev}")
    raw = delta_prev * (1.0 + mu * (err_prev - err_prev2))
    if raw <= 0:
        logging.getLogger(__name__).warning(
            "margin update produced %g, clamped to %g", raw, delta_floor
        )
        return float(delta_floor)
    return float(raw)


def zero_reconstruction(grid_spec: GridSpec) -> Reconstruction:
    """The all-zero baseline the first error is measured against."""
    return Reconstruction(np.zeros((grid_spec.nx, grid_spec.ny)), grid_spec, iteration_index=0)


def _warm_start_levels(prev: ContourLevelSet, m: int, lo: float, hi: float) -> ContourLevelSet:
    """Carry the previous levels onto a new support as a Lloyd-Max start.

    The old levels are affine-mapped from the old support to the new
    one, which preserves ordering and keeps them strictly interior. When
    one more level is needed it goes in the middle of the widest gap.
    """
    prev_arr = np.asarray(prev.levels, dtype=float)
    scaled = lo + (prev_arr - prev.lmin) / (prev.lmax - prev.lmin) * (hi - lo)
    if m == len(scaled) + 1:
        bounds = np.concatenate([[lo], scaled, [hi]])
        widest = int(np.argmax(np.diff(bounds)))
        scaled = np.sort(np.append(scaled, (bounds[widest] + bounds[widest + 1]) / 2.0))
    elif m != len(scaled):
        return uniform_levels(lo, hi, m)
    return ContourLevelSet(levels=scaled, lmin=lo, lmax=hi)


def _next_levels(scheme: Scheme, m: int, lmin: float, lmax: float,
                 recon: Reconstruction, settings: MonitoringSettings,
                 prev_levels: ContourLevelSet | None = None) -> ContourLevelSet:
    """Place the next level set per the scheme's rule.

    The Lloyd-Max schemes warm-start from the previous placement so the
    levels evolve smoothly from one iteration to the next instead of
    being re-derived from scratch against each new pdf estimate.
    """
    if scheme is Scheme.U_SG:
        return uniform_levels(lmin, lmax, m)
    if scheme is Scheme.LM_FIXED:
        pdf = settings.known_pdf
    else:
        try:
            pdf = estimate_pdf(recon, settings.pdf_bins)
        except DegeneratePdfError:
            # constant reconstruction (e.g. after an empty query); fall back
            # to uniform placement on the current range for this iteration
            return uniform_levels(lmin, lmax, m)
    if prev_levels is not None:
        initial = _warm_start_levels(prev_levels, m, *pdf.support)
    else:
        initial = uniform_levels(*pdf.support, m)
    return lloyd_max_levels(pdf, m, initial,
                            tol_scale=settings.lm_tol_scale, max_iter=settings.lm_max_iter)


def spatial_iteration(state: MonitoringState, observations: ObservationSet,
                      deployment: SensorDeployment, settings: MonitoringSettings) -> MonitoringState:
    """One pass of the spatial monitoring loop.

    Query -> reconstruct -> successive error -> range update -> margin
    update (SG schemes, once two errors exist) -> M+1 -> new level set.
    An empty (or sub-fittable) reporting set keeps the previous
    reconstruction and carries the previous error forward.
    """
    if state.scheme is Scheme.LM_FIXED and (settings.known_pdf is None or settings.known_range is None):
        raise ValueError("LM-fixed requires known_pdf and known_range in the settings")
    n = state.iteration + 1
    delta = state.delta_state.delta
    reports = query_sensors(observations, deployment, state.level_set, delta)

    if len(reports) >= 2:
        try:
            spline = fit_biharmonic_spline(np.column_stack([reports.x, reports.y]), reports.values)
        except ConditioningError as err:
            raise SplineConditioningError(str(err), state=state) from err
        recon = evaluate_spline(spline, settings.grid_spec, iteration_index=n)
        error_n = mean_abs_diff(recon, state.last_reconstruction)
    else:
        recon = state.last_reconstruction
        error_n = state.delta_state.error_history[-1] if state.delta_state.error_history else 0.0

    if state.scheme is Scheme.LM_FIXED:
        lmin, lmax = settings.known_range
    else:
        lmin, lmax = value_range(recon)
        if not lmax > lmin:
            lmin, lmax = state.level_set.lmin, state.level_set.lmax

    new_delta = delta
    if state.scheme.adapts_delta and state.delta_state.error_history:
        err_prev2 = state.delta_state.error_history[-1]
        if min(error_n, err_prev2) > 0 or max(error_n, err_prev2) <= _ZERO_ERROR:
            new_delta = update_delta(delta, error_n, err_prev2)
        new_delta = max(new_delta, settings.delta_floor_frac * (lmax - lmin))

    new_level_set = _next_levels(state.scheme, state.m + 1, lmin, lmax, recon, settings,
                                 prev_levels=state.level_set)

    return MonitoringState(
        scheme=state.scheme,
        level_set=new_level_set,
        delta_state=DeltaState(new_delta, state.delta_state.error_history + [error_n],
                               state.delta_state.mu),
        last_reconstruction=recon,
        iteration=n,
        cost_log=state.cost_log + [len(reports)],
    )


def observe_filtered(field_model, deployment: SensorDeployment, settings: MonitoringSettings,
                     seed_root, purpose: int, index: int) -> ObservationSet:
    """Fresh noisy readings, moving-average filtered down to the configured
    effective noise level.

    The raw per-reading noise is noise_sigma * sqrt(ma_taps), so the
    m-tap average has standard deviation noise_sigma.
    """
    raw_sigma = settings.noise_sigma * math.sqrt(settings.ma_taps)
    sets = [
        observe(field_model, deployment, raw_sigma,
                subseed(seed_root, purpose, index, tap), timestamp_index=index)
        for tap in range(settings.ma_taps)
    ]
    return moving_average(sets, settings.ma_taps)


def _initial_state(scheme: Scheme, deployment, settings, seed_root, probe_observations):
    """Steps 1-3: probe the range, place the first levels, pick the margin."""
    if scheme is Scheme.LM_FIXED:
        if settings.known_pdf is None or settings.known_range is None:
            raise ValueError("LM-fixed requires known_pdf and known_range in the settings")
        lmin, lmax = settings.known_range
        initial = uniform_levels(*settings.known_pdf.support, settings.initial_m)
        levels = lloyd_max_levels(settings.known_pdf, settings.initial_m, initial,
                                  tol_scale=settings.lm_tol_scale, max_iter=settings.lm_max_iter)
        probe_cost = 0
    else:
        lmin, lmax = initial_range_probe(deployment, probe_observations,
                                         settings.probe_count, subseed(seed_root, PROBE))
        if not lmax > lmin:
            raise ValueError(
                f"probed readings are all {lmin}; cannot place initial levels "
                f"(try a larger probe_count)"
            )
        levels = uniform_levels(lmin, lmax, settings.initial_m)
        probe_cost = settings.probe_count

    if levels.m >= 2:
        delta0 = float(levels.levels[1] - levels.levels[0]) / 2.0
    else:
        delta0 = float(levels.lmax - levels.lmin) / 4.0
    delta0 *= settings.initial_delta_scale

    state = MonitoringState(
        scheme=scheme,
        level_set=levels,
        delta_state=DeltaState(delta0),
        last_reconstruction=zero_reconstruction(settings.grid_spec),
    )
    return state, probe_cost


def run_spatial_monitoring(field_model, deployment: SensorDeployment, scheme: Scheme,
                           settings: MonitoringSettings, seed_root,
                           truth: Reconstruction | None = None):
    """Run the full spatial monitoring loop.

    Stops when the level count reaches m_max, or when the successive
    error stays below eps_stop_frac of the discovered range for two
    consecutive iterations. Returns (final state, report); the final
    state keeps the last level set actually queried, so its level count
    is the converged M for temporal tracking.

    The whole spatial phase works from one filtered observation
    snapshot: the learning iterations are fast relative to the sensors'
    moving-average window, so consecutive queries see essentially the
    same filtered readings. Temporal periods draw fresh noise.
    """
    if truth is None:
        truth = field_on_grid(field_model, settings.grid_spec)
    snapshot = observe_filtered(field_model, deployment, settings, seed_root, SPATIAL_NOISE, 0)
    state, probe_cost = _initial_state(scheme, deployment, settings, seed_root, snapshot)
    report = MonitoringReport(scheme=scheme.value, probe_cost=probe_cost,
                              total_sensors=len(deployment))

    cumulative = 0
    while True:
        m_used = state.m
        delta_used = state.delta_state.delta
        levels_used = state.level_set
        state = spatial_iteration(state, snapshot, deployment, settings)
        cumulative += state.cost_log[-1]
        error_n = state.delta_state.error_history[-1]
        report.spatial_rows.append(SpatialRow(
            n=state.iteration, m=m_used, delta=delta_used,
            reports=state.cost_log[-1], cumulative_cost=cumulative,
            error_proxy=error_n,
            error_vs_truth=mean_abs_diff(state.last_reconstruction, truth),
            range_width=state.level_set.lmax - state.level_set.lmin,
        ))
        report.delta_rows.append(DeltaRow(n=state.iteration, delta=delta_used))

        if m_used >= settings.m_max:
            break
        eps = settings.eps_stop_frac * (state.level_set.lmax - state.level_set.lmin)
        errs = state.delta_state.error_history
        if len(errs) >= 2 and errs[-1] < eps and errs[-2] < eps:
            break

    # trailing entry: the adapted margin the loop would use next, i.e. the
    # value temporal monitoring freezes
    report.delta_rows.append(DeltaRow(n=state.iteration + 1, delta=state.delta_state.delta))
    return replace(state, level_set=levels_used), report


def run_temporal_monitoring(state: MonitoringState, field_sequence, deployment: SensorDeployment,
                            settings: MonitoringSettings, seed_root) -> MonitoringReport:
    """Track a field sequence with the converged parameters.

    The level count and (by default) the margin stay frozen; each period
    re-queries, reconstructs, refreshes the range, and re-places the same
    number of levels from the newest pdf estimate.
    """
    m_t = state.m
    delta_t = state.delta_state.delta
    levels = state.level_set
    last_recon = state.last_reconstruction
    error_history = list(state.delta_state.error_history)
    report = MonitoringReport(scheme=state.scheme.value, total_sensors=len(deployment))

    for period, field_model in enumerate(field_sequence, start=1):
        obs = observe_filtered(field_model, deployment, settings, seed_root,
                               TEMPORAL_NOISE, period)
        reports = query_sensors(obs, deployment, levels, delta_t)
        if len(reports) >= 2:
            try:
                spline = fit_biharmonic_spline(
                    np.column_stack([reports.x, reports.y]), reports.values)
            except ConditioningError as err:
                raise SplineConditioningError(str(err), state=state) from err
            recon = evaluate_spline(spline, settings.grid_spec, iteration_index=period)
        else:
            recon = last_recon

        if state.scheme is Scheme.LM_FIXED:
            lmin, lmax = settings.known_range
        else:
            lmin, lmax = value_range(recon)
            if not lmax > lmin:
                lmin, lmax = levels.lmin, levels.lmax

        if settings.temporal_adapt_delta and state.scheme.adapts_delta:
            error_n = mean_abs_diff(recon, last_recon)
            if error_history and min(error_n, error_history[-1]) > 0:
                delta_t = update_delta(delta_t, error_n, error_history[-1])
                delta_t = max(delta_t, settings.delta_floor_frac * (lmax - lmin))
            error_history.append(error_n)

        levels = _next_levels(state.scheme, m_t, lmin, lmax, recon, settings,
                              prev_levels=levels)
        truth_p = field_on_grid(field_model, settings.grid_spec)
        report.temporal_rows.append(TemporalRow(
            period=period,
            reports=len(reports),
            fraction=reporting_fraction(len(reports), len(deployment)),
            error_vs_truth=mean_abs_diff(recon, truth_p),
            range_width=lmax - lmin,
        ))
        last_recon = recon

    return report
