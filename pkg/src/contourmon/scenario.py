"""
Scenario orchestration: config files, replicated runs, merged CSV outputs.

A scenario is one synthetic-field setup run over several independent
replicates (fresh field, deployment, and noise per replicate, all
derived from one master seed). Three entry points:

  run_scenario        one scheme, spatial + temporal, per-replicate CSVs
  compare_schemes     all three schemes on identical fields and noise
  sweep_initial_delta margin trajectories from different starting margins
"""

from __future__ import annotations

import csv
import dataclasses
import os
from dataclasses import dataclass

from .field import deploy_uniform, shift_components, synthesize_field
from .interpolation import GridSpec, field_on_grid, value_range
from .monitoring import (
    MonitoringReport,
    MonitoringSettings,
    Scheme,
    run_spatial_monitoring,
    run_temporal_monitoring,
    write_report_csvs,
)
from .quantization import estimate_pdf
from .seeding import DEPLOY, FIELD, replicate_root, subseed


class ConfigError(ValueError):
    """Malformed scenario config file."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a scenario run depends on, in one flat record."""

    n1: int = 150
    n2: int = 150
    sigma_a: float = 10.0
    sigma_b: float = 3.0
    amp_min: float = 0.0
    amp_max: float = 1.0
    field_width: float = 100.0
    field_height: float = 100.0
    sensor_count: int = 5000
    noise_sigma: float = 0.3
    ma_taps: int = 1
    scheme: str = "LM-SG"
    initial_m: int = 3
    m_max: int = 25
    probe_count: int = 2
    eps_stop_frac: float = 0.01
    initial_delta_scale: float = 1.0
    grid_nx: int = 101
    grid_ny: int = 101
    pdf_bins: int = 64
    periods: int = 20
    drift_dx: float = 1.0
    drift_set: str = "b"
    temporal_adapt_delta: bool = False
    replicates: int = 20
    master_seed: int = 1234
    out_dir: str = "out"

    def __post_init__(self):
        Scheme.from_string(self.scheme)
        if self.drift_set not in ("a", "b"):
            raise ConfigError(f"drift_set must be 'a' or 'b', got {self.drift_set!r}")
        if self.replicates < 0:
            raise ConfigError("replicates must be non-negative")
        if self.periods < 0:
            raise ConfigError("periods must be non-negative")


_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS["bool"] = _parse_bool


def load_config(path) -> ScenarioConfig:
    """Read a flat `key = value` config file.

    Blank lines and `#` comments are ignored. Unknown or duplicate keys
    and unparsable values fail with the offending line number.
    """
    known = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in kwargs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            parser = _PARSERS[known[key].type]
            try:
                kwargs[key] = parser(value)
            except ValueError as err:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}") from None
    try:
        return ScenarioConfig(**kwargs)
    except (ConfigError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from None


def save_config(config: ScenarioConfig, path) -> None:
    """Write every field as `key = value`, loadable by load_config."""
    with open(path, "w") as fh:
        for f in dataclasses.fields(ScenarioConfig):
            value = getattr(config, f.name)
            if f.type == "bool":
                text = "true" if value else "false"
            elif f.type == "float":
                text = repr(float(value))
            else:
                text = str(value)
            fh.write(f"{f.name} = {text}\n")


def save_manifest(config: ScenarioConfig, out_dir) -> None:
    """Write manifest.txt: the resolved config plus the seed derivation.

    Seed notes are comment lines, so load_config on the manifest
    reproduces the config exactly.
    """
    path = os.path.join(out_dir, "manifest.txt")
    save_config(config, path)
    with open(path, "a") as fh:
        fh.write("# replicate seed roots are numpy SeedSequence(master_seed, spawn_key=(replicate,)):\n")
        for replicate in range(config.replicates):
            fh.write(f"# replicate {replicate}: SeedSequence({config.master_seed}, "
                     f"spawn_key=({replicate},))\n")


# -- per-replicate plumbing ---------------------------------------------------


def build_replicate(config: ScenarioConfig, replicate: int):
    """Field model, deployment, and seed root for one replicate."""
    root = replicate_root(config.master_seed, replicate)
    model = synthesize_field(
        config.n1, config.n2, config.sigma_a, config.sigma_b,
        config.field_width, config.field_height, subseed(root, FIELD),
        amp_min=config.amp_min, amp_max=config.amp_max,
    )
    deployment = deploy_uniform(
        config.sensor_count, config.field_width, config.field_height,
        subseed(root, DEPLOY),
    )
    return root, model, deployment


def monitoring_settings(config: ScenarioConfig, scheme: Scheme,
                        field_model=None) -> MonitoringSettings:
    """Translate a config into engine settings.

    The fixed-margin scheme needs the true signal distribution, so its
    settings carry a pdf and range measured on the actual field.
    """
    grid = GridSpec(config.grid_nx, config.grid_ny, config.field_width, config.field_height)
    known_pdf = None
    known_range = None
    if scheme is Scheme.LM_FIXED:
        if field_model is None:
            raise ValueError("LM-fixed settings need the field model")
        truth = field_on_grid(field_model, grid)
        known_pdf = estimate_pdf(truth, config.pdf_bins)
        known_range = value_range(truth)
    return MonitoringSettings(
        grid_spec=grid,
        noise_sigma=config.noise_sigma,
        ma_taps=config.ma_taps,
        initial_m=config.initial_m,
        m_max=config.m_max,
        probe_count=config.probe_count,
        eps_stop_frac=config.eps_stop_frac,
        initial_delta_scale=config.initial_delta_scale,
        pdf_bins=config.pdf_bins,
        temporal_adapt_delta=config.temporal_adapt_delta,
        known_pdf=known_pdf,
        known_range=known_range,
    )


def drifted_fields(model, config: ScenarioConfig):
    """The field at periods 1..periods, drifting one component set."""
    for period in range(1, config.periods + 1):
        yield shift_components(model, period * config.drift_dx, which=config.drift_set)


def run_replicate(config: ScenarioConfig, scheme: Scheme, replicate: int) -> MonitoringReport:
    """Spatial then temporal monitoring for one replicate; merged report."""
    root, model, deployment = build_replicate(config, replicate)
    settings = monitoring_settings(config, scheme, field_model=model)
    state, report = run_spatial_monitoring(model, deployment, scheme, settings, root)
    if config.periods > 0:
        temporal = run_temporal_monitoring(
            state, drifted_fields(model, config), deployment, settings, root)
        report.temporal_rows = temporal.temporal_rows
    return report


# -- scenario entry points ----------------------------------------------------


def run_scenario(config: ScenarioConfig, out_dir=None):
    """Run the configured scheme over all replicates; write merged CSVs.

    Creates out_dir with manifest.txt, spatial.csv, temporal.csv,
    delta_trace.csv. With zero replicates only the manifest is written.
    Returns the (replicate, report) pairs.
    """
    out_dir = config.out_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    save_manifest(config, out_dir)
    scheme = Scheme.from_string(config.scheme)
    pairs = []
    for replicate in range(config.replicates):
        pairs.append((replicate, run_replicate(config, scheme, replicate)))
    if pairs:
        write_report_csvs(pairs, out_dir)
    return pairs


COMPARE_COLUMNS = ["scheme", "replicate", "n", "M", "delta", "reports",
                   "cumulative_cost", "error_proxy", "error_vs_truth", "range_width"]
COMPARE_MEAN_COLUMNS = ["scheme", "n", "M", "delta", "reports",
                        "cumulative_cost", "error_proxy", "error_vs_truth", "range_width"]


def _r(value) -> str:
    return repr(float(value))


def compare_schemes(config: ScenarioConfig, schemes=None, out_dir=None):
    """Run several schemes on identical fields, deployments, and noise.

    schemes defaults to all three; repeats are allowed (and produce
    identical row blocks). Early stopping is disabled so every run
    reaches m_max and the per-iteration rows align across schemes; the
    temporal phase is skipped since only spatial rows are compared.
    Writes compare.csv (all rows) and compare_mean.csv (replicate means
    per scheme and iteration). Returns [(scheme value, pairs), ...].
    """
    if schemes is None:
        schemes = (Scheme.U_SG, Scheme.LM_FIXED, Scheme.LM_SG)
    schemes = [s if isinstance(s, Scheme) else Scheme.from_string(s) for s in schemes]
    if len(schemes) < 2:
        raise ValueError("compare_schemes needs at least two schemes")
    out_dir = config.out_dir if out_dir is None else out_dir
    config = dataclasses.replace(config, eps_stop_frac=0.0, periods=0)
    os.makedirs(out_dir, exist_ok=True)
    save_manifest(config, out_dir)

    results = []
    for scheme in schemes:
        pairs = []
        for replicate in range(config.replicates):
            pairs.append((replicate, run_replicate(config, scheme, replicate)))
        results.append((scheme.value, pairs))

    with open(os.path.join(out_dir, "compare.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARE_COLUMNS)
        for scheme_name, pairs in results:
            for replicate, report in pairs:
                for r in report.spatial_rows:
                    writer.writerow([scheme_name, replicate, r.n, r.m, _r(r.delta),
                                     r.reports, r.cumulative_cost, _r(r.error_proxy),
                                     _r(r.error_vs_truth), _r(r.range_width)])

    with open(os.path.join(out_dir, "compare_mean.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARE_MEAN_COLUMNS)
        for scheme_name, pairs in results:
            reports = [report for _, report in pairs]
            if not reports:
                continue
            n_iters = min(len(rep.spatial_rows) for rep in reports)
            count = len(reports)
            for i in range(n_iters):
                rows = [rep.spatial_rows[i] for rep in reports]
                writer.writerow([
                    scheme_name, rows[0].n, rows[0].m,
                    _r(sum(r.delta for r in rows) / count),
                    _r(sum(r.reports for r in rows) / count),
                    _r(sum(r.cumulative_cost for r in rows) / count),
                    _r(sum(r.error_proxy for r in rows) / count),
                    _r(sum(r.error_vs_truth for r in rows) / count),
                    _r(sum(r.range_width for r in rows) / count),
                ])

    return results


SWEEP_COLUMNS = ["delta_scale", "replicate", "n", "delta"]


def sweep_initial_delta(config: ScenarioConfig, scales=(0.5, 1.0, 2.0), out_dir=None):
    """Margin trajectories from different starting margins, same everything else.

    Writes sweep.csv with one row per (scale, replicate, iteration); the
    last row of each trajectory is the post-update margin after the final
    iteration. Returns {scale: [(replicate, report), ...]}.
    """
    out_dir = config.out_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    save_manifest(config, out_dir)
    scheme = Scheme.from_string(config.scheme)
    if not scheme.adapts_delta:
        raise ValueError(f"scheme {scheme.value} keeps the margin fixed; nothing to sweep")

    results = {}
    for scale in scales:
        # spatial only: the sweep product is the margin trajectory
        scaled = dataclasses.replace(
            config, initial_delta_scale=config.initial_delta_scale * scale, periods=0)
        pairs = []
        for replicate in range(config.replicates):
            pairs.append((replicate, run_replicate(scaled, scheme, replicate)))
        results[scale] = pairs

    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for scale in scales:
            for replicate, report in results[scale]:
                for r in report.delta_rows:
                    writer.writerow([_r(scale), replicate, r.n, _r(r.delta)])

    return results
