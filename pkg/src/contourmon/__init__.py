"""
contourmon: contour-band monitoring of correlated 2-D sensor fields.

A fusion center tracks a smooth signal field by querying only the
sensors whose readings fall within an adaptive margin of a set of
contour levels, reconstructing the field from those few reports with a
bi-harmonic spline. Level placement is either uniform or Lloyd-Max
(pdf-optimal); the margin adapts by a normalized stochastic-gradient
rule driven by successive reconstruction differences.
"""

from .field import (
    GaussianComponent,
    InsufficientHistoryError,
    ObservationSet,
    SensorDeployment,
    SyntheticFieldModel,
    deploy_uniform,
    evaluate_field,
    load_field_model,
    moving_average,
    observations_to_csv,
    observe,
    save_field_model,
    shift_components,
    synthesize_field,
)
from .interpolation import (
    BiharmonicSpline,
    ConditioningError,
    DegenerateInputError,
    GridSpec,
    Reconstruction,
    evaluate_spline,
    field_on_grid,
    fit_biharmonic_spline,
    greens_function,
    reconstruction_to_csv,
    value_range,
)
from .metrics import (
    GridMismatchError,
    cumulative_cost,
    error_db,
    mean_abs_diff,
    reporting_fraction,
)
from .monitoring import (
    DeltaState,
    MonitoringReport,
    MonitoringSettings,
    MonitoringState,
    ReportingSet,
    Scheme,
    SplineConditioningError,
    initial_range_probe,
    query_sensors,
    run_spatial_monitoring,
    run_temporal_monitoring,
    spatial_iteration,
    update_delta,
    update_delta_mu,
    write_report_csvs,
)
from .quantization import (
    ContourLevelSet,
    ConvergenceError,
    DegeneratePdfError,
    EmpiricalPdf,
    LloydMaxQuantizer,
    estimate_pdf,
    levels_to_csv,
    lloyd_max_levels,
    pdf_to_csv,
    quantizer_mse,
    uniform_levels,
)
from .scenario import (
    ConfigError,
    ScenarioConfig,
    compare_schemes,
    load_config,
    run_scenario,
    save_config,
    sweep_initial_delta,
)
from .seeding import replicate_root, subseed

__version__ = "0.1.0"

__all__ = [
    "BiharmonicSpline",
    "ConditioningError",
    "ConfigError",
    "ContourLevelSet",
    "ConvergenceError",
    "DegenerateInputError",
    "DegeneratePdfError",
    "DeltaState",
    "EmpiricalPdf",
    "GaussianComponent",
    "GridMismatchError",
    "GridSpec",
    "InsufficientHistoryError",
    "LloydMaxQuantizer",
    "MonitoringReport",
    "MonitoringSettings",
    "MonitoringState",
    "ObservationSet",
    "Reconstruction",
    "ReportingSet",
    "ScenarioConfig",
    "Scheme",
    "SensorDeployment",
    "SplineConditioningError",
    "SyntheticFieldModel",
    "compare_schemes",
    "cumulative_cost",
    "deploy_uniform",
    "error_db",
    "estimate_pdf",
    "evaluate_field",
    "evaluate_spline",
    "field_on_grid",
    "fit_biharmonic_spline",
    "greens_function",
    "initial_range_probe",
    "levels_to_csv",
    "lloyd_max_levels",
    "load_config",
    "load_field_model",
    "mean_abs_diff",
    "moving_average",
    "observations_to_csv",
    "observe",
    "pdf_to_csv",
    "quantizer_mse",
    "query_sensors",
    "reconstruction_to_csv",
    "replicate_root",
    "reporting_fraction",
    "run_scenario",
    "run_spatial_monitoring",
    "run_temporal_monitoring",
    "save_config",
    "save_field_model",
    "shift_components",
    "spatial_iteration",
    "subseed",
    "sweep_initial_delta",
    "synthesize_field",
    "uniform_levels",
    "update_delta",
    "update_delta_mu",
    "value_range",
    "write_report_csvs",
]
