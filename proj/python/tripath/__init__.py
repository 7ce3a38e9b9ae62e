"""Three-path interference with a dead-time detector."""

from ._core import (
    DegenerateNormalizationError,
    DetectorModel,
    Error,
    InterferometerConfig,
    InvalidConfigError,
    NegativeRateError,
    NonConvergenceError,
    OutOfRangeError,
    ParseError,
    PhasePoint,
    ResourceLimitError,
    SaturationError,
    TotalInternalReflectionError,
    delta,
    detector_forward,
    detector_inverse,
    epsilon,
    estimate_parameters,
    incident_rates,
    kappa,
    measure_kappa,
    predict_kappa_det,
    reconstruct_single_rates,
    run_cli,
    simulate_combination,
)

__all__ = [name for name in dir() if not name.startswith("_")]
