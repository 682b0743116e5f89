"""Calibration of observational effect estimates using control outcomes."""

from ._empcal import (
    CalibratedInterval,
    ControlRecord,
    ControlSet,
    EmpcalError,
    IoError,
    NumericalError,
    UsageError,
    ValidationError,
    NullDistribution,
    PosteriorSamples,
    SystematicErrorModel,
    __version__,
    calibrate_posterior,
    calibrated_ci,
    calibrated_p,
    fit_bias_model,
    fit_null,
    fit_systematic,
    load_controls,
    main,
    rmse,
    run_protocol,
    simulate_control_universe,
    wald_interval,
    write_controls,
)

__all__ = [
    "CalibratedInterval",
    "ControlRecord",
    "ControlSet",
    "EmpcalError",
    "IoError",
    "NumericalError",
    "UsageError",
    "ValidationError",
    "NullDistribution",
    "PosteriorSamples",
    "SystematicErrorModel",
    "__version__",
    "calibrate_posterior",
    "calibrated_ci",
    "calibrated_p",
    "fit_bias_model",
    "fit_null",
    "fit_systematic",
    "load_controls",
    "main",
    "rmse",
    "run_protocol",
    "simulate_control_universe",
    "wald_interval",
    "write_controls",
]
