"""Outage, error-rate and capacity analysis of a space-air-ground link.

A ground station feeds an aerial relay over a turbulent optical hop. The
relay forwards the signal over RF through a reconfigurable surface that
serves one reflection user and one transmission user.
"""

from .e2e_metrics import (
    E2EParams,
    KernelError,
    ModulationScheme,
    avg_ber,
    avg_ber_asymptotic,
    calibrate_rf_snr,
    diversity_order,
    e2e_cdf,
    e2e_cdf_asymptotic,
    e2e_params,
    e2e_pdf,
    ergodic_capacity,
    modulation,
    outage_probability,
    snr_moments,
    tdm_baseline_capacity,
)
from .fso_link import FsoParams, NoRootError, fso_params, fso_snr_cdf, fso_snr_pdf
from .rf_link import MomentMatchError, RfParams, moment_match, rf_params, rf_snr_cdf, rf_snr_pdf
from .scenario import ConfigError, ScenarioConfig, derive_geometry, load_config, table2, validate
from .specfun import ContourError, ConvergenceError, PoleError, fox_h_bivariate, meijer_g

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContourError", "ConvergenceError", "E2EParams", "FsoParams",
    "KernelError", "ModulationScheme", "MomentMatchError", "NoRootError", "PoleError",
    "RfParams", "ScenarioConfig", "avg_ber", "avg_ber_asymptotic", "calibrate_rf_snr",
    "derive_geometry", "diversity_order", "e2e_cdf", "e2e_cdf_asymptotic", "e2e_params",
    "e2e_pdf", "ergodic_capacity", "fox_h_bivariate", "fso_params", "fso_snr_cdf",
    "fso_snr_pdf", "load_config", "meijer_g", "modulation", "moment_match",
    "outage_probability", "rf_params", "rf_snr_cdf", "rf_snr_pdf", "snr_moments",
    "table2", "tdm_baseline_capacity", "validate",
]
