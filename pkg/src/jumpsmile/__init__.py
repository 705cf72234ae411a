"""Pricing and calibration engine for local-volatility models with Poisson jumps.

Core surface: build a :class:`ModelSpec`, price with
:func:`expansion.approx_price`, validate against :func:`montecarlo.mc_price`,
calibrate quote surfaces with :func:`calibration.bootstrap_calibrate`.
"""

from .analytic import (
    DealTerms,
    ProxyLaw,
    gaussian_payoff_derivative,
    implied_vol,
    merton_greek,
    merton_price,
)
from .calibration import (
    CalibConfig,
    CalibrationResult,
    Quote,
    VolSurface,
    bootstrap_calibrate,
    fit_bucket,
    levenberg_marquardt,
)
from .expansion import (
    Diagnostics,
    ExpansionState,
    PriceBreakdown,
    approx_price,
    coefficients_aa,
    coefficients_direct,
    coefficients_quadrature,
    coefficients_recursive,
    diagnostics,
)
from .model import (
    CALL,
    DIGITAL,
    LOG_AA,
    NORMAL,
    PUT,
    CevLocalVol,
    ExplicitLocalVol,
    JumpParams,
    MarketEnv,
    ModelSpec,
    Payoff,
    PiecewiseCurve,
    eval_drift_at_proxy,
    eval_vol_at_proxy,
    frozen_at_proxy,
    model_from_dict,
    model_to_dict,
)
from .montecarlo import McConfig, McEstimate, mc_price, simulate_terminal

__version__ = "0.1.0"

__all__ = [
    "CALL",
    "DIGITAL",
    "LOG_AA",
    "NORMAL",
    "PUT",
    "CalibConfig",
    "CalibrationResult",
    "CevLocalVol",
    "DealTerms",
    "Diagnostics",
    "ExpansionState",
    "ExplicitLocalVol",
    "JumpParams",
    "MarketEnv",
    "McConfig",
    "McEstimate",
    "ModelSpec",
    "Payoff",
    "PiecewiseCurve",
    "PriceBreakdown",
    "ProxyLaw",
    "Quote",
    "VolSurface",
    "approx_price",
    "bootstrap_calibrate",
    "coefficients_aa",
    "coefficients_direct",
    "coefficients_quadrature",
    "coefficients_recursive",
    "diagnostics",
    "eval_drift_at_proxy",
    "eval_vol_at_proxy",
    "fit_bucket",
    "frozen_at_proxy",
    "gaussian_payoff_derivative",
    "implied_vol",
    "levenberg_marquardt",
    "mc_price",
    "merton_greek",
    "merton_price",
    "model_from_dict",
    "model_to_dict",
    "simulate_terminal",
]
