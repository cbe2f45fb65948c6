"""Exact risk theory for ridge and ridgeless regression.

The package is organized around one object, the effective-parameter
pair (tau, gamma) solving the finite-dimensional fixed point, and the
closed-form risk and confidence machinery built on top of it:

- ``spectrum``: covariance models, trace functionals, signal vectors.
- ``fixedpoint``: the fixed-point solver and its derivatives.
- ``riskengine``: risk formulae, dual random-matrix forms, lq risks,
  optimal tuning.
- ``regress``: data-level fits, estimators of the effective
  parameters, cross-validation, debiased confidence intervals.
- ``simlab``: reproducible Monte Carlo experiments validating the
  theory.
- ``cli``: the ``ridgelab`` command-line entry point.
"""

from ._version import __version__
from .errors import (
    BothZero,
    DegenerateDenominator,
    IllConditioned,
    InputError,
    MissingGroundTruth,
    NonConvergence,
    NoSolution,
    NumericalError,
    RidgelabError,
    UsageError,
    WrongRegime,
)
from .fixedpoint import (
    EffectiveParams,
    ProblemConfig,
    expected_dof,
    expected_err,
    gamma_tilde_sq,
    solve_effective,
    solve_gamma_sq,
    solve_grid,
    solve_tau,
    stieltjes_at,
    tau_bounds,
    tau_derivatives,
)
from .regress import (
    CIReport,
    Dataset,
    GramSweep,
    RidgeFit,
    TuningResult,
    confidence_intervals,
    coverage,
    debias,
    df_hat,
    empirical_risk,
    gamma_hat,
    gcv_select,
    kfold_folds,
    kfold_objective,
    kfold_select,
    ridge_fit,
    ridgeless_fit,
    sigma_hat_sq,
    tau_hat,
)
from .riskengine import (
    RiskCurve,
    RiskKind,
    derivative_factor,
    gaussian_abs_moment,
    lq_gamma_diag,
    lq_risk,
    opt_risks,
    optimal_eta,
    risk_curve,
    risk_derivative,
    rmt_risk,
    theoretical_risk,
)
from .rng import ROLES, stream
from .simlab import (
    ArgminResult,
    DistCheckResult,
    ExperimentConfig,
    MCSummary,
    build_model,
    distributional_check,
    residual_law_sample,
    run_argmin_experiment,
    run_risk_experiment,
    run_tuning_experiment,
    sample_design,
    sample_noise,
    sample_signal,
    seq_model_lq_mc,
    seq_model_sample,
)
from .spectrum import (
    CovarianceModel,
    Explicit,
    Isotropic,
    SignalVector,
    SpikedUniform,
    eigenvalues,
    harmonic_mean,
    materialize,
    model_from_json,
    quad_form,
    sigma_quad,
    spiked_uniform,
    trace_functional,
)

__all__ = [
    "__version__",
    "ArgminResult",
    "BothZero",
    "CIReport",
    "CovarianceModel",
    "Dataset",
    "DegenerateDenominator",
    "DistCheckResult",
    "EffectiveParams",
    "ExperimentConfig",
    "Explicit",
    "GramSweep",
    "IllConditioned",
    "InputError",
    "Isotropic",
    "MCSummary",
    "MissingGroundTruth",
    "NoSolution",
    "NonConvergence",
    "NumericalError",
    "ProblemConfig",
    "ROLES",
    "RidgeFit",
    "RidgelabError",
    "RiskCurve",
    "RiskKind",
    "SignalVector",
    "SpikedUniform",
    "TuningResult",
    "UsageError",
    "WrongRegime",
    "build_model",
    "confidence_intervals",
    "coverage",
    "debias",
    "derivative_factor",
    "df_hat",
    "distributional_check",
    "eigenvalues",
    "empirical_risk",
    "expected_dof",
    "expected_err",
    "gamma_hat",
    "gamma_tilde_sq",
    "gaussian_abs_moment",
    "gcv_select",
    "harmonic_mean",
    "kfold_folds",
    "kfold_objective",
    "kfold_select",
    "lq_gamma_diag",
    "lq_risk",
    "materialize",
    "model_from_json",
    "opt_risks",
    "optimal_eta",
    "quad_form",
    "residual_law_sample",
    "ridge_fit",
    "ridgeless_fit",
    "risk_curve",
    "risk_derivative",
    "rmt_risk",
    "run_argmin_experiment",
    "run_risk_experiment",
    "run_tuning_experiment",
    "sample_design",
    "sample_noise",
    "sample_signal",
    "seq_model_lq_mc",
    "seq_model_sample",
    "sigma_hat_sq",
    "sigma_quad",
    "solve_effective",
    "solve_gamma_sq",
    "solve_grid",
    "solve_tau",
    "spiked_uniform",
    "stieltjes_at",
    "stream",
    "tau_bounds",
    "tau_derivatives",
    "tau_hat",
    "theoretical_risk",
    "trace_functional",
]
