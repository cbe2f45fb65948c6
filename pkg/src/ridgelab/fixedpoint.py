"""Effective regularization and effective noise of ridge(less) regression.

For aspect ratio phi = m/n, regularization eta >= 0, noise level sigma_sq
and signal mu0, the pair (tau_star, gamma_star_sq) solves the system

    phi * gamma^2          = sigma_sq + E_err(gamma; tau)
    (phi - eta/tau) * gamma^2 = E_dof(gamma; tau)

which reduces to a scalar root problem for tau,

    f(tau) = T_{-1,1}(tau) + eta / tau = phi,

with f strictly decreasing on (0, inf), followed by a closed form for
gamma^2. A solution exists for eta > 0 with any shapes, and for eta = 0
only in the overparametrized regime phi < 1. The noiseless case
sigma_sq = 0 runs through the same code path and is well posed under the
same regime condition.

All derivative quantities (tau', tau'', Stieltjes values) are closed
forms, never finite differences; finite differences appear only as test
oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateDenominator,
    InputError,
    NonConvergence,
    NoSolution,
)
from .spectrum import (
    CovarianceModel,
    SignalVector,
    eigenvalues,
    harmonic_mean,
    quad_form,
    trace_functional,
)

_MAX_BISECT = 500
_MAX_NEWTON = 50


@dataclass(frozen=True)
class ProblemConfig:
    """One theory-side problem instance.

    phi is the aspect ratio m/n. eta = 0 is meaningful only when phi < 1;
    that regime check is enforced where the solve happens (tau_bounds), so
    diagnostics can still inspect the config itself.
    """

    phi: float
    eta: float
    sigma_sq: float
    model: CovarianceModel
    mu0: SignalVector

    def __post_init__(self):
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise InputError(f"phi must be a positive finite real, got {self.phi}")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise InputError(f"eta must be a nonnegative finite real, got {self.eta}")
        if not (np.isfinite(self.sigma_sq) and self.sigma_sq >= 0):
            raise InputError(
                f"sigma_sq must be a nonnegative finite real, got {self.sigma_sq}"
            )
        if self.mu0.n != self.model.n:
            raise InputError(
                f"signal dimension {self.mu0.n} != model dimension {self.model.n}"
            )

    def with_eta(self, eta: float) -> "ProblemConfig":
        return replace(self, eta=float(eta))


@dataclass(frozen=True)
class EffectiveParams:
    """Solved effective quantities at one regularization level.

    m_val, m_prime, m_second are the companion Stieltjes transform and its
    first two derivatives at z = -eta/phi; m_val * tau_star = 1.
    """

    eta: float
    tau_star: float
    gamma_star_sq: float
    tau_prime: float
    tau_second: float
    gamma_tilde_sq: float
    m_val: float
    m_prime: float
    m_second: float


def expected_err(model: CovarianceModel, mu0, gamma_sq: float, tau: float) -> float:
    """Mean squared prediction error of the sequence-model ridge estimator.

    tau^2 ||(Sigma+tau I)^{-1} Sigma^{1/2} mu0||^2 + gamma^2 T_{-2,2}(tau).
    """
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    bias = tau * tau * quad_form(model, mu0, tau, 1, 1)
    return bias + gamma_sq * trace_functional(model, tau, 2, 2)


def expected_dof(model: CovarianceModel, gamma_sq: float, tau: float) -> float:
    """gamma^2 T_{-1,1}(tau), the effective degrees-of-freedom functional."""
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    return gamma_sq * trace_functional(model, tau, 1, 1)


def tau_bounds(config: ProblemConfig) -> tuple[float, float]:
    """A-priori bracket [lo, hi] containing tau_star.

    lo = (1 - phi + sqrt((1-phi)^2 + 4 H eta)) / (2 H) with H the reciprocal
    harmonic mean; hi minimizes (sum_{j>k} lambda_j + n eta) / (m - k) over
    admissible k. The sample count m = phi * n may be non-integral, in which
    case k ranges over integers with m - k > 0.
    """
    if config.eta == 0 and config.phi >= 1:
        raise NoSolution(
            "eta = 0 requires phi < 1: the interpolating solution exists "
            "only in the overparametrized regime m < n"
        )
    h = harmonic_mean(config.model)
    one_minus = 1.0 - config.phi
    lo = (one_minus + math.sqrt(one_minus * one_minus + 4.0 * h * config.eta)) / (2.0 * h)

    n = config.model.n
    m = config.phi * n
    lam = eigenvalues(config.model)
    k_max = min(int(np.ceil(m)) - 1, n)
    k = np.arange(0, k_max + 1)
    tail = float(lam.sum()) - np.concatenate(([0.0], np.cumsum(lam)))[k]
    denom = m - k
    valid = denom > 0
    hi = float(np.min((tail[valid] + n * config.eta) / denom[valid]))
    return lo, hi


def _f_and_slope(config: ProblemConfig, tau: float) -> tuple[float, float]:
    t11 = trace_functional(config.model, tau, 1, 1)
    t21 = trace_functional(config.model, tau, 2, 1)
    f = t11 + config.eta / tau - config.phi
    slope = -t21 - config.eta / (tau * tau)
    return f, slope


def solve_tau(config: ProblemConfig, tol: float = 1e-12) -> float:
    """Root of f(tau) = T_{-1,1}(tau) + eta/tau - phi.

    Bracketed bisection starting from tau_bounds, refined by safeguarded
    Newton steps (the slope is -T_{-2,1} - eta/tau^2); any Newton iterate
    leaving the bracket falls back to bisection. Monotonicity of f makes
    this globally convergent.
    """
    lo, hi = tau_bounds(config)
    a, b = lo, hi
    fa, _ = _f_and_slope(config, a)
    fb, _ = _f_and_slope(config, b)
    # the bracket comes from exact inequalities; widen a touch if rounding
    # pushed an endpoint across the root
    widen = 0
    while fa < 0 and widen < 60:
        a *= 0.5
        fa, _ = _f_and_slope(config, a)
        widen += 1
    while fb > 0 and widen < 120:
        b *= 2.0
        fb, _ = _f_and_slope(config, b)
        widen += 1
    if fa < 0 or fb > 0:
        raise NonConvergence("could not bracket the fixed-point root")

    f_tol = tol * max(1.0, config.phi)
    x = 0.5 * (a + b)
    bisections = 0
    newtons = 0
    while True:
        fx, slope = _f_and_slope(config, x)
        if abs(fx) <= f_tol:
            return x
        if fx >= 0:
            a = x
        else:
            b = x
        if b - a <= 1e-15 * max(1.0, b):
            # bracket collapsed to adjacent doubles; x is as good as it gets
            return x
        took_newton = False
        if slope < 0 and newtons < _MAX_NEWTON:
            x_n = x - fx / slope
            if a < x_n < b:
                x = x_n
                newtons += 1
                took_newton = True
        if not took_newton:
            if bisections >= _MAX_BISECT:
                raise NonConvergence(
                    f"fixed-point solver exhausted {_MAX_BISECT} bisections"
                )
            x = 0.5 * (a + b)
            bisections += 1


def solve_gamma_sq(config: ProblemConfig, tau_star: float) -> float:
    """Closed form for gamma_star^2 given the solved tau_star.

    gamma^2 = (sigma_sq + tau^2 ||(Sigma+tau I)^{-1} Sigma^{1/2} mu0||^2)
              / (eta/tau + tau T_{-2,1}(tau));
    the denominator equals phi - T_{-2,2}(tau) at the root but does not
    suffer its cancellation.
    """
    num = config.sigma_sq + tau_star * tau_star * quad_form(
        config.model, config.mu0, tau_star, 1, 1
    )
    den = config.eta / tau_star + tau_star * trace_functional(
        config.model, tau_star, 2, 1
    )
    if den <= 1e-14:
        raise DegenerateDenominator(
            f"gamma^2 denominator {den} is not positive; inconsistent inputs"
        )
    return num / den


def tau_derivatives(config: ProblemConfig, tau_star: float) -> tuple[float, float]:
    """(d tau/d eta, d^2 tau/d eta^2) from closed forms.

    tau' = tau / G0 with G0 = eta + tau^2 T_{-2,1}(tau);
    tau'' = -2 tau^2 tau' T_{-3,2}(tau) / G0^2.
    """
    t21 = trace_functional(config.model, tau_star, 2, 1)
    t32 = trace_functional(config.model, tau_star, 3, 2)
    g0 = config.eta + tau_star * tau_star * t21
    tau_prime = tau_star / g0
    tau_second = -2.0 * tau_star * tau_star * tau_prime * t32 / (g0 * g0)
    return tau_prime, tau_second


def gamma_tilde_sq(
    sigma_sq: float, mu_norm_sq: float, eta: float, tau_star: float, tau_prime: float
) -> float:
    """sigma_sq * tau' + ||mu0||^2 (tau - eta tau').

    Equals gamma_star^2 exactly for isotropic covariances; elsewhere it is
    the signal-averaged surrogate entering the l_q risk weights.
    """
    return sigma_sq * tau_prime + mu_norm_sq * (tau_star - eta * tau_prime)


def stieltjes_at(
    phi: float, tau_star: float, tau_prime: float, tau_second: float
) -> tuple[float, float, float]:
    """Companion Stieltjes transform and derivatives at z = -eta/phi.

    m = 1/tau, m' = phi tau'/tau^2, m'' = -phi^2 (tau'' tau - 2 tau'^2)/tau^3.
    """
    if tau_star <= 0:
        raise InputError(f"tau_star must be positive, got {tau_star}")
    m_val = 1.0 / tau_star
    m_prime = phi * tau_prime / (tau_star * tau_star)
    m_second = (
        -phi
        * phi
        * (tau_second * tau_star - 2.0 * tau_prime * tau_prime)
        / tau_star**3
    )
    return m_val, m_prime, m_second


def solve_effective(config: ProblemConfig, tol: float = 1e-12) -> EffectiveParams:
    """Solve the full fixed-point system and derived scalars at one eta."""
    tau = solve_tau(config, tol)
    gamma_sq = solve_gamma_sq(config, tau)
    tau_p, tau_s = tau_derivatives(config, tau)
    gt_sq = gamma_tilde_sq(config.sigma_sq, config.mu0.norm_sq, config.eta, tau, tau_p)
    m_val, m_prime, m_second = stieltjes_at(config.phi, tau, tau_p, tau_s)

    scale = max(1.0, config.phi * gamma_sq)
    res1 = config.phi * gamma_sq - config.sigma_sq - expected_err(
        config.model, config.mu0, gamma_sq, tau
    )
    res2 = (config.phi - config.eta / tau) * gamma_sq - expected_dof(
        config.model, gamma_sq, tau
    )
    if abs(res1) > 1e-10 * scale or abs(res2) > 1e-10 * scale:
        raise NonConvergence(
            f"fixed-point residuals ({res1:.3e}, {res2:.3e}) exceed 1e-10 relative"
        )
    return EffectiveParams(
        eta=config.eta,
        tau_star=tau,
        gamma_star_sq=gamma_sq,
        tau_prime=tau_p,
        tau_second=tau_s,
        gamma_tilde_sq=gt_sq,
        m_val=m_val,
        m_prime=m_prime,
        m_second=m_second,
    )


def solve_grid(config: ProblemConfig, etas, tol: float = 1e-12) -> list[EffectiveParams]:
    """solve_effective across an eta grid, reusing one config."""
    return [solve_effective(config.with_eta(e), tol) for e in np.asarray(etas, float)]
