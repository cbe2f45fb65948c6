"""Risk functionals of ridge(less) regression in the proportional regime.

Four risks are tracked: out-of-sample prediction, parameter estimation,
in-sample prediction, and the residual norm. Each has a deterministic
"theoretical" form in terms of the effective pair (tau, gamma) and a
random-matrix form in terms of the companion Stieltjes transform. The two
coincide exactly for isotropic covariances and agree to o(1) generally.

Conventions used throughout:
  * signal strength is carried as the pair (sigma_sq, mu_norm_sq), never
    as their ratio, so the noiseless case is exact;
  * eta is read from the solved EffectiveParams rather than passed twice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .fixedpoint import EffectiveParams, ProblemConfig, solve_effective
from .spectrum import (
    CovarianceModel,
    SignalVector,
    eigenvalues,
    quad_form,
    trace_functional,
)

_DENSE_A_GUARD = 5000


class RiskKind(str, enum.Enum):
    PRED = "pred"
    EST = "est"
    INS = "ins"
    RES = "res"


@dataclass(frozen=True)
class RiskCurve:
    """Risk values along an ascending eta grid.

    derivative is None for the residual kind, which has no derivative
    factor representation.
    """

    etas: np.ndarray
    kind: RiskKind
    theoretical: np.ndarray
    rmt: np.ndarray
    derivative: np.ndarray | None

    def __post_init__(self):
        if np.any(np.diff(self.etas) <= 0):
            raise InputError("eta grid must be strictly ascending")
        cols = [self.theoretical, self.rmt]
        if self.derivative is not None:
            cols.append(self.derivative)
        for col in cols:
            if col.shape != self.etas.shape:
                raise InputError("risk curve columns must share the grid length")
            if not np.all(np.isfinite(col)):
                raise InputError("risk curve values must be finite")


def theoretical_risk(
    kind: RiskKind,
    params: EffectiveParams,
    model: CovarianceModel,
    mu0: SignalVector,
    sigma_sq: float,
    phi: float,
) -> float:
    tau = params.tau_star
    gamma_sq = params.gamma_star_sq
    eta = params.eta
    if kind == RiskKind.PRED:
        bias = tau * tau * quad_form(model, mu0, tau, 1, 1)
        return bias + gamma_sq * trace_functional(model, tau, 2, 2)
    if kind == RiskKind.EST:
        bias = tau * tau * quad_form(model, mu0, tau, 1, 0)
        return bias + gamma_sq * trace_functional(model, tau, 2, 1)
    res = eta * eta * gamma_sq / (tau * tau)
    if kind == RiskKind.RES:
        return res
    if kind == RiskKind.INS:
        return res + sigma_sq * (phi - 2.0 * eta / tau)
    raise InputError(f"unknown risk kind {kind!r}")


def rmt_risk(
    kind: RiskKind,
    params: EffectiveParams,
    sigma_sq: float,
    mu_norm_sq: float,
    phi: float,
) -> float:
    """Stieltjes-transform representation of the asymptotic risk.

    All four kinds share the combination
        core = phi ||mu0||^2 m - (eta ||mu0||^2 - sigma_sq) m',
    which equals phi gamma^2 m^2 at the fixed point.
    """
    m_val, m_prime = params.m_val, params.m_prime
    eta = params.eta
    s0 = mu_norm_sq
    core = phi * s0 * m_val - (eta * s0 - sigma_sq) * m_prime
    if kind == RiskKind.PRED:
        return core / (m_val * m_val) - sigma_sq
    if kind == RiskKind.EST:
        return s0 * (1.0 - phi) + sigma_sq * m_val + (eta / phi) * (
            eta * s0 - sigma_sq
        ) * m_prime
    if kind == RiskKind.RES:
        return eta * eta * core / phi
    if kind == RiskKind.INS:
        return eta * eta * core / phi + sigma_sq * (phi - 2.0 * eta * m_val)
    raise InputError(f"unknown risk kind {kind!r}")


def derivative_factor(
    kind: RiskKind, params: EffectiveParams, model: CovarianceModel
) -> float:
    """Positive factor M^#(eta) multiplying (eta ||mu0||^2 - sigma_sq).

    The aspect ratio is recovered from the stored Stieltjes derivative,
    phi = m' tau^2 / tau', exact up to rounding. The residual kind has no
    such factor and is rejected.
    """
    tau = params.tau_star
    tau_p = params.tau_prime
    if kind == RiskKind.PRED:
        phi = params.m_prime * tau * tau / tau_p
        return phi * (-params.tau_second)
    if kind == RiskKind.EST:
        t31 = trace_functional(model, tau, 3, 1)
        t21 = trace_functional(model, tau, 2, 1)
        t32 = trace_functional(model, tau, 3, 2)
        return 2.0 * tau_p * tau_p * (t31 + tau_p * t21 * t32)
    if kind == RiskKind.INS:
        t21 = trace_functional(model, tau, 2, 1)
        t32 = trace_functional(model, tau, 3, 2)
        eta = params.eta
        return (2.0 * tau_p * tau_p / (tau * tau)) * (
            eta * eta * tau_p * t32 + tau**3 * t21 * t21
        )
    raise InputError(f"no derivative factor for risk kind {kind!r}")


def risk_derivative(
    kind: RiskKind,
    params: EffectiveParams,
    model: CovarianceModel,
    sigma_sq: float,
    mu_norm_sq: float,
) -> float:
    """d/d eta of the RMT risk: (eta ||mu0||^2 - sigma_sq) M^#(eta).

    Vanishes exactly at eta = sigma_sq/||mu0||^2 and carries that sign, so
    the three tunable risks share one minimizer.
    """
    factor = derivative_factor(kind, params, model)
    return (params.eta * mu_norm_sq - sigma_sq) * factor


def optimal_eta(sigma_sq: float, mu_norm_sq: float) -> float:
    """The common risk minimizer sigma_sq / ||mu0||^2.

    Zero when sigma_sq = 0 (interpolation is optimal), infinite when the
    signal vanishes but noise does not.
    """
    if sigma_sq < 0 or mu_norm_sq < 0:
        raise InputError("sigma_sq and mu_norm_sq must be nonnegative")
    if sigma_sq == 0 and mu_norm_sq == 0:
        from .errors import BothZero

        raise BothZero("optimal eta is undefined when both sigma_sq and mu0 vanish")
    if sigma_sq == 0:
        return 0.0
    if mu_norm_sq == 0:
        return math.inf
    return sigma_sq / mu_norm_sq


def opt_risks(
    phi: float, eta_star: float, tau_at_eta_star: float
) -> tuple[float, float, float]:
    """Optimally tuned prediction, estimation and in-sample risks.

    OPT^pred = phi tau/eta - 1, OPT^est = (1-phi)/eta + 1/tau,
    OPT^ins = phi - eta/tau, all at eta = eta_star.
    """
    if eta_star <= 0:
        raise InputError("opt_risks requires eta_star > 0")
    pred = phi * tau_at_eta_star / eta_star - 1.0
    est = (1.0 - phi) / eta_star + 1.0 / tau_at_eta_star
    ins = phi - eta_star / tau_at_eta_star
    return pred, est, ins


def gaussian_abs_moment(q: float) -> float:
    """M_q = sqrt(2) {Gamma((q+1)/2)/sqrt(pi)}^{1/q} for a standard normal.

    Evaluated in log space so large q does not overflow.
    """
    if q <= 0:
        raise InputError(f"q must be positive, got {q}")
    return math.exp(
        0.5 * math.log(2.0) + (math.lgamma((q + 1.0) / 2.0) - 0.5 * math.log(math.pi)) / q
    )


def _check_psd_dense(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"dense weight must be square, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if not np.allclose(a, a.T, atol=1e-10 * scale):
        raise InputError("dense weight matrix must be symmetric")
    w = np.linalg.eigvalsh(a)
    if w[0] < -1e-10 * max(1.0, w[-1]):
        raise InputError(f"weight matrix is not positive semidefinite (min eig {w[0]})")


def lq_gamma_diag(
    a, model: CovarianceModel, params: EffectiveParams, mu_norm: float
) -> np.ndarray:
    """Diagonal, in ambient coordinates, of the l_q second-moment matrix

        Gamma = A (Sigma+tau I)^{-1} (gamma~^2 Sigma + tau^2 ||mu0||^2 I)
                  (Sigma+tau I)^{-1} A.

    Weight specs: None for A = I; a 1-D array of nonnegative weights applied
    in the covariance eigenbasis (descending eigenvalue order); a 2-D dense
    p.s.d. matrix, guarded to n <= 5000.
    """
    tau = params.tau_star
    gt_sq = params.gamma_tilde_sq
    s0 = mu_norm * mu_norm

    def middle(lam):
        return (gt_sq * lam + tau * tau * s0) / (lam + tau) ** 2

    if a is None:
        return model.diag_fn(middle)
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        if a.shape[0] != model.n:
            raise InputError(f"weight length {a.shape[0]} != dimension {model.n}")
        if np.any(a < 0):
            raise InputError("eigenbasis weights must be nonnegative")
        return model.eigen_diag(a * a * middle(eigenvalues(model)))
    if model.n > _DENSE_A_GUARD:
        raise InputError(
            f"dense weight path limited to n <= {_DENSE_A_GUARD}, got {model.n}"
        )
    _check_psd_dense(a)
    if a.shape[0] != model.n:
        raise InputError(f"weight dimension {a.shape[0]} != model dimension {model.n}")
    ma = model.apply(middle, a)
    return np.einsum("kj,kj->j", a, ma)


def lq_risk(q: float, diag_gamma: np.ndarray, n: int) -> float:
    """n^{-1/2} (sum_j Gamma_jj^{q/2})^{1/q} M_q."""
    if q <= 0:
        raise InputError(f"q must be positive, got {q}")
    diag_gamma = np.asarray(diag_gamma, dtype=float)
    if np.any(diag_gamma < 0):
        raise InputError("diag(Gamma) entries must be nonnegative")
    total = float(np.sum(diag_gamma ** (q / 2.0)))
    return total ** (1.0 / q) * gaussian_abs_moment(q) / math.sqrt(n)


def risk_curve(
    config: ProblemConfig, kind: RiskKind, etas, tol: float = 1e-12
) -> RiskCurve:
    """Solve the fixed point along a grid and evaluate one risk kind."""
    etas = np.asarray(etas, dtype=float)
    theo = np.empty_like(etas)
    rmt = np.empty_like(etas)
    deriv = None if kind == RiskKind.RES else np.empty_like(etas)
    s0 = config.mu0.norm_sq
    for i, eta in enumerate(etas):
        params = solve_effective(config.with_eta(float(eta)), tol)
        theo[i] = theoretical_risk(
            kind, params, config.model, config.mu0, config.sigma_sq, config.phi
        )
        rmt[i] = rmt_risk(kind, params, config.sigma_sq, s0, config.phi)
        if deriv is not None:
            deriv[i] = risk_derivative(kind, params, config.model, config.sigma_sq, s0)
    return RiskCurve(etas=etas, kind=kind, theoretical=theo, rmt=rmt, derivative=deriv)
