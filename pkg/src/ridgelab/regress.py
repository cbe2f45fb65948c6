"""Data-level ridge(less) regression.

Fits, empirical risks, the (tau, gamma, sigma^2) estimators, GCV and
k-fold cross-validation tuning, debiasing and coordinatewise confidence
intervals.

Normalization conventions, fixed once here:
  * the ridge loss is ||Y - X mu||^2 / (2n) + eta ||mu||^2 / 2 where n is
    the signal dimension (column count), so the normal equations read
    (X^T X / n + eta I) mu = X^T Y / n;
  * cross-validation fold fits keep the same divisor n even though the
    fold design has fewer rows;
  * r_hat = (Y - X mu_hat) / sqrt(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    IllConditioned,
    InputError,
    MissingGroundTruth,
    WrongRegime,
)
from .riskengine import RiskKind
from .spectrum import CovarianceModel, SignalVector, sigma_quad
from .stats import z_two_sided

_RIDGE_COND_LIMIT = 1e14
_GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Dataset:
    """A regression sample Y = X mu0 + xi with optional ground truth."""

    x: np.ndarray
    y: np.ndarray
    model: CovarianceModel
    mu0: SignalVector | None = None
    xi: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise InputError(f"design must be a matrix, got ndim {x.ndim}")
        if y.shape != (x.shape[0],):
            raise InputError(f"response shape {y.shape} != ({x.shape[0]},)")
        if x.shape[1] != self.model.n:
            raise InputError(
                f"design has {x.shape[1]} columns, model dimension is {self.model.n}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.mu0 is not None and self.mu0.n != x.shape[1]:
            raise InputError("ground-truth signal has wrong dimension")
        if self.xi is not None:
            xi = np.asarray(self.xi, dtype=float)
            if xi.shape != y.shape:
                raise InputError("noise vector has wrong shape")
            object.__setattr__(self, "xi", xi)
        if self.mu0 is not None and self.xi is not None:
            recon = x @ self.mu0.coords + self.xi
            scale = max(1.0, float(np.abs(y).max(initial=0.0)))
            if float(np.abs(y - recon).max(initial=0.0)) > 1e-10 * scale:
                raise InputError("Y != X mu0 + xi beyond tolerance")

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def phi(self) -> float:
        return self.x.shape[0] / self.x.shape[1]


@dataclass(frozen=True)
class RidgeFit:
    eta: float
    mu_hat: np.ndarray
    r_hat: np.ndarray


@dataclass(frozen=True)
class TuningResult:
    """Grid search outcome; eta_hat is the smallest minimizer."""

    etas: np.ndarray
    objective: np.ndarray
    eta_hat: float
    method: str


@dataclass(frozen=True)
class CIReport:
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    gamma_hat: float
    coverage: float | None = None

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower


def ridge_fit(data: Dataset, eta: float) -> RidgeFit:
    """Ridge solution via an SPD solve on the smaller Gram matrix."""
    if eta <= 0:
        raise InputError(f"ridge_fit requires eta > 0, got {eta}")
    x, y, n = data.x, data.y, data.n
    m = data.m
    try:
        if m <= n:
            gram = x @ x.T / n
            gram[np.diag_indices_from(gram)] += eta
            mu = x.T @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), y) / n
        else:
            gram = x.T @ x / n
            gram[np.diag_indices_from(gram)] += eta
            mu = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), x.T @ y / n)
    except scipy.linalg.LinAlgError as exc:
        raise IllConditioned(f"ridge Gram factorization failed: {exc}") from exc
    resid = y - x @ mu
    kkt = x.T @ resid / n - eta * mu
    if float(np.linalg.norm(kkt)) > 1e-8 * (1.0 + float(np.linalg.norm(mu))):
        raise IllConditioned(
            f"ridge solve inaccurate (condition likely above {_RIDGE_COND_LIMIT:.0e})"
        )
    return RidgeFit(eta=float(eta), mu_hat=mu, r_hat=resid / np.sqrt(n))


def ridgeless_fit(data: Dataset) -> RidgeFit:
    """Minimum-norm interpolator X^T (X X^T)^{-1} Y; needs m < n."""
    x, y = data.x, data.y
    m, n = data.m, data.n
    if m >= n:
        raise WrongRegime(f"ridgeless fit requires m < n, got m={m}, n={n}")
    gram = x @ x.T
    s, q = np.linalg.eigh(gram)
    if s[0] <= 0 or s[-1] / s[0] > _GRAM_COND_LIMIT:
        raise IllConditioned(
            f"X X^T condition {s[-1] / max(s[0], 0.0):.3e} exceeds {_GRAM_COND_LIMIT:.0e}"
        )
    mu = x.T @ (q @ (q.T @ y / s))
    resid_norm = float(np.linalg.norm(y - x @ mu))
    if resid_norm > 1e-8 * float(np.linalg.norm(y)):
        raise IllConditioned("interpolation residual beyond tolerance")
    return RidgeFit(eta=0.0, mu_hat=mu, r_hat=(y - x @ mu) / np.sqrt(n))


def empirical_risk(kind: RiskKind, fit: RidgeFit, data: Dataset) -> float:
    if kind == RiskKind.RES:
        return float(fit.r_hat @ fit.r_hat)
    if data.mu0 is None:
        raise MissingGroundTruth(f"risk kind {kind.value!r} needs mu0")
    diff = fit.mu_hat - data.mu0.coords
    if kind == RiskKind.EST:
        return float(diff @ diff)
    if kind == RiskKind.PRED:
        return sigma_quad(data.model, diff)
    if kind == RiskKind.INS:
        xd = data.x @ diff
        return float(xd @ xd) / data.n
    raise InputError(f"unknown risk kind {kind!r}")


def _gram_eigs_over_m(data: Dataset) -> np.ndarray:
    """Eigenvalues of X^T X / m, zeros dropped when m < n (they add nothing)."""
    x = data.x
    if data.m <= data.n:
        s = np.linalg.eigvalsh(x @ x.T)
    else:
        s = np.linalg.eigvalsh(x.T @ x)
    return np.clip(s, 0.0, None) / data.m


def df_hat(data: Dataset, eta: float) -> float:
    """tr((Sigma_hat + (eta/phi) I)^{-1} Sigma_hat) with Sigma_hat = X^T X / m."""
    if eta < 0:
        raise InputError(f"eta must be nonnegative, got {eta}")
    s = _gram_eigs_over_m(data)
    if eta == 0:
        if data.m >= data.n:
            raise WrongRegime("df at eta = 0 requires m < n")
        tol = s.max(initial=0.0) * max(data.m, data.n) * np.finfo(float).eps
        return float(np.count_nonzero(s > tol))
    z = eta / data.phi
    return float(np.sum(s / (s + z)))


def tau_hat(data: Dataset, eta: float) -> float:
    """Reciprocal of tr((X X^T + eta n I_m)^{-1})."""
    if eta < 0:
        raise InputError(f"eta must be nonnegative, got {eta}")
    g = _gram_eigs_over_m(data) * data.m
    if data.m > data.n:
        g = np.concatenate([g, np.zeros(data.m - data.n)])
    shifted = g + eta * data.n
    if shifted.min(initial=np.inf) <= g.max(initial=1.0) * data.m * np.finfo(float).eps:
        raise IllConditioned("X X^T singular at eta = 0")
    return float(1.0 / np.sum(1.0 / shifted))


def gamma_hat(data: Dataset, fit: RidgeFit, eta: float) -> float:
    """Effective-noise estimator.

    Overparametrized branch (n >= m): (tau_hat/sqrt(n)) ||(X X^T/n)^{-1} X mu_hat||,
    valid down to eta = 0. Underparametrized branch: (tau_hat/sqrt(n)) ||Y - X mu_hat||/eta.
    """
    x, n = data.x, data.n
    if data.m > n and eta <= 0:
        raise InputError("underparametrized gamma estimator requires eta > 0")
    t = tau_hat(data, eta)
    if data.m <= n:
        gram = x @ x.T / n
        s, q = np.linalg.eigh(gram)
        if s[0] <= 0 or s[-1] / s[0] > _GRAM_COND_LIMIT:
            raise IllConditioned("X X^T too ill-conditioned for the gamma estimator")
        v = q @ (q.T @ (x @ fit.mu_hat) / s)
        return t / np.sqrt(n) * float(np.linalg.norm(v))
    resid = data.y - x @ fit.mu_hat
    return t / np.sqrt(n) * float(np.linalg.norm(resid)) / eta


def sigma_hat_sq(
    gamma_val: float,
    tau_val: float,
    eta: float,
    phi: float,
    mu_hat: np.ndarray,
    model: CovarianceModel,
) -> tuple[float, float]:
    """(raw, clamped) noise-level estimate.

    raw = gamma^2 (1 - phi + 2 eta / tau) - tau^2 ||Sigma^{-1/2} mu_hat||^2;
    finite-sample fluctuations can push raw below zero, hence the clamp.
    """
    whitened = float(mu_hat @ model.apply(lambda lam: 1.0 / lam, mu_hat))
    raw = gamma_val * gamma_val * (1.0 - phi + 2.0 * eta / tau_val) - (
        tau_val * tau_val * whitened
    )
    return raw, max(raw, 0.0)


class GramSweep:
    """Shared eigendecomposition for ridge paths over many eta values.

    Dual route (m <= n): X X^T / n = Q S Q^T, fits and residuals come from
    rescaling Q^T Y. Primal route (m > n): X^T X / n = V W V^T. Both reuse
    one O(min(m,n)^3) factorization across the whole grid.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = x
        self.y = y
        self.m, self.n = x.shape
        self.dual = self.m <= self.n
        if self.dual:
            s, q = np.linalg.eigh(x @ x.T / self.n)
            self.s = np.clip(s, 0.0, None)
            self.q = q
            self.c = q.T @ y
        else:
            w, v = np.linalg.eigh(x.T @ x / self.n)
            self.s = np.clip(w, 0.0, None)
            self.v = v
            self.b = v.T @ (x.T @ y) / self.n

    def mu_hat(self, eta: float) -> np.ndarray:
        if self.dual:
            return self.x.T @ (self.q @ (self.c / (self.s + eta))) / self.n
        return self.v @ (self.b / (self.s + eta))

    def resid(self, eta: float) -> np.ndarray:
        if self.dual:
            return self.q @ (self.c * (eta / (self.s + eta)))
        return self.y - self.x @ self.mu_hat(eta)

    def fit(self, eta: float) -> RidgeFit:
        return RidgeFit(
            eta=float(eta),
            mu_hat=self.mu_hat(eta),
            r_hat=self.resid(eta) / np.sqrt(self.n),
        )

    def tau_hat(self, eta: float) -> float:
        inv_sum = float(np.sum(1.0 / (self.s + eta)))
        if not self.dual:
            if eta <= 0:
                raise InputError("tau estimator needs eta > 0 when m > n")
            inv_sum += (self.m - self.n) / eta
        return self.n / inv_sum

    def gamma_hat(self, eta: float) -> float:
        # both branches reduce to ||Q^T Y / (S + eta)|| in the dual route,
        # and to tau ||resid|| / (eta sqrt(n)) in the primal one
        t = self.tau_hat(eta)
        if self.dual:
            return t / np.sqrt(self.n) * float(np.linalg.norm(self.c / (self.s + eta)))
        if eta <= 0:
            raise InputError("underparametrized gamma estimator requires eta > 0")
        return t / np.sqrt(self.n) * float(np.linalg.norm(self.resid(eta))) / eta


def gcv_select(data: Dataset, grid) -> TuningResult:
    """Pick eta minimizing the estimated effective noise gamma_hat(eta)."""
    etas = _check_grid(grid)
    sweep = GramSweep(data.x, data.y)
    objective = np.array([sweep.gamma_hat(float(e)) for e in etas])
    idx = int(np.argmin(objective))
    return TuningResult(
        etas=etas, objective=objective, eta_hat=float(etas[idx]), method="gcv"
    )


def kfold_folds(m: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Seeded shuffle, then contiguous blocks; remainder goes to the first folds."""
    if not 2 <= k <= m:
        raise InputError(f"k must satisfy 2 <= k <= m, got k={k}, m={m}")
    perm = rng.permutation(m)
    base, extra = divmod(m, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def kfold_objective(data: Dataset, grid, folds: list[np.ndarray]) -> np.ndarray:
    """Mean over folds of the per-row held-out squared error, per grid point."""
    etas = _check_grid(grid)
    total = np.zeros_like(etas)
    mask = np.ones(data.m, dtype=bool)
    for fold in folds:
        mask[:] = True
        mask[fold] = False
        sweep = GramSweep(data.x[mask], data.y[mask])
        x_test, y_test = data.x[fold], data.y[fold]
        for i, eta in enumerate(etas):
            err = y_test - x_test @ sweep.mu_hat(float(eta))
            total[i] += float(err @ err) / len(fold)
    return total / len(folds)


def kfold_select(data: Dataset, grid, k: int, seed) -> TuningResult:
    """k-fold cross-validation; seed may be an int or a Generator."""
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        from .rng import stream

        rng = stream(int(seed), 0, "fold")
    folds = kfold_folds(data.m, k, rng)
    etas = _check_grid(grid)
    objective = kfold_objective(data, etas, folds)
    idx = int(np.argmin(objective))
    return TuningResult(
        etas=etas, objective=objective, eta_hat=float(etas[idx]), method=f"cv{k}"
    )


def _check_grid(grid) -> np.ndarray:
    etas = np.asarray(grid, dtype=float)
    if etas.ndim != 1 or etas.size == 0:
        raise InputError("eta grid must be a nonempty 1-D array")
    if np.any(np.diff(etas) <= 0):
        raise InputError("eta grid must be strictly ascending")
    if etas[0] < 0:
        raise InputError("eta grid must be nonnegative")
    return etas


def debias(mu_hat: np.ndarray, tau: float, model: CovarianceModel) -> np.ndarray:
    """(Sigma + tau I) Sigma^{-1} mu_hat; tau may be tau_star or tau_hat."""
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    return model.apply(lambda lam: (lam + tau) / lam, mu_hat)


def confidence_intervals(
    mu_debiased: np.ndarray,
    gamma_val: float,
    model: CovarianceModel,
    alpha: float,
    mu0: SignalVector | None = None,
) -> CIReport:
    """Coordinatewise intervals mu^dR_j +- gamma (Sigma^{-1})_{jj}^{1/2} z_{alpha/2}/sqrt(n)."""
    if not 0 < alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    if gamma_val < 0:
        raise InputError(f"gamma must be nonnegative, got {gamma_val}")
    n = model.n
    if mu_debiased.shape != (n,):
        raise InputError("debiased estimate has wrong dimension")
    half = (
        gamma_val
        * np.sqrt(model.diag_fn(lambda lam: 1.0 / lam))
        * z_two_sided(alpha)
        / np.sqrt(n)
    )
    report = CIReport(
        lower=mu_debiased - half,
        upper=mu_debiased + half,
        alpha=float(alpha),
        gamma_hat=float(gamma_val),
    )
    if mu0 is not None:
        report = CIReport(
            lower=report.lower,
            upper=report.upper,
            alpha=report.alpha,
            gamma_hat=report.gamma_hat,
            coverage=coverage(report, mu0),
        )
    return report


def coverage(report: CIReport, mu0: SignalVector) -> float:
    """Fraction of coordinates whose truth lands inside its interval."""
    v = mu0.coords
    if v.shape != report.lower.shape:
        raise InputError("signal dimension does not match the intervals")
    inside = (report.lower <= v) & (v <= report.upper)
    return float(np.mean(inside))
