"""Seeded Monte Carlo experiments around the ridge(less) theory.

Designs, noise and signals come from splittable counter-based streams, so
every experiment is bitwise reproducible for a fixed master seed no matter
how many worker threads run the replications. Stream identity is
(master_seed, rep, role, ctx): the role separates draw kinds inside one
replication, ctx separates experiment phases or sweep points. Replications
run as independent tasks and are reduced in rep order.

Replications that fail numerically (an ill-conditioned Gram matrix at
eta = 0, say) are recorded and excluded; an experiment aborts once more
than 1% of its replications fail.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, InputError, NonConvergence, WrongRegime
from .fixedpoint import ProblemConfig, solve_effective
from .regress import (
    Dataset,
    GramSweep,
    confidence_intervals,
    debias,
    kfold_folds,
    kfold_objective,
)
from .riskengine import (
    RiskKind,
    _check_psd_dense,
    optimal_eta,
    rmt_risk,
    theoretical_risk,
)
from .rng import stream
from .spectrum import (
    CovarianceModel,
    SignalVector,
    model_from_json,
    sigma_quad,
)
from .stats import scaled_t10, z_two_sided

_DISTS = ("gaussian", "scaled_t10")
_SIGNAL_MODES = ("sphere", "ball_radial")
_ALL_KINDS = (RiskKind.PRED, RiskKind.EST, RiskKind.INS, RiskKind.RES)
_TUNE_KINDS = (RiskKind.PRED, RiskKind.EST, RiskKind.INS)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Knobs for one simulation study.

    Either n (fixed-shape experiments) or phi_grid (aspect-ratio sweeps at
    fixed m) must be set. model_spec is the covariance description without
    its dimension, which is filled in per sweep point. The eta grid may
    start at 0 only when n > m; sweeps drop the 0 point for shapes where
    the interpolator does not exist.
    """

    m: int
    model_spec: dict
    etas: tuple[float, ...]
    n: int | None = None
    phi_grid: tuple[float, ...] | None = None
    design_dist: str = "scaled_t10"
    noise_dist: str = "scaled_t10"
    sigma_sq: float = 1.0
    signal_mode: str = "sphere"
    signal_radius: float = 1.0
    reps: int = 200
    argmin_reps: int | None = None
    k: int = 5
    alpha: float = 0.05
    master_seed: int = 0
    redraw_signal: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise InputError(f"m must be >= 1, got {self.m}")
        if (self.n is None) == (self.phi_grid is None):
            raise InputError("exactly one of n and phi_grid must be given")
        if self.design_dist not in _DISTS or self.noise_dist not in _DISTS:
            raise InputError(f"distributions must be one of {_DISTS}")
        if self.signal_mode not in _SIGNAL_MODES:
            raise InputError(f"signal mode must be one of {_SIGNAL_MODES}")
        if self.signal_radius <= 0:
            raise InputError("signal radius must be positive")
        if self.sigma_sq < 0:
            raise InputError("sigma_sq must be nonnegative")
        if self.reps < 1:
            raise InputError("reps must be >= 1")
        if self.argmin_reps is not None and self.argmin_reps < 1:
            raise InputError("argmin_reps must be >= 1")
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        etas = np.asarray(self.etas, dtype=float)
        if etas.size == 0 or np.any(np.diff(etas) <= 0) or etas[0] < 0:
            raise InputError("eta grid must be nonempty, ascending, nonnegative")
        object.__setattr__(self, "etas", tuple(float(e) for e in etas))
        if self.n is not None and etas[0] == 0 and self.n <= self.m:
            raise InputError("eta grid may include 0 only when n > m")
        if self.phi_grid is not None:
            phis = np.asarray(self.phi_grid, dtype=float)
            if phis.size == 0 or np.any(phis <= 0):
                raise InputError("phi grid must be nonempty and positive")
            object.__setattr__(self, "phi_grid", tuple(float(p) for p in phis))

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        from .dataio import parse_grid

        if not isinstance(obj, dict):
            raise InputError("experiment config must be a JSON object")
        known = {
            "m", "n", "phi_grid", "model", "design_dist", "noise_dist",
            "sigma_sq", "signal", "eta_grid", "reps", "argmin_reps", "k",
            "alpha", "seed", "redraw_signal", "threads",
        }
        unknown = set(obj) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for key in ("m", "model", "eta_grid"):
            if key not in obj:
                raise InputError(f"experiment config is missing {key!r}")
        signal = obj.get("signal", {"mode": "sphere", "radius": 1.0})
        if set(signal) - {"mode", "radius"}:
            raise InputError(f"unknown signal keys: {sorted(set(signal))}")
        grid = obj["eta_grid"]
        etas = tuple(parse_grid(grid)) if isinstance(grid, str) else tuple(grid)
        kwargs = dict(
            m=int(obj["m"]),
            model_spec=dict(obj["model"]),
            etas=etas,
            design_dist=obj.get("design_dist", "scaled_t10"),
            noise_dist=obj.get("noise_dist", "scaled_t10"),
            sigma_sq=float(obj.get("sigma_sq", 1.0)),
            signal_mode=signal.get("mode", "sphere"),
            signal_radius=float(signal.get("radius", 1.0)),
            reps=int(obj.get("reps", 200)),
            k=int(obj.get("k", 5)),
            alpha=float(obj.get("alpha", 0.05)),
            master_seed=int(obj.get("seed", 0)),
            redraw_signal=bool(obj.get("redraw_signal", False)),
            threads=int(obj.get("threads", 1)),
        )
        if obj.get("argmin_reps") is not None:
            kwargs["argmin_reps"] = int(obj["argmin_reps"])
        if obj.get("n") is not None:
            kwargs["n"] = int(obj["n"])
        if obj.get("phi_grid") is not None:
            kwargs["phi_grid"] = tuple(float(p) for p in obj["phi_grid"])
        return cls(**kwargs)

    def to_json(self) -> dict:
        out = {
            "m": self.m,
            "model": dict(self.model_spec),
            "eta_grid": list(self.etas),
            "design_dist": self.design_dist,
            "noise_dist": self.noise_dist,
            "sigma_sq": self.sigma_sq,
            "signal": {"mode": self.signal_mode, "radius": self.signal_radius},
            "reps": self.reps,
            "k": self.k,
            "alpha": self.alpha,
            "seed": self.master_seed,
            "redraw_signal": self.redraw_signal,
            "threads": self.threads,
        }
        if self.n is not None:
            out["n"] = self.n
        if self.phi_grid is not None:
            out["phi_grid"] = list(self.phi_grid)
        if self.argmin_reps is not None:
            out["argmin_reps"] = self.argmin_reps
        return out


@dataclass(frozen=True, eq=False)
class MCSummary:
    """Aggregated Monte Carlo output; unused sections stay None.

    Risk-curve runs fill etas, per-kind emp_mean/emp_sd/theoretical/rmt and
    the per-rep curves. Tuning sweeps fill phis, per-(method, kind) risk
    means, per-method coverage and interval-length statistics, and per-rep
    selections. Keys are plain strings (risk kinds by value, methods by
    tag) so summaries serialize directly.
    """

    master_seed: int
    reps: int
    failed: tuple[int, ...]
    etas: np.ndarray | None = None
    eta_star: float | None = None
    emp_mean: dict | None = None
    emp_sd: dict | None = None
    theoretical: dict | None = None
    rmt: dict | None = None
    rep_curves: dict | None = None
    phis: np.ndarray | None = None
    shapes: tuple | None = None
    risk_mean: dict | None = None
    risk_sd: dict | None = None
    coverage_mean: dict | None = None
    ci_len_mean: dict | None = None
    oracle_len: np.ndarray | None = None
    eta_selected: dict | None = None
    rep_risk: dict | None = None
    rep_grid_min: dict | None = None


@dataclass(frozen=True, eq=False)
class ArgminResult:
    """Per-signal deviations of empirical risk minimizers from eta_star."""

    etas: np.ndarray
    eta_star: float
    deviations: dict
    quartiles: dict
    rep_indices: tuple[int, ...]
    master_seed: int
    failed: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DistCheckResult:
    """Discrepancies between data-level statistics and sequence-model means."""

    etas: np.ndarray
    stat_names: tuple[str, ...]
    table: dict
    per_rep_sup: dict
    seq_mean: dict
    seq_se: dict
    failed: tuple[int, ...]


def build_model(spec: dict, n: int) -> CovarianceModel:
    """Instantiate a covariance model spec at dimension n."""
    obj = dict(spec)
    obj["n"] = int(n)
    return model_from_json(obj)


def _as_rng(seed, role: str) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed), 0, role)


def sample_signal(mode: str, n: int, seed, radius: float = 1.0) -> SignalVector:
    """sphere: radius * g/||g||; ball_radial: radius * U * g/||g||, U ~ Unif[0,1].

    ball_radial has a uniformly distributed norm, which is not the same as
    a volume-uniform draw from the ball.
    """
    if mode not in _SIGNAL_MODES:
        raise InputError(f"signal mode must be one of {_SIGNAL_MODES}")
    if n < 1:
        raise InputError(f"dimension must be >= 1, got {n}")
    rng = _as_rng(seed, "signal")
    g = rng.standard_normal(n)
    scale = radius / float(np.linalg.norm(g))
    if mode == "ball_radial":
        scale *= float(rng.random())
    return SignalVector(g * scale)


def sample_design(dist: str, m: int, n: int, model: CovarianceModel, seed) -> np.ndarray:
    """X = Z Sigma^{1/2} with Z entries i.i.d. mean zero, unit variance."""
    if dist not in _DISTS:
        raise InputError(f"design distribution must be one of {_DISTS}")
    if model.n != n:
        raise InputError(f"model dimension {model.n} != n = {n}")
    rng = _as_rng(seed, "design")
    if dist == "gaussian":
        z = rng.standard_normal((m, n))
    else:
        z = scaled_t10(rng.random((m, n)))
    return model.apply(np.sqrt, z.T).T


def sample_noise(dist: str, m: int, sigma_sq: float, seed) -> np.ndarray:
    """sigma * xi0 with unit-variance xi0; exactly zero (no draws) at sigma_sq = 0."""
    if dist not in _DISTS:
        raise InputError(f"noise distribution must be one of {_DISTS}")
    if sigma_sq < 0:
        raise InputError("sigma_sq must be nonnegative")
    if sigma_sq == 0:
        return np.zeros(m)
    rng = _as_rng(seed, "noise")
    if dist == "gaussian":
        base = rng.standard_normal(m)
    else:
        base = scaled_t10(rng.random(m))
    return np.sqrt(sigma_sq) * base


def seq_model_sample(
    model: CovarianceModel, mu0: SignalVector, gamma: float, tau: float, seed
) -> tuple[np.ndarray, np.ndarray]:
    """Sequence-model observation and its ridge estimate.

    y = Sigma^{1/2} mu0 + gamma g / sqrt(n),
    mu_hat = (Sigma + tau I)^{-1} Sigma^{1/2} y. No draw happens at gamma = 0.
    """
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    y = model.apply(np.sqrt, mu0.coords)
    if gamma != 0:
        rng = _as_rng(seed, "seq")
        y = y + gamma * rng.standard_normal(model.n) / np.sqrt(model.n)
    mu_hat = model.apply(lambda lam: np.sqrt(lam) / (lam + tau), y)
    return y, mu_hat


def residual_law_sample(
    phi: float,
    tau_star: float,
    gamma_star_sq: float,
    sigma_sq: float,
    eta: float,
    xi: np.ndarray,
    seed,
) -> np.ndarray:
    """Population residual law (eta/(phi tau)) (-sqrt(phi gamma^2 - sigma^2) h + xi)/sqrt(n).

    h is standard normal independent of xi; n is recovered as m/phi. eta = 0
    returns the zero vector without consuming the stream.
    """
    m = xi.size
    if eta == 0:
        return np.zeros(m)
    excess = phi * gamma_star_sq - sigma_sq
    if excess < -1e-10 * max(1.0, sigma_sq):
        raise InputError(f"phi gamma^2 - sigma^2 = {excess} is negative")
    rng = _as_rng(seed, "seq")
    h = rng.standard_normal(m)
    root_n = np.sqrt(m / phi)
    return (eta / (phi * tau_star)) * (-np.sqrt(max(excess, 0.0)) * h + xi) / root_n


def _apply_weight(a, model: CovarianceModel, v: np.ndarray) -> np.ndarray:
    if a is None:
        return v
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return model.eigen_apply(a, v)
    return a @ v


def seq_model_lq_mc(
    q: float,
    a,
    model: CovarianceModel,
    mu0: SignalVector,
    gamma: float,
    tau: float,
    reps: int,
    seed: int,
    ctx: int = 0,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ||A(mu_hat^seq - mu0)||_q.

    The closed-form counterpart averages the bias over signal directions,
    so mu0 should be a typical sphere draw (or any vector with spread-out
    eigen-coordinates) for the two to agree beyond q = 2.
    """
    if reps < 100:
        raise InputError(f"need at least 100 replications, got {reps}")
    if q <= 0:
        raise InputError(f"q must be positive, got {q}")
    if a is not None:
        arr = np.asarray(a, dtype=float)
        if arr.ndim == 1:
            if np.any(arr < 0):
                raise InputError("eigenbasis weights must be nonnegative")
        else:
            _check_psd_dense(arr)
    vals = np.empty(reps)
    for rep in range(reps):
        _, mu_hat = seq_model_sample(model, mu0, gamma, tau, stream(seed, rep, "seq", ctx))
        diff = _apply_weight(a, model, mu_hat - mu0.coords)
        vals[rep] = float(np.sum(np.abs(diff) ** q)) ** (1.0 / q)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return mean, stderr


def resolve_threads(threads: int) -> int:
    """0 (or negative) means auto: one worker per available CPU."""
    if threads > 0:
        return threads
    return os.cpu_count() or 1


def _map_reps(reps: int, threads: int, worker):
    """Run worker(rep) for rep in range(reps); ordered results, failures listed.

    Only numerical failures (ill-conditioning, wrong regime, linear-algebra
    breakdown) count as skippable; anything else propagates. Aborts when
    more than 1% of replications fail.
    """

    def guarded(rep: int):
        try:
            return worker(rep), None
        except (IllConditioned, WrongRegime, np.linalg.LinAlgError) as exc:
            return None, exc

    workers = resolve_threads(threads)
    if workers == 1:
        raw = [guarded(rep) for rep in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(guarded, range(reps)))
    results = []
    failed = []
    for rep, (value, exc) in enumerate(raw):
        if exc is None:
            results.append((rep, value))
        else:
            failed.append(rep)
    if len(failed) > 0.01 * reps:
        raise NonConvergence(
            f"{len(failed)} of {reps} replications failed numerically"
        )
    return results, tuple(failed)


def _draw_dataset(
    config: ExperimentConfig,
    model: CovarianceModel,
    mu0: SignalVector,
    rep: int,
    ctx: int,
):
    x = sample_design(
        config.design_dist,
        config.m,
        model.n,
        model,
        stream(config.master_seed, rep, "design", ctx),
    )
    xi = sample_noise(
        config.noise_dist,
        config.m,
        config.sigma_sq,
        stream(config.master_seed, rep, "noise", ctx),
    )
    return x, x @ mu0.coords + xi


def _empirical_curves(
    sweep: GramSweep,
    x: np.ndarray,
    model: CovarianceModel,
    mu0: SignalVector,
    etas: np.ndarray,
    kinds,
) -> dict:
    out = {kind: np.empty(etas.size) for kind in kinds}
    n = x.shape[1]
    for i, eta in enumerate(etas):
        mu_hat = sweep.mu_hat(float(eta))
        diff = mu_hat - mu0.coords
        for kind in kinds:
            if kind == RiskKind.EST:
                out[kind][i] = float(diff @ diff)
            elif kind == RiskKind.PRED:
                out[kind][i] = sigma_quad(model, diff)
            elif kind == RiskKind.INS:
                xd = x @ diff
                out[kind][i] = float(xd @ xd) / n
            else:
                r = sweep.resid(float(eta)) / np.sqrt(n)
                out[kind][i] = float(r @ r)
    return out


def _guard_interpolation(sweep: GramSweep, etas: np.ndarray) -> None:
    # grids that touch eta = 0 need an invertible X X^T, same bar as the
    # standalone ridgeless fit
    if etas[0] == 0:
        if not sweep.dual or sweep.s[0] <= 0 or sweep.s[-1] / sweep.s[0] > 1e12:
            raise IllConditioned("X X^T too ill-conditioned for eta = 0")


def _theory_curves(
    model: CovarianceModel,
    mu0: SignalVector,
    phi: float,
    sigma_sq: float,
    etas: np.ndarray,
    kinds,
) -> tuple[dict, dict]:
    theo = {kind: np.empty(etas.size) for kind in kinds}
    rmt = {kind: np.empty(etas.size) for kind in kinds}
    base = ProblemConfig(phi=phi, eta=0.0, sigma_sq=sigma_sq, model=model, mu0=mu0)
    s0 = mu0.norm_sq
    for i, eta in enumerate(etas):
        params = solve_effective(base.with_eta(float(eta)))
        for kind in kinds:
            theo[kind][i] = theoretical_risk(kind, params, model, mu0, sigma_sq, phi)
            rmt[kind][i] = rmt_risk(kind, params, sigma_sq, s0, phi)
    return theo, rmt


def run_risk_experiment(config: ExperimentConfig, ctx: int = 0) -> MCSummary:
    """Mean empirical risk curves with theoretical and RMT overlays.

    One signal is drawn up front and shared by every replication unless
    redraw_signal is set; the overlays always use that first signal.
    """
    if config.n is None:
        raise InputError("risk experiment needs a fixed n")
    model = build_model(config.model_spec, config.n)
    etas = np.asarray(config.etas)
    mu0_shared = sample_signal(
        config.signal_mode,
        config.n,
        stream(config.master_seed, 0, "signal", ctx),
        config.signal_radius,
    )
    mu0_shared.precompute(model)

    def worker(rep: int) -> dict:
        mu0 = mu0_shared
        if config.redraw_signal and rep > 0:
            mu0 = sample_signal(
                config.signal_mode,
                config.n,
                stream(config.master_seed, rep, "signal", ctx),
                config.signal_radius,
            )
        x, y = _draw_dataset(config, model, mu0, rep, ctx)
        sweep = GramSweep(x, y)
        _guard_interpolation(sweep, etas)
        return _empirical_curves(sweep, x, model, mu0, etas, _ALL_KINDS)

    results, failed = _map_reps(config.reps, config.threads, worker)
    curves = {
        kind.value: np.array([res[kind] for _, res in results]) for kind in _ALL_KINDS
    }
    theo, rmt = _theory_curves(
        model, mu0_shared, config.m / config.n, config.sigma_sq, etas, _ALL_KINDS
    )
    ddof = 1 if len(results) > 1 else 0
    return MCSummary(
        master_seed=config.master_seed,
        reps=config.reps,
        failed=failed,
        etas=etas,
        eta_star=optimal_eta(config.sigma_sq, config.signal_radius**2),
        emp_mean={k: v.mean(axis=0) for k, v in curves.items()},
        emp_sd={k: v.std(axis=0, ddof=ddof) for k, v in curves.items()},
        theoretical={kind.value: theo[kind] for kind in _ALL_KINDS},
        rmt={kind.value: rmt[kind] for kind in _ALL_KINDS},
        rep_curves=curves,
    )


def run_argmin_experiment(config: ExperimentConfig, ctx: int = 1) -> ArgminResult:
    """Redraw the signal per replication; report grid-argmin minus eta_star."""
    if config.n is None:
        raise InputError("argmin experiment needs a fixed n")
    model = build_model(config.model_spec, config.n)
    etas = np.asarray(config.etas)
    eta_star = optimal_eta(config.sigma_sq, config.signal_radius**2)
    reps = config.argmin_reps if config.argmin_reps is not None else config.reps

    def worker(rep: int) -> dict:
        mu0 = sample_signal(
            config.signal_mode,
            config.n,
            stream(config.master_seed, rep, "signal", ctx),
            config.signal_radius,
        )
        x, y = _draw_dataset(config, model, mu0, rep, ctx)
        sweep = GramSweep(x, y)
        _guard_interpolation(sweep, etas)
        curves = _empirical_curves(sweep, x, model, mu0, etas, _TUNE_KINDS)
        return {
            kind: float(etas[int(np.argmin(curves[kind]))]) - eta_star
            for kind in _TUNE_KINDS
        }

    results, failed = _map_reps(reps, config.threads, worker)
    deviations = {
        kind.value: np.array([res[kind] for _, res in results])
        for kind in _TUNE_KINDS
    }
    quartiles = {
        name: tuple(np.percentile(dev, [25.0, 50.0, 75.0]))
        for name, dev in deviations.items()
    }
    return ArgminResult(
        etas=etas,
        eta_star=eta_star,
        deviations=deviations,
        quartiles=quartiles,
        rep_indices=tuple(rep for rep, _ in results),
        master_seed=config.master_seed,
        failed=failed,
    )


def _sweep_grid(config: ExperimentConfig, n: int) -> np.ndarray:
    etas = np.asarray(config.etas)
    if etas[0] == 0 and n <= config.m:
        etas = etas[1:]
    if etas.size == 0:
        raise InputError("eta grid is empty after dropping the interpolation point")
    return etas


def run_tuning_experiment(config: ExperimentConfig, ctx_base: int = 0) -> MCSummary:
    """GCV / k-fold CV / oracle tuning across an aspect-ratio sweep.

    Per sweep point phi, n = round(m/phi) and theory uses the realized
    ratio m/n. The signal is redrawn each replication. Oracle rows carry
    the RMT risk at eta_star; oracle coverage and lengths come from the
    data pipeline run at eta_star.
    """
    if config.phi_grid is None:
        raise InputError("tuning experiment needs a phi grid")
    if config.sigma_sq <= 0:
        raise InputError("tuning experiment needs sigma_sq > 0")
    eta_star = optimal_eta(config.sigma_sq, config.signal_radius**2)
    cv_tag = f"cv{config.k}"
    methods = ("gcv", cv_tag, "oracle")
    n_phi = len(config.phi_grid)

    phis = np.empty(n_phi)
    shapes = []
    risk_mean: dict = {}
    risk_sd: dict = {}
    coverage_mean = {meth: np.empty(n_phi) for meth in methods}
    ci_len_mean = {meth: np.empty(n_phi) for meth in methods}
    oracle_len = np.empty(n_phi)
    eta_selected = {meth: [] for meth in ("gcv", cv_tag)}
    rep_risk: dict = {}
    rep_grid_min: dict = {}
    failed_all: list[int] = []

    for kind in _TUNE_KINDS:
        for meth in methods:
            risk_mean[(meth, kind.value)] = np.empty(n_phi)
            risk_sd[(meth, kind.value)] = np.empty(n_phi)
        for meth in ("gcv", cv_tag):
            rep_risk[(meth, kind.value)] = []
        rep_grid_min[kind.value] = []

    for pi, phi_req in enumerate(config.phi_grid):
        n = round(config.m / phi_req)
        if n < 1:
            raise InputError(f"phi = {phi_req} leaves no signal dimension")
        phi = config.m / n
        phis[pi] = phi
        shapes.append((config.m, n))
        model = build_model(config.model_spec, n)
        etas = _sweep_grid(config, n)
        ctx = ctx_base + pi

        # theory reference: a unit coordinate vector carries the
        # sphere-averaged eigen-masses for these models
        theory_sig = SignalVector(
            np.concatenate(([config.signal_radius], np.zeros(n - 1)))
        )
        params_star = solve_effective(
            ProblemConfig(
                phi=phi,
                eta=eta_star,
                sigma_sq=config.sigma_sq,
                model=model,
                mu0=theory_sig,
            )
        )
        inv_diag_1 = float(model.diag_fn(lambda lam: 1.0 / lam)[0])
        z_val = z_two_sided(config.alpha)
        oracle_len[pi] = (
            2.0
            * np.sqrt(params_star.gamma_star_sq)
            * np.sqrt(inv_diag_1)
            * z_val
            / np.sqrt(n)
        )
        for kind in _TUNE_KINDS:
            risk_mean[("oracle", kind.value)][pi] = rmt_risk(
                kind,
                params_star,
                config.sigma_sq,
                config.signal_radius**2,
                phi,
            )
            risk_sd[("oracle", kind.value)][pi] = 0.0

        def worker(rep: int, n=n, model=model, etas=etas, ctx=ctx):
            mu0 = sample_signal(
                config.signal_mode,
                n,
                stream(config.master_seed, rep, "signal", ctx),
                config.signal_radius,
            )
            x, y = _draw_dataset(config, model, mu0, rep, ctx)
            sweep = GramSweep(x, y)
            _guard_interpolation(sweep, etas)
            curves = _empirical_curves(sweep, x, model, mu0, etas, _TUNE_KINDS)

            gcv_obj = np.array([sweep.gamma_hat(float(e)) for e in etas])
            folds = kfold_folds(
                config.m, config.k, stream(config.master_seed, rep, "fold", ctx)
            )
            cv_obj = kfold_objective(Dataset(x=x, y=y, model=model), etas, folds)
            sel = {
                "gcv": int(np.argmin(gcv_obj)),
                cv_tag: int(np.argmin(cv_obj)),
            }
            out = {
                "eta": {meth: float(etas[idx]) for meth, idx in sel.items()},
                "risk": {
                    (meth, kind.value): curves[kind][idx]
                    for meth, idx in sel.items()
                    for kind in _TUNE_KINDS
                },
                "grid_min": {
                    kind.value: float(curves[kind].min()) for kind in _TUNE_KINDS
                },
                "coverage": {},
                "ci_len": {},
            }
            for meth in methods:
                eta_m = eta_star if meth == "oracle" else out["eta"][meth]
                mu_hat = sweep.mu_hat(eta_m)
                tau_d = sweep.tau_hat(eta_m)
                gamma_d = sweep.gamma_hat(eta_m)
                report = confidence_intervals(
                    debias(mu_hat, tau_d, model),
                    gamma_d,
                    model,
                    config.alpha,
                    mu0,
                )
                out["coverage"][meth] = report.coverage
                out["ci_len"][meth] = float(report.lengths[0])
            return out

        results, failed = _map_reps(config.reps, config.threads, worker)
        failed_all.extend(failed)
        for meth in ("gcv", cv_tag):
            eta_selected[meth].append(
                np.array([res["eta"][meth] for _, res in results])
            )
        ddof = 1 if len(results) > 1 else 0
        for kind in _TUNE_KINDS:
            for meth in ("gcv", cv_tag):
                vals = np.array([res["risk"][(meth, kind.value)] for _, res in results])
                risk_mean[(meth, kind.value)][pi] = vals.mean()
                risk_sd[(meth, kind.value)][pi] = vals.std(ddof=ddof)
                rep_risk[(meth, kind.value)].append(vals)
            rep_grid_min[kind.value].append(
                np.array([res["grid_min"][kind.value] for _, res in results])
            )
        for meth in methods:
            coverage_mean[meth][pi] = float(
                np.mean([res["coverage"][meth] for _, res in results])
            )
            ci_len_mean[meth][pi] = float(
                np.mean([res["ci_len"][meth] for _, res in results])
            )

    return MCSummary(
        master_seed=config.master_seed,
        reps=config.reps,
        failed=tuple(failed_all),
        eta_star=eta_star,
        phis=phis,
        shapes=tuple(shapes),
        risk_mean=risk_mean,
        risk_sd=risk_sd,
        coverage_mean=coverage_mean,
        ci_len_mean=ci_len_mean,
        oracle_len=oracle_len,
        eta_selected={meth: vals for meth, vals in eta_selected.items()},
        rep_risk=rep_risk,
        rep_grid_min=rep_grid_min,
    )


_STAT_BUILDERS = {
    "l1_scaled": lambda mu0, n: (lambda v: float(np.abs(v - mu0).sum()) / np.sqrt(n)),
    "l2_dist": lambda mu0, n: (lambda v: float(np.linalg.norm(v - mu0))),
    "proj_first": lambda mu0, n: (lambda v: float(v[0])),
    "proj_mean": lambda mu0, n: (lambda v: float(v.sum()) / np.sqrt(n)),
}


def distributional_check(
    config: ExperimentConfig,
    test_fns=("l1_scaled", "l2_dist", "proj_first", "proj_mean"),
    data_side: str = "data",
    seq_reps: int = 400,
    ctx: int = 0,
) -> DistCheckResult:
    """Compare data-level statistics against sequence-model Monte Carlo means.

    For each eta: the sequence model at (gamma_star, tau_star) is sampled
    seq_reps times to estimate E g(mu_hat_seq) for every built-in
    1-Lipschitz statistic g; each data replication contributes
    g(mu_hat_eta). data_side="seq" swaps the data fits for fresh
    sequence-model draws, turning the check into a pure-noise self test.
    """
    if config.n is None:
        raise InputError("distributional check needs a fixed n")
    unknown = set(test_fns) - set(_STAT_BUILDERS)
    if unknown:
        raise InputError(f"unknown statistics {sorted(unknown)}; "
                         f"built-ins are {sorted(_STAT_BUILDERS)}")
    if data_side not in ("data", "seq"):
        raise InputError("data_side must be 'data' or 'seq'")
    if seq_reps < 2:
        raise InputError("seq_reps must be >= 2")
    names = tuple(test_fns)
    model = build_model(config.model_spec, config.n)
    n, m = config.n, config.m
    etas = np.asarray(config.etas)
    mu0 = sample_signal(
        config.signal_mode,
        n,
        stream(config.master_seed, 0, "signal", ctx),
        config.signal_radius,
    )
    mu0.precompute(model)
    stats = {name: _STAT_BUILDERS[name](mu0.coords, n) for name in names}

    base = ProblemConfig(
        phi=m / n, eta=0.0, sigma_sq=config.sigma_sq, model=model, mu0=mu0
    )
    params = [solve_effective(base.with_eta(float(e))) for e in etas]

    def seq_stats(rep_index: int) -> dict:
        rng = stream(config.master_seed, rep_index, "seq", ctx)
        g = rng.standard_normal(n)
        vals = {name: np.empty(etas.size) for name in names}
        for i, p in enumerate(params):
            y = model.apply(np.sqrt, mu0.coords) + np.sqrt(
                p.gamma_star_sq
            ) * g / np.sqrt(n)
            mu_seq = model.apply(lambda lam: np.sqrt(lam) / (lam + p.tau_star), y)
            for name in names:
                vals[name][i] = stats[name](mu_seq)
        return vals

    bank = [seq_stats(s) for s in range(seq_reps)]
    seq_mean = {
        name: np.mean([b[name] for b in bank], axis=0) for name in names
    }
    seq_se = {
        name: np.std([b[name] for b in bank], axis=0, ddof=1) / np.sqrt(seq_reps)
        for name in names
    }

    def worker(rep: int) -> dict:
        if data_side == "seq":
            return seq_stats(seq_reps + rep)
        x, y = _draw_dataset(config, model, mu0, rep, ctx)
        sweep = GramSweep(x, y)
        _guard_interpolation(sweep, etas)
        vals = {name: np.empty(etas.size) for name in names}
        for i, eta in enumerate(etas):
            mu_hat = sweep.mu_hat(float(eta))
            for name in names:
                vals[name][i] = stats[name](mu_hat)
        return vals

    results, failed = _map_reps(config.reps, config.threads, worker)
    data_vals = {
        name: np.array([res[name] for _, res in results]) for name in names
    }
    table = {
        name: np.abs(data_vals[name].mean(axis=0) - seq_mean[name]) for name in names
    }
    per_rep_sup = {
        name: np.max(np.abs(data_vals[name] - seq_mean[name][None, :]), axis=1)
        for name in names
    }
    return DistCheckResult(
        etas=etas,
        stat_names=names,
        table=table,
        per_rep_sup=per_rep_sup,
        seq_mean=seq_mean,
        seq_se=seq_se,
        failed=failed,
    )
