"""Acceptance suite: one test per release criterion.

Monte Carlo criteria pin their full protocol (shapes, grids, rep counts,
master seeds, thread counts) so every run is byte-reproducible. Session
fixtures share the expensive simulation runs across criteria.
"""

import json
import math
import time

import numpy as np
import pytest

from ridgelab import (
    Dataset,
    ExperimentConfig,
    GramSweep,
    Isotropic,
    ProblemConfig,
    RiskKind,
    SignalVector,
    build_model,
    distributional_check,
    lq_gamma_diag,
    lq_risk,
    opt_risks,
    quad_form,
    risk_curve,
    risk_derivative,
    rmt_risk,
    run_risk_experiment,
    run_tuning_experiment,
    sample_design,
    sample_noise,
    sample_signal,
    seq_model_lq_mc,
    solve_effective,
    solve_tau,
    stream,
    tau_bounds,
    trace_functional,
)
from conftest import iso_problem, random_problem
from ridgelab.cli import run as cli_run

SPIKED = {"kind": "spiked_uniform", "a": 1.99, "b": 0.01}
GRID161 = tuple(np.linspace(0.0, 1.5, 161))
GRID31 = tuple(np.linspace(0.0, 1.5, 31))
STEP161 = 1.5 / 160

TUNE_KINDS = ("pred", "est", "ins")


def fig1_config(sigma_sq: float) -> ExperimentConfig:
    return ExperimentConfig(
        m=100,
        n=200,
        model_spec=SPIKED,
        etas=GRID161,
        design_dist="scaled_t10",
        noise_dist="scaled_t10",
        sigma_sq=sigma_sq,
        signal_mode="sphere",
        signal_radius=1.0,
        reps=200,
        master_seed=11,
        threads=4,
    )


@pytest.fixture(scope="session")
def fig1_run():
    t0 = time.perf_counter()
    summary = run_risk_experiment(fig1_config(sigma_sq=1.0))
    return summary, time.perf_counter() - t0


@pytest.fixture(scope="session")
def fig1_noiseless_run():
    return run_risk_experiment(fig1_config(sigma_sq=0.0))


@pytest.fixture(scope="session")
def tuning_run():
    config = ExperimentConfig(
        m=200,
        phi_grid=(2.0 / 3.0,),
        model_spec=SPIKED,
        etas=GRID31,
        design_dist="scaled_t10",
        noise_dist="scaled_t10",
        sigma_sq=1.0,
        signal_mode="sphere",
        signal_radius=1.0,
        reps=100,
        k=5,
        alpha=0.05,
        master_seed=7,
        threads=4,
    )
    return run_tuning_experiment(config)


def test_criterion_01_fixed_point_exactness():
    rng = np.random.default_rng(20260814)
    configs = [random_problem(rng) for _ in range(100)]
    t0 = time.perf_counter()
    params = [solve_effective(c) for c in configs]
    elapsed = time.perf_counter() - t0
    for config, p in zip(configs, params):
        tau, gsq = p.tau_star, p.gamma_star_sq
        res_tau = abs(
            trace_functional(config.model, tau, 1, 1) + config.eta / tau - config.phi
        )
        res_gamma = abs(
            gsq * (config.eta / tau + tau * trace_functional(config.model, tau, 2, 1))
            - config.sigma_sq
            - tau**2 * quad_form(config.model, config.mu0, tau, 1, 1)
        )
        assert res_tau <= 1e-10
        assert res_gamma <= 1e-10
        lo, hi = tau_bounds(config)
        assert lo - 1e-12 <= tau <= hi + 1e-12
    assert elapsed <= 1.0


def test_criterion_02_isotropic_closed_forms():
    p = solve_effective(iso_problem(eta=0.0))
    assert p.tau_star == pytest.approx(1.0, abs=1e-9)
    assert p.gamma_star_sq == pytest.approx(5.0, abs=1e-9)
    assert p.tau_prime == pytest.approx(4.0, abs=1e-9)
    assert p.tau_second == pytest.approx(-16.0, abs=1e-9)
    assert p.gamma_tilde_sq == pytest.approx(5.0, abs=1e-9)

    p1 = solve_effective(iso_problem(eta=1.0))
    assert p1.tau_star == pytest.approx((3.0 + math.sqrt(17.0)) / 2.0, abs=1e-10)


def test_criterion_03_rmt_equals_theoretical_on_isotropic():
    cases = [
        iso_problem(eta=0.0, scale=1.0, radius=1.0, n=24),
        iso_problem(eta=0.0, scale=2.3, radius=0.5, n=24),
    ]
    etas = np.asarray(GRID161)
    for base in cases:
        for kind in RiskKind:
            curve = risk_curve(base, kind, etas)
            np.testing.assert_allclose(curve.rmt, curve.theoretical, atol=1e-8)


def test_criterion_04_derivative_structure():
    base = iso_problem(eta=0.0, n=24)
    s0 = base.mu0.norm_sq
    h = 1e-5
    for eta in (0.25, 0.6, 1.2):
        p = solve_effective(base.with_eta(eta))
        for kind in (RiskKind.PRED, RiskKind.EST, RiskKind.INS):
            lo = rmt_risk(
                kind, solve_effective(base.with_eta(eta - h)), 1.0, s0, base.phi
            )
            hi = rmt_risk(
                kind, solve_effective(base.with_eta(eta + h)), 1.0, s0, base.phi
            )
            fd = (hi - lo) / (2.0 * h)
            exact = risk_derivative(kind, p, base.model, 1.0, s0)
            assert exact == pytest.approx(fd, rel=1e-4)

    # the common stationary point sits at eta = sigma^2 / ||mu0||^2
    for sigma_sq, radius in [(1.0, 1.0), (2.0, 1.0), (1.0, 0.5)]:
        cfg = iso_problem(eta=sigma_sq / radius**2, sigma_sq=sigma_sq, radius=radius)
        p = solve_effective(cfg)
        for kind in (RiskKind.PRED, RiskKind.EST, RiskKind.INS):
            deriv = risk_derivative(kind, p, cfg.model, sigma_sq, cfg.mu0.norm_sq)
            assert deriv == pytest.approx(0.0, abs=1e-12)

    etas = np.asarray(GRID161)
    nearest = int(np.argmin(np.abs(etas - 1.0)))
    for kind in (RiskKind.PRED, RiskKind.EST, RiskKind.INS):
        curve = risk_curve(base, kind, etas)
        assert int(np.argmin(curve.theoretical)) == nearest
        assert int(np.argmin(curve.rmt)) == nearest


def test_criterion_05_optimal_risk_identities():
    cfg = iso_problem(eta=1.0)
    pred, est, ins = opt_risks(0.5, 1.0, solve_tau(cfg))
    root = math.sqrt(17.0)
    assert pred == pytest.approx((root - 1.0) / 4.0, abs=1e-10)
    assert est == pytest.approx((root - 1.0) / 4.0, abs=1e-10)
    assert ins == pytest.approx((5.0 - root) / 4.0, abs=1e-10)
    assert ins * (pred + 1.0) == pytest.approx(0.5 * pred, abs=1e-10)

    values = []
    for phi in np.linspace(0.1, 3.0, 20):
        cfg_phi = ProblemConfig(
            phi=float(phi),
            eta=1.0,
            sigma_sq=1.0,
            model=Isotropic(1.0, 4),
            mu0=cfg.mu0,
        )
        values.append(opt_risks(float(phi), 1.0, solve_tau(cfg_phi)))
    arr = np.array(values)
    assert np.all(np.diff(arr[:, 0]) < 0)  # pred falls as samples accumulate
    assert np.all(np.diff(arr[:, 1]) < 0)
    assert np.all(np.diff(arr[:, 2]) > 0)  # in-sample excess grows with phi


def test_criterion_06_lq_cross_oracle():
    t0 = time.perf_counter()
    n = 400
    mu0 = sample_signal("sphere", n, 1)
    base = ProblemConfig(
        phi=0.5, eta=0.5, sigma_sq=1.0, model=Isotropic(1.0, n), mu0=mu0
    )
    params = solve_effective(base)
    diag = lq_gamma_diag(None, base.model, params, mu0.norm)
    gamma = float(np.sqrt(params.gamma_tilde_sq))
    for q in (1.0, 2.0, 4.0):
        closed = lq_risk(q, diag, n)
        mc_mean, _ = seq_model_lq_mc(
            q, None, base.model, mu0, gamma, params.tau_star, reps=2000, seed=5
        )
        assert mc_mean == pytest.approx(closed, rel=0.05)
    assert lq_risk(2.0, diag, n) == pytest.approx(
        float(np.sqrt(np.mean(diag))), abs=1e-12
    )
    assert time.perf_counter() - t0 <= 30.0


def test_criterion_07_risk_concentration(fig1_run):
    summary, elapsed = fig1_run
    assert summary.failed == ()
    etas = np.asarray(summary.etas)
    for kind in TUNE_KINDS:
        rel = np.abs(summary.emp_mean[kind] - summary.theoretical[kind]) / (
            summary.theoretical[kind]
        )
        assert float(rel.max()) <= 0.10, f"{kind} max rel dev {rel.max():.4f}"
        eta_hash = float(etas[int(np.argmin(summary.emp_mean[kind]))])
        assert abs(eta_hash - 1.0) <= 2.0 * STEP161 + 1e-12, (
            f"{kind} argmin at {eta_hash}"
        )
    assert elapsed <= 300.0


def test_criterion_08_phase_transition(fig1_run, fig1_noiseless_run):
    summary, _ = fig1_run
    pred = summary.emp_mean["pred"]
    assert float(pred[0] - pred.min()) >= 0.3

    noiseless = fig1_noiseless_run.emp_mean["pred"]
    assert int(np.argmin(noiseless)) == 0  # interpolation is optimal without noise
    assert float(noiseless[0] - noiseless.min()) <= 0.02


def test_criterion_09_estimator_consistency():
    m, n, seed, reps = 200, 400, 7, 100
    model = build_model(SPIKED, n)
    mu0 = sample_signal("sphere", n, stream(seed, 0, "signal"))
    etas = np.asarray(GRID31)
    base = ProblemConfig(phi=m / n, eta=0.0, sigma_sq=1.0, model=model, mu0=mu0)
    stars = [solve_effective(base.with_eta(float(e))) for e in etas]
    tau_star = np.array([p.tau_star for p in stars])
    gamma_star = np.array([math.sqrt(p.gamma_star_sq) for p in stars])

    tau_bound = n ** (-1.0 / 3.0)
    tau_ok = gamma_ok = 0
    for rep in range(reps):
        x = sample_design("gaussian", m, n, model, stream(seed, rep, "design"))
        xi = sample_noise("gaussian", m, 1.0, stream(seed, rep, "noise"))
        sweep = GramSweep(x, x @ mu0.coords + xi)
        tau_hats = np.array([sweep.tau_hat(float(e)) for e in etas])
        gamma_hats = np.array([sweep.gamma_hat(float(e)) for e in etas])
        tau_ok += int(np.max(np.abs(tau_hats - tau_star)) <= tau_bound)
        gamma_ok += int(np.max(np.abs(gamma_hats - gamma_star)) <= 0.15)

    assert tau_ok >= 95, f"sup-eta tau_hat within n^(-1/3) in {tau_ok}/100 reps"
    assert gamma_ok >= 90, (
        f"sup-eta gamma_hat within 0.15 in {gamma_ok}/100 reps (tau clause: "
        f"{tau_ok}/100); the gamma estimator's per-rep dispersion at n=400 "
        f"exceeds this band, see the release notes"
    )


def test_criterion_10_tuning_optimality(tuning_run):
    summary = tuning_run
    assert summary.failed == ()
    for method in ("gcv", "cv5"):
        good = np.ones(summary.reps, dtype=bool)
        for kind in TUNE_KINDS:
            risk = np.asarray(summary.rep_risk[(method, kind)][0])
            grid_min = np.asarray(summary.rep_grid_min[kind][0])
            slack = np.maximum(0.1 * grid_min, 0.05)
            good &= risk <= grid_min + slack
        count = int(good.sum())
        assert count >= 85, f"{method} within slack of grid-min in {count}/100 reps"


def test_criterion_11_inference_coverage(tuning_run):
    summary = tuning_run
    oracle_len = float(summary.oracle_len[0])
    for method in ("gcv", "cv5"):
        cov = float(summary.coverage_mean[method][0])
        assert 0.92 <= cov <= 0.97, f"{method} coverage {cov:.4f}"
        length = float(summary.ci_len_mean[method][0])
        assert length == pytest.approx(oracle_len, rel=0.10), (
            f"{method} mean CI length {length:.4f} vs oracle {oracle_len:.4f}"
        )


def dist_config(design: str) -> ExperimentConfig:
    return ExperimentConfig(
        m=200,
        n=400,
        model_spec=SPIKED,
        etas=(0.0, 0.375, 0.75, 1.125, 1.5),
        design_dist=design,
        noise_dist=design,
        sigma_sq=1.0,
        signal_mode="sphere",
        signal_radius=1.0,
        reps=20,
        master_seed=7,
        threads=4,
    )


def test_criterion_12_distributional_proximity():
    medians = {}
    for design in ("gaussian", "scaled_t10"):
        res = distributional_check(dist_config(design), seq_reps=400)
        sups = np.asarray(res.per_rep_sup["l1_scaled"])
        count = int(np.sum(sups <= 0.1))
        assert count >= 18, f"{design}: l1 sup <= 0.1 in {count}/20 reps"
        medians[design] = float(np.median(sups))

    ratio = medians["scaled_t10"] / medians["gaussian"]
    assert max(ratio, 1.0 / ratio) <= 2.0, f"universality ratio {ratio:.3f}"

    self_res = distributional_check(
        dist_config("gaussian"), data_side="seq", seq_reps=400
    )
    for name in self_res.stat_names:
        per_draw_sd = np.asarray(self_res.seq_se[name]) * np.sqrt(400.0)
        se_diff = per_draw_sd * np.sqrt(1.0 / 20.0 + 1.0 / 400.0)
        z = np.asarray(self_res.table[name]) / se_diff
        assert float(z.max()) <= 3.0, f"self-test {name} z {z.max():.2f}"


def test_criterion_13_pipeline_determinism(tmp_path):
    fig1 = {
        "m": 20,
        "n": 40,
        "model": SPIKED,
        "eta_grid": [0.0, 0.75, 1.5],
        "reps": 5,
        "seed": 9,
    }
    fig2 = {
        "m": 20,
        "phi_grid": [0.8],
        "model": SPIKED,
        "eta_grid": [0.3, 0.9, 1.5],
        "reps": 5,
        "k": 5,
        "seed": 9,
    }
    outputs = {
        "fig1": ("risk_curves.csv", "argmin.csv"),
        "fig2": ("tuning.csv", "coverage.csv"),
    }
    for name, obj in [("fig1", fig1), ("fig2", fig2)]:
        config = tmp_path / f"{name}.json"
        config.write_text(json.dumps(obj))
        seen = []
        for tag, threads in [("a", 1), ("b", 1), ("c", 4)]:
            out_dir = tmp_path / f"{name}_{tag}"
            argv = [
                "sim", name,
                "--config", str(config),
                "--out-dir", str(out_dir),
                "--threads", str(threads),
            ]
            assert cli_run(argv) == 0
            seen.append(tuple((out_dir / f).read_bytes() for f in outputs[name]))
        assert seen[0] == seen[1], f"{name} differs between identical runs"
        assert seen[0] == seen[2], f"{name} differs across thread counts"
