"""Acceptance suite at full size; each criterion prints one PASS/FAIL line."""

import time

import numpy as np
import pytest
from scipy import integrate

from likelihood_lab import cli, information, infogeom, montecarlo
from likelihood_lab import multinomial_efficiency as me
from likelihood_lab.experiments import EXPERIMENTS
from likelihood_lab.families import get_family

SEED = 20240601


@pytest.fixture
def verdict(capsys):
    def report(number, title, checks):
        ok = all(bool(v) for _, v, _ in checks)
        detail = "; ".join(f"{name}={value}" for name, _, value in checks)
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})")
        failed = [name for name, v, _ in checks if not v]
        assert ok, f"criterion {number} failed checks: {failed}"

    return report


def _fmt(x):
    return f"{x:.6g}"


def test_criterion_01_hodges(verdict):
    t0 = time.perf_counter()
    rows = montecarlo.superefficiency_scan([0.0, 1.0], [10_000], alpha=0.5, replications=10_000, seed=SEED)
    elapsed = time.perf_counter() - t0
    by = {(r["theta"], r["estimator"]): r for r in rows}
    v0, v1 = by[(0.0, "hodges")]["n_variance"], by[(1.0, "hodges")]["n_variance"]
    verdict(1, "Hodges superefficiency", [
        ("nVar(theta=0)", 0.23 <= v0 <= 0.27, _fmt(v0)),
        ("nVar(theta=1)", 0.95 <= v1 <= 1.05, _fmt(v1)),
        ("runtime_s", elapsed < 60, _fmt(elapsed)),
        ("all_valid", all(r["valid"] for r in rows), all(r["valid"] for r in rows)),
    ])


def test_criterion_02_neyman_scott(verdict):
    row = montecarlo.neyman_scott_scan(1.0, [10_000], replications=1000, seed=SEED)[0]
    ks = montecarlo.neyman_scott_ks(1.0, 2000, seed=SEED, level=0.01)
    verdict(2, "Neyman-Scott", [
        ("mean_sigma2_hat(J=1e4)", 0.48 <= row["mean_sigma2_hat"] <= 0.52, _fmt(row["mean_sigma2_hat"])),
        ("ks_pvalue(J=1)", ks["passes"], _fmt(ks["pvalue"])),
    ])


def test_criterion_03_information_identities(verdict):
    rng = np.random.default_rng(SEED)
    draws = {
        "normal": lambda: [rng.uniform(-3, 3), rng.uniform(0.3, 3)],
        "cauchy": lambda: [rng.uniform(-3, 3)],
        "gamma-shape": lambda: [rng.uniform(0.5, 6)],
        "binomial": lambda: [rng.uniform(0.05, 0.95)],
    }
    worst_gap, worst_score = 0.0, 0.0
    for name, draw in draws.items():
        fam = get_family(name)
        for _ in range(20):
            rep = information.expected_information(fam, draw(), n=5)
            worst_gap = max(worst_gap, rep.max_pairwise_discrepancy)
            worst_score = max(worst_score, float(np.max(np.abs(rep.mean_score))))
    verdict(3, "information identities", [
        ("max_relative_gap", worst_gap <= 1e-5, _fmt(worst_gap)),
        ("max_abs_mean_score", worst_score <= 1e-5, _fmt(worst_score)),
    ])


def test_criterion_04_anova_and_inequality(verdict):
    fam, n, p = get_family("binomial"), 12, [0.3]
    full = information.anova_decomposition(fam, n, information.cell_count(0), p)
    half = information.anova_decomposition(fam, n, information.cell_count(0, list(range(6))), p)
    ineq = information.information_inequality_report(fam, n, lambda o: (o == 0).sum(axis=1) / n, p)
    identity = max(abs(full.identity_residual), abs(half.identity_residual))
    verdict(4, "ANOVA decomposition and information inequality", [
        ("identity_residual", identity <= 1e-10, _fmt(identity)),
        ("E[Var(X|T)] sufficient", full.e_var_X_given_T <= 1e-12, _fmt(full.e_var_X_given_T)),
        ("Var(k/n)-1/I", abs(ineq.var_T - ineq.bound) <= 1e-12 * ineq.bound, _fmt(ineq.var_T - ineq.bound)),
        ("E[Var(X|T)] insufficient", half.e_var_X_given_T > 0, _fmt(half.e_var_X_given_T)),
    ])


def test_criterion_05_degree_zero_estimators(verdict):
    worst_dir, worst_slack, worst_euler = 0.0, np.inf, 0.0
    rng = np.random.default_rng(SEED)
    for name in ("binomial", "hardy-weinberg", "linkage"):
        fam = get_family(name)
        for th in np.linspace(0.1, 0.9, 9):
            d = me.efficient_direction(fam, th)
            worst_dir = max(worst_dir, abs(d @ fam.derivs(np.array([th]))[0] - 1))
            bound = 1 / me.per_observation_information(fam, th)
            for est in me.estimator_library(fam):
                for n in (1, 100, 100_000):
                    slack = me.delta_method_variance(est, fam, th, n) - bound / n
                    worst_slack = min(worst_slack, slack)
        for est in me.estimator_library(fam):
            for _ in range(10):
                x = rng.uniform(1, 1000, fam.n_cells)
                worst_euler = max(worst_euler, abs(me.euler_degree_zero_check(est, x)))
    spec = montecarlo.ExperimentSpec(family="hardy-weinberg", theta=(0.3,), sample_sizes=(100_000,),
                                     replications=10_000, estimators=("mle",), seed=SEED)
    cell = montecarlo.replicate(spec).cell("mle", 100_000)
    target = 1 / me.per_observation_information(get_family("hardy-weinberg"), 0.3)
    rel = abs(cell.n_variance - target) / target
    verdict(5, "degree-zero multinomial estimators", [
        ("max|d.df-1|", worst_dir <= 1e-10, _fmt(worst_dir)),
        ("min(delta_var-bound)", worst_slack >= -1e-12, _fmt(worst_slack)),
        ("mle_nVar_rel_err", rel <= 0.05, _fmt(rel)),
        ("mle_failures", cell.valid, cell.failures),
        ("max_euler_residual", worst_euler <= 1e-8, _fmt(worst_euler)),
    ])


def test_criterion_06_cauchy(verdict):
    direct, _ = integrate.quad(lambda x: (2 * x / (1 + x * x)) ** 2 / (np.pi * (1 + x * x)), -np.inf, np.inf,
                               epsabs=1e-13)
    rows = montecarlo.consistency_scan([100, 10_000], 2000, seed=SEED, multistart_grid=5)
    small, large = rows
    ratio = large["iqr_mean"] / small["iqr_mean"]
    verdict(6, "Cauchy consistency contrast", [
        ("I1_quadrature", abs(direct - 0.5) <= 1e-6, _fmt(direct)),
        ("mle_nVar", abs(large["n_var_mle"] / 2 - 1) <= 0.10, _fmt(large["n_var_mle"])),
        ("mean_iqr_ratio", ratio >= 0.5, _fmt(ratio)),
        ("median_nVar", abs(large["n_var_median"] / (np.pi**2 / 4) - 1) <= 0.10, _fmt(large["n_var_median"])),
        ("mle_failures", large["valid"], large["failures_mle"]),
    ])


def test_criterion_07_efficient_correlation(verdict):
    rows = montecarlo.efficient_correlation(get_family("hardy-weinberg"), 0.3, [100, 1000, 10_000], 4000, seed=SEED)
    corr = [r["correlation"] for r in rows]
    se = [r["se"] for r in rows]
    monotone = all(corr[i + 1] >= corr[i] - 2 * np.hypot(se[i], se[i + 1]) for i in range(len(rows) - 1))
    verdict(7, "efficient-estimate correlation", [
        ("corr(n=1e4)", corr[-1] >= 0.99, _fmt(corr[-1])),
        ("nondecreasing_2se", monotone, ",".join(_fmt(c) for c in corr)),
        ("valid", all(r["valid"] for r in rows), all(r["valid"] for r in rows)),
    ])


def test_criterion_08_sufficiency(verdict):
    out = montecarlo.sufficiency_correlation_demo(10_000, 10_000, seed=SEED)
    verdict(8, "sufficient statistic identity", [
        ("relative_residual", out["relative_residual"] <= 0.02, _fmt(out["relative_residual"])),
        ("rho", abs(out["rho"] - out["rho_target"]) <= 0.02, _fmt(out["rho"])),
    ])


def test_criterion_09_mixture(verdict):
    exp = EXPERIMENTS["mixture-explosion"]
    params = dict(exp.defaults, halvings=10, n=500, sigma_min=0.05)
    summary = {}
    rows = list(exp.rows(params, SEED, summary))
    increments = [r["increment"] for r in rows[1:]]
    means_err = summary["fit_means_error"]
    finite = all(np.isfinite(summary[k]) for k in ("fit_w", "fit_mu1", "fit_sigma1", "fit_mu2", "fit_sigma2"))
    verdict(9, "mixture likelihood explosion", [
        ("halvings", len(increments) == 10, len(increments)),
        ("min_increment", min(increments) >= np.log(2) - 0.05, _fmt(min(increments))),
        ("fit_converged", summary["fit_converged"] and finite, summary["fit_converged"]),
        ("means_error", means_err <= 0.2, _fmt(means_err)),
    ])


def test_criterion_10_geometry(verdict):
    fam = get_family("normal")
    rng = np.random.default_rng(SEED)
    curv = np.array([infogeom.gaussian_curvature(fam, [rng.uniform(-3, 3), rng.uniform(0.3, 3)])
                     for _ in range(10)])
    circle_err, excess_ok = 0.0, True
    for r in (0.25, 0.5, 1.0):
        c = infogeom.geodesic_circle(fam, [0.0, 1.0], r, n_rays=64)
        exact = 2 * np.pi * np.sqrt(2) * np.sinh(r / np.sqrt(2))
        circle_err = max(circle_err, abs(c["circumference"] - exact) / exact)
        excess_ok &= c["circumference"] > 2 * np.pi * r
    anc = infogeom.ancestor_variance_demo(1.0, -1.0, 1.0)
    meridian = infogeom.geodesic(fam, [0.0, 1.0], [0.0, 3.0])
    meridian_err = abs(meridian.length - np.sqrt(2) * np.log(3.0))
    verdict(10, "normal-family geometry", [
        ("max|K+1/2|", np.max(np.abs(curv + 0.5)) <= 1e-3, _fmt(np.max(np.abs(curv + 0.5)))),
        ("K_spread", np.ptp(curv) <= 2e-3, _fmt(np.ptp(curv))),
        ("circle_rel_err", circle_err <= 0.01, _fmt(circle_err)),
        ("exceeds_2pi_r", excess_ok, excess_ok),
        ("ancestor_exceeds", anc["exceeds"], _fmt(anc["sigma_max_on_geodesic"])),
        ("meridian_len_err", meridian_err <= 1e-4, _fmt(meridian_err)),
    ])


def test_criterion_11_cli_determinism(verdict, tmp_path):
    differing = []
    for name in EXPERIMENTS:
        outputs = []
        for k in range(2):
            path = tmp_path / f"{name}-{k}.csv"
            code = cli.main(["--experiment", name, "--seed", "5", "--out", str(path)], environ={})
            outputs.append((code, path.read_bytes()))
        if outputs[0] != outputs[1] or outputs[0][0] != 0:
            differing.append(name)
    verdict(11, "CLI determinism", [
        ("experiments", len(EXPERIMENTS) == 11, len(EXPERIMENTS)),
        ("differing_or_failed", not differing, ",".join(differing) or "none"),
    ])
