"""Registry of named experiments run by the command line front end.

Every experiment declares its defaults, its output columns (fixed order) and
a generator that yields one row per result.  Scalar by-products go into the
``summary`` dict, which is written to the header block.  Defaults are sized
to finish in a few seconds; the acceptance sizes are reached with overrides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import estimation, infogeom, information, montecarlo
from . import multinomial_efficiency as me
from .families import get_family, normal_mixture

__all__ = ["Experiment", "EXPERIMENTS", "list_experiments", "get_experiment"]


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    anchor: str
    defaults: dict
    columns: tuple
    run: Callable
    n_key: str | None = "n"

    def rows(self, params, seed, summary):
        for row in self.run(params, seed, summary):
            if tuple(row) != self.columns:
                raise RuntimeError(f"{self.name}: row keys {tuple(row)} differ from declared columns")
            yield row


def _status(ok):
    return "OK" if ok else "INVALID"


def _hodges(p, seed, summary):
    rows = montecarlo.superefficiency_scan(p["theta"], p["n"], p["alpha"], p["replications"], seed,
                                           threshold=bool(p["threshold"]))
    for r in rows:
        yield {"theta": r["theta"], "n": r["n"], "estimator": r["estimator"], "n_variance": r["n_variance"],
               "n_mse": r["n_mse"], "se_n_variance": float(r["se_n_variance"]), "bias": r["bias"],
               "status": _status(r["valid"])}


def _neyman_scott(p, seed, summary):
    ks = montecarlo.neyman_scott_ks(p["sigma2"], p["ks_replications"], seed)
    summary.update(ks_statistic=ks["statistic"], ks_pvalue=ks["pvalue"], ks_passes=ks["passes"])
    for r in montecarlo.neyman_scott_scan(p["sigma2"], p["J"], p["replications"], seed):
        yield {"J": r["J"], "sigma2": r["sigma2"], "mean_sigma2_hat": r["mean_sigma2_hat"], "target": r["target"],
               "variance": r["variance"], "se_mean": r["se_mean"], "status": _status(r["valid"])}


def _cauchy(p, seed, summary):
    rows = montecarlo.consistency_scan(p["n"], p["replications"], seed, multistart_grid=p["multistart_grid"])
    summary.update(iqr_ratio=rows[-1]["iqr_mean"] / rows[0]["iqr_mean"],
                   information_per_obs=float(information.per_observation_information(
                       get_family("cauchy"), [0.0], form="hessian")[0, 0]))
    for r in rows:
        yield {"n": r["n"], "iqr_mean": r["iqr_mean"], "var_mean": r["var_mean"], "n_var_mle": r["n_var_mle"],
               "se_n_var_mle": float(r["se_n_var_mle"]), "n_var_median": r["n_var_median"],
               "se_n_var_median": float(r["se_n_var_median"]), "failures_mle": r["failures_mle"],
               "status": _status(r["valid"])}


def _efficient_correlation(p, seed, summary):
    fam = get_family(p["family"])
    for r in montecarlo.efficient_correlation(fam, p["theta"], p["n"], p["replications"], seed):
        yield {"n": r["n"], "correlation": r["correlation"], "se": float(r["se"]),
               "failures_mle": r["failures_mle"], "failures_min_chisquare": r["failures_min_chisquare"],
               "status": _status(r["valid"])}


def _sufficiency(p, seed, summary):
    r = montecarlo.sufficiency_correlation_demo(p["n"], p["replications"], seed)
    yield {"n": r["n"], "sigma_T": r["sigma_T"], "sigma_S": r["sigma_S"], "rho": r["rho"],
           "rho_target": r["rho_target"], "residual": r["residual"], "relative_residual": r["relative_residual"],
           "status": "OK"}


def _anova(p, seed, summary):
    fam = get_family("binomial")
    n = p["n"]
    half = list(range(n // 2))
    stats_ = {"total-count": information.cell_count(0), "first-half-count": information.cell_count(0, half),
              "first-observation": information.cell_count(0, [0])}
    for name, stat in stats_.items():
        d = information.anova_decomposition(fam, n, stat, p["theta"])
        yield {"statistic": name, "var_X": d.var_X, "e_var_X_given_T": d.e_var_X_given_T,
               "var_e_X_given_T": d.var_e_X_given_T, "identity_residual": d.identity_residual,
               "n_groups": d.n_groups, "status": "OK"}
    rep = information.information_inequality_report(fam, n, lambda o: (o == 0).sum(axis=1) / n, p["theta"])
    summary.update(proportion_var=rep.var_T, proportion_bound=rep.bound, proportion_slack=rep.slack,
                   proportion_unbiased=rep.unbiased)


_EFFICIENCY_FAMILIES = (("binomial", 0.3), ("hardy-weinberg", 0.3), ("linkage", 0.4))


def _appendix2(p, seed, summary):
    for fam_name, theta in _EFFICIENCY_FAMILIES:
        fam = get_family(fam_name)
        for est in me.estimator_library(fam):
            rep = me.tangency_report(est, fam, theta, n=1)
            yield {"family": fam_name, "theta": theta, "estimator": est.name, "delta_variance": rep.delta_variance,
                   "bound": rep.bound, "efficiency": rep.efficiency, "cosine_alignment": rep.cosine_alignment,
                   "euler_residual": rep.euler_residual, "consistency_residual": rep.consistency_residual,
                   "status": "OK"}
    spec = montecarlo.ExperimentSpec(family="hardy-weinberg", theta=(p["theta"],), sample_sizes=(p["n"],),
                                     replications=p["replications"], estimators=("mle",), seed=seed)
    cell = montecarlo.replicate(spec).cell("mle", p["n"])
    target = 1.0 / me.per_observation_information(get_family("hardy-weinberg"), p["theta"])
    summary.update(mc_n=p["n"], mc_n_var_mle=cell.n_variance, mc_target=target,
                   mc_relative_error=abs(cell.n_variance - target) / target, mc_valid=cell.valid)


def _mixture(p, seed, summary):
    fam = normal_mixture()
    truth = np.array([0.5, p["mu1"], 1.0, p["mu2"], 1.0])
    x = fam.sampler(truth, p["n"], np.random.default_rng([seed, 7]))
    floor0 = p["floor_start"]
    if floor0 <= 0:
        # auto: far enough below the nearest neighbour of x[0] that no other point sees the spike
        floor0 = float(np.min(np.abs(np.delete(x, 0) - x[0]))) / 8
    floors = floor0 * 0.5 ** np.arange(p["halvings"] + 1)
    path = estimation.mixture_profile_supremum(x, floors)
    prev = None
    for k, (s, ll) in enumerate(path):
        inc = float("nan") if prev is None else ll - prev
        prev = ll
        yield {"halving": k, "sigma_floor": s, "log_likelihood": ll, "increment": inc,
               "status": _status(k == 0 or inc >= np.log(2) - 0.05)}
    fit = estimation.constrained_mixture_mle(x, p["sigma_min"])
    w, m1, s1, m2, s2 = (float(v) for v in fit.estimate)
    summary.update(fit_converged=fit.converged, fit_message=fit.message, fit_w=w, fit_mu1=m1, fit_sigma1=s1,
                   fit_mu2=m2, fit_sigma2=s2, fit_log_likelihood=fit.log_likelihood,
                   fit_means_error=max(abs(m1 - p["mu1"]), abs(m2 - p["mu2"])))


def _curvature(p, seed, summary):
    fam = get_family("normal")
    rng = np.random.default_rng([seed, 8])
    for k in range(p["points"]):
        mu, sigma = rng.uniform(-3, 3), rng.uniform(0.3, 3)
        g = infogeom.fisher_rao_metric(fam, [mu, sigma]).g
        yield {"point": k, "mu": float(mu), "sigma": float(sigma), "g_mumu": float(g[0, 0]),
               "g_musigma": float(g[0, 1]), "g_sigmasigma": float(g[1, 1]),
               "curvature": infogeom.gaussian_curvature(fam, [mu, sigma]), "status": "OK"}


def _circle(p, seed, summary):
    fam = get_family("normal")
    for r in p["radius"]:
        c = infogeom.geodesic_circle(fam, [p["mu"], p["sigma"]], r, n_rays=p["n_rays"])
        circ = 2 * np.pi * np.sqrt(2) * np.sinh(r / np.sqrt(2))
        area = 4 * np.pi * (np.cosh(r / np.sqrt(2)) - 1)
        rel = abs(c["circumference"] - circ) / circ
        yield {"radius": r, "circumference": c["circumference"], "closed_form_circumference": circ,
               "relative_error": rel, "area": c["area"], "closed_form_area": area,
               "circumference_excess": c["euclid_circumference_excess"], "area_excess": c["euclid_area_excess"],
               "status": _status(rel <= 0.01 and c["euclid_circumference_excess"] > 0)}


def _ancestor(p, seed, summary):
    for sep in p["separation"]:
        mu1, mu2 = -sep / 2, sep / 2
        d = infogeom.ancestor_variance_demo(p["sigma"], mu1, mu2)
        yield {"mu_1": mu1, "mu_2": mu2, "sigma": p["sigma"], "sigma_max": d["sigma_max_on_geodesic"],
               "exceeds": d["exceeds"], "length": d["length"],
               "closed_form_length": infogeom.normal_distance([mu1, p["sigma"]], [mu2, p["sigma"]]), "status": "OK"}


EXPERIMENTS = {e.name: e for e in [
    Experiment("hodges", "Hodges superefficiency: n*Var of the shrinkage estimator vs the mean", "Fig. 1",
               {"alpha": 0.5, "theta": (0.0, 0.1, 0.25, 0.5, 1.0), "n": (100, 1000, 10000), "replications": 500,
                "threshold": 0},
               ("theta", "n", "estimator", "n_variance", "n_mse", "se_n_variance", "bias", "status"), _hodges),
    Experiment("neyman-scott", "Neyman-Scott: the sigma^2 MLE tends to half its true value", "§12",
               {"sigma2": 1.0, "J": (1, 10, 100, 1000, 10000), "replications": 200, "ks_replications": 1000},
               ("J", "sigma2", "mean_sigma2_hat", "target", "variance", "se_mean", "status"), _neyman_scott,
               n_key="J"),
    Experiment("cauchy-consistency", "Cauchy location: non-shrinking sample mean vs efficient MLE and median", "§8",
               {"n": (100, 1000, 10000), "replications": 100, "multistart_grid": 5},
               ("n", "iqr_mean", "var_mean", "n_var_mle", "se_n_var_mle", "n_var_median", "se_n_var_median",
                "failures_mle", "status"), _cauchy),
    Experiment("efficient-correlation", "Correlation of two efficient estimates (MLE, minimum chi-square)", "§6",
               {"family": "hardy-weinberg", "theta": 0.3, "n": (100, 1000, 10000), "replications": 400},
               ("n", "correlation", "se", "failures_mle", "failures_min_chisquare", "status"),
               _efficient_correlation),
    Experiment("sufficiency-demo", "Sufficient mean vs median: sigma_T = rho * sigma_S", "§5",
               {"n": 1000, "replications": 2000},
               ("n", "sigma_T", "sigma_S", "rho", "rho_target", "residual", "relative_residual", "status"),
               _sufficiency),
    Experiment("anova-decomposition", "Exact law-of-total-variance split of the binomial score", "§7",
               {"n": 12, "theta": 0.3},
               ("statistic", "var_X", "e_var_X_given_T", "var_e_X_given_T", "identity_residual", "n_groups",
                "status"), _anova),
    Experiment("appendix2-efficiency", "Delta variance and tangency of degree-zero multinomial estimators",
               "Appendix 2", {"theta": 0.3, "n": 10000, "replications": 500},
               ("family", "theta", "estimator", "delta_variance", "bound", "efficiency", "cosine_alignment",
                "euler_residual", "consistency_residual", "status"), _appendix2),
    Experiment("mixture-explosion", "Unbounded mixture likelihood along a collapsing component", "§12",
               {"n": 500, "mu1": -5.0, "mu2": 5.0, "halvings": 10, "floor_start": 0.0, "sigma_min": 0.05},
               ("halving", "sigma_floor", "log_likelihood", "increment", "status"), _mixture),
    Experiment("infogeom-curvature", "Gaussian curvature of the normal family under the Fisher-Rao metric",
               "Appendix 3", {"points": 10},
               ("point", "mu", "sigma", "g_mumu", "g_musigma", "g_sigmasigma", "curvature", "status"), _curvature,
               n_key=None),
    Experiment("geodesic-circle", "Geodesic circles in the normal family vs the plane", "Appendix 3",
               {"radius": (0.25, 0.5, 1.0), "mu": 0.0, "sigma": 1.0, "n_rays": 64},
               ("radius", "circumference", "closed_form_circumference", "relative_error", "area", "closed_form_area",
                "circumference_excess", "area_excess", "status"), _circle, n_key=None),
    Experiment("ancestor-variance", "Largest sigma on the geodesic between two equal-variance normals",
               "Appendix 3", {"sigma": 1.0, "separation": (0.5, 1.0, 2.0, 4.0, 8.0)},
               ("mu_1", "mu_2", "sigma", "sigma_max", "exceeds", "length", "closed_form_length", "status"),
               _ancestor, n_key=None),
]}


def list_experiments():
    """``(name, description, anchor)`` for every registered experiment."""
    return [(e.name, e.description, e.anchor) for e in EXPERIMENTS.values()]


def get_experiment(name):
    if name not in EXPERIMENTS:
        raise KeyError(name)
    return EXPERIMENTS[name]
