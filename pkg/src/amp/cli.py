"""Command-line experiment harness.

``amp spiked|bbp|lasso|mest|logistic|se --config <file> [--seed N] [--out DIR]``
runs seeded Monte Carlo replicates, compares empirical metrics against their
deterministic state-evolution predictions, and writes ``report.json`` plus
``metrics.csv``. Reruns with the same config and seed are byte-identical.

Exit codes: 0 pass, 2 declared-tolerance failure, 3 solver/precondition error,
4 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .denoisers import bayes_policy, soft_threshold_policy
from .ensembles import RngStream, leading_eigenpair, sample_goe
from .glm import lasso_amp, logistic_gamp, mest_amp, sample_glm
from .losses import Loss
from .priors import Prior, gauss_mixture_prior, rademacher_prior, three_point_prior
from .se import (
    Link,
    lasso_calibration,
    logistic_fixed_point,
    mest_fixed_point,
    mmse,
    rho_star,
)
from .spiked import InitSpec, confidence_sets, run_spiked, sample_spiked

SCHEMA_VERSION = 1

_FLOAT_FMT = "%.17g"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description: kind, parameters, seed, output dir."""

    experiment: str
    params: dict
    seed: int
    out_dir: str | None


@dataclass
class ExperimentReport:
    """Aggregated rows plus a summary with fixed points and pass/fail checks."""

    experiment: str
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.passed,
        }


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def write_report(report: ExperimentReport, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_fmt(v) for v in row])


def _prior_from(params: dict, key: str, default: Prior) -> Prior:
    if key in params:
        return Prior.from_json(params[key])
    return default


def _workers(params: dict) -> int:
    if "workers" in params:
        return int(params["workers"])
    return int(os.environ.get("AMP_WORKERS", "1"))


def _map_replicates(fn, args_list, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, args_list))
    return [fn(a) for a in args_list]


# ---------------------------------------------------------------------------
# Replicate workers (top-level for process-pool pickling)
# ---------------------------------------------------------------------------


def _spiked_rep(args):
    params, seed, rep = args
    prior = _prior_from(params, "prior", rademacher_prior())
    lam = float(params["lam"])
    n = int(params["n"])
    K = int(params.get("K", 10))
    rng = RngStream(seed=seed, stream_id=rep)
    inst = sample_spiked(prior, lam, n, rng)
    init_kind = params.get("init", "spectral")
    if init_kind == "spectral":
        init = InitSpec(kind="spectral")
    elif init_kind == "constant":
        init = InitSpec(kind="constant", c=float(params.get("init_c", 1.0)))
    else:
        init = InitSpec(kind="oracle", mu0=float(params["init_mu0"]),
                        sigma0=float(params["init_sigma0"]))
    policy_kind = params.get("policy", "bayes")
    policy = (
        bayes_policy(prior) if policy_kind == "bayes" else soft_threshold_policy()
    )
    run = run_spiked(inst, init, policy, K, rng=rng,
                     eig_max_iter=params.get("eig_max_iter"))
    out = {
        "amse": run.metrics["mse_sign_min"],
        "corr": run.metrics["corr_abs"],
    }
    if "alpha" in params:
        alpha = float(params["alpha"])
        k_conf = int(params.get("conf_k", K))
        conf = confidence_sets(run, k_conf, alpha)
        out["coverage"] = conf.coverage(inst.v)
    return out


def _bbp_rep(args):
    params, seed, rep, lam = args
    n = int(params["n"])
    prior = _prior_from(params, "prior", rademacher_prior())
    rng = RngStream(seed=seed, stream_id=rep)
    inst = sample_spiked(prior, lam, n, rng)
    eig = leading_eigenpair(inst.A, max_iter=int(params.get("eig_max_iter", 0)) or None)
    corr = abs(float(eig.vector @ inst.v)) / (
        np.linalg.norm(eig.vector) * np.linalg.norm(inst.v)
    )
    return {"lambda1": eig.value, "corr": corr}


def _lasso_rep(args):
    params, seed, rep, fp_values = args
    n, p = int(params["n"]), int(params["p"])
    lam = float(params["lam"])
    sigma = float(params["sigma"])
    K = int(params.get("K", 50))
    prior = _prior_from(params, "prior", three_point_prior(0.1, np.sqrt(10.0)))
    noise = gauss_mixture_prior([0.0], [sigma], [1.0])
    rng = RngStream(seed=seed, stream_id=rep)
    inst = sample_glm(prior, Link(kind="linear", noise=noise), n, p, rng)
    fp = lasso_calibration(lam, n / p, sigma, prior)
    run = lasso_amp(inst, lam, prior, sigma, K, stationary=True, rng=rng,
                    calibration=fp)
    bhat = run.iterates["beta_hat"][-1]
    risk = float(np.sum((bhat - inst.beta) ** 2) / p)
    active = float(np.count_nonzero(bhat) / p)
    return {"risk": risk, "active": active}


def _mest_rep(args):
    params, seed, rep = args
    n, p = int(params["n"]), int(params["p"])
    K = int(params.get("K", 30))
    loss = Loss(kind=params.get("loss", "square"),
                b=params.get("loss_b"), tau=params.get("loss_tau"))
    sigma = float(params.get("sigma", 1.0))
    noise = _prior_from(params, "noise", gauss_mixture_prior([0.0], [sigma], [1.0]))
    prior = _prior_from(params, "prior", gauss_mixture_prior([0.0], [1.0], [1.0]))
    rng = RngStream(seed=seed, stream_id=rep)
    inst = sample_glm(prior, Link(kind="linear", noise=noise), n, p, rng)
    fp = mest_fixed_point(loss, noise, n / p)
    run = mest_amp(inst, loss, noise, K, rng=rng, fixed_point=fp)
    bhat = run.iterates["beta_hat"][-1]
    return {"risk": float(np.sum((bhat - inst.beta) ** 2) / p)}


def _logistic_rep(args):
    params, seed, rep, fp_values = args
    n, p = int(params["n"]), int(params["p"])
    K = int(params.get("K", 30))
    delta = n / p
    kappa2 = float(params["kappa2"])
    prior = gauss_mixture_prior([0.0], [np.sqrt(kappa2 * delta)], [1.0])
    rng = RngStream(seed=seed, stream_id=rep)
    inst = sample_glm(prior, Link(kind="logistic"), n, p, rng)
    from .se import FixedPoint

    fp = FixedPoint(flavor="logistic", values=fp_values, residuals={},
                    iterations=0, converged=True)
    run = logistic_gamp(inst, fp, K, rng=rng)
    bhat = run.iterates["beta_hat"][-1]
    beta = inst.beta
    slope = float(bhat @ beta / (beta @ beta))
    var = float(np.sum((bhat - fp_values["mu_tilde_star"] * beta) ** 2) / p)
    return {"bias_slope": slope, "centered_var": var}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_spiked(config: ExperimentConfig) -> ExperimentReport:
    params = config.params
    prior = _prior_from(params, "prior", rademacher_prior())
    lam = float(params["lam"])
    K = int(params.get("K", 10))
    reps = int(params.get("replicates", 10))
    # Spectral initialization has effective SNR lam^2 - 1 above the transition.
    rho = float(params.get("rho0_se", lam**2 - 1.0 if lam > 1 else 0.0))
    fp = rho_star(prior, lam, rho0=rho)
    rho_path = [rho]
    for _ in range(K):
        rho = lam**2 * (1.0 - mmse(prior, rho))
        rho_path.append(rho)
    results = _map_replicates(
        _spiked_rep, [(params, config.seed, r) for r in range(reps)], _workers(params)
    )
    amse = np.array([r["amse"] for r in results])
    corr = np.array([r["corr"] for r in results])
    report = ExperimentReport(
        experiment="spiked",
        columns=["k", "amse_emp_mean", "amse_emp_sd", "amse_se",
                 "corr_emp_mean", "corr_emp_sd", "corr_se"],
    )
    tol_amse = float(params.get("tol_amse", 0.03))
    tol_corr = float(params.get("tol_corr", 0.03))
    ok_amse = ok_corr = True
    for k in range(K):
        amse_se = 1.0 - rho_path[k + 1] / lam**2
        corr_se = np.sqrt(rho_path[k + 1]) / lam
        am, cm = float(amse[:, k].mean()), float(corr[:, k].mean())
        report.rows.append([
            k, am, float(amse[:, k].std()), amse_se,
            cm, float(corr[:, k].std()), corr_se,
        ])
        ok_amse &= abs(am - amse_se) <= tol_amse
        ok_corr &= abs(cm - corr_se) <= tol_corr
    report.summary = {"lam": lam, "rho_star": fp.values["rho_star"],
                      "replicates": reps, "K": K}
    if params.get("check", True):
        report.checks = {"amse_within_tol": bool(ok_amse),
                         "corr_within_tol": bool(ok_corr)}
    if "alpha" in params:
        cov = float(np.mean([r["coverage"] for r in results]))
        report.summary["mean_coverage"] = cov
        report.summary["alpha"] = float(params["alpha"])
    return report


def cmd_bbp(config: ExperimentConfig) -> ExperimentReport:
    params = config.params
    lams = [float(x) for x in params.get("lam_grid", [params.get("lam", 1.7)])]
    reps = int(params.get("replicates", 10))
    report = ExperimentReport(
        experiment="bbp",
        columns=["lam", "lambda1_emp_mean", "lambda1_se",
                 "corr_emp_mean", "corr_se"],
    )
    for lam in lams:
        results = _map_replicates(
            _bbp_rep,
            [(params, config.seed, r, lam) for r in range(reps)],
            _workers(params),
        )
        l1 = float(np.mean([r["lambda1"] for r in results]))
        cr = float(np.mean([r["corr"] for r in results]))
        l1_pred = lam + 1.0 / lam if lam > 1 else 2.0
        cr_pred = float(np.sqrt(1.0 - lam**-2)) if lam > 1 else 0.0
        report.rows.append([lam, l1, l1_pred, cr, cr_pred])
    report.summary = {"replicates": reps, "lams": lams}
    return report


def cmd_lasso(config: ExperimentConfig) -> ExperimentReport:
    params = config.params
    n, p = int(params["n"]), int(params["p"])
    lam = float(params["lam"])
    sigma = float(params["sigma"])
    reps = int(params.get("replicates", 10))
    prior = _prior_from(params, "prior", three_point_prior(0.1, np.sqrt(10.0)))
    delta = n / p
    fp = lasso_calibration(lam, delta, sigma, prior)
    results = _map_replicates(
        _lasso_rep,
        [(params, config.seed, r, fp.values) for r in range(reps)],
        _workers(params),
    )
    risk = float(np.mean([r["risk"] for r in results]))
    active = float(np.mean([r["active"] for r in results]))
    risk_pred = fp.values["amse"]
    active_pred = delta * fp.values["b_tilde_star"]
    report = ExperimentReport(
        experiment="lasso",
        columns=["metric", "empirical", "predicted"],
        rows=[
            ["risk", risk, risk_pred],
            ["active_fraction", active, active_pred],
        ],
        summary={"fixed_point": fp.to_json(), "replicates": reps},
    )
    if params.get("check", True):
        report.checks = {
            "risk_within_15pct": bool(abs(risk - risk_pred) <= 0.15 * risk_pred),
            "active_within_0.02": bool(abs(active - active_pred) <= 0.02),
            "calibration_residuals": bool(
                max(abs(v) for v in fp.residuals.values()) < 1e-9
            ),
        }
    return report


def cmd_mest(config: ExperimentConfig) -> ExperimentReport:
    params = config.params
    n, p = int(params["n"]), int(params["p"])
    reps = int(params.get("replicates", 10))
    loss = Loss(kind=params.get("loss", "square"),
                b=params.get("loss_b"), tau=params.get("loss_tau"))
    sigma = float(params.get("sigma", 1.0))
    noise = _prior_from(params, "noise", gauss_mixture_prior([0.0], [sigma], [1.0]))
    delta = n / p
    fp = mest_fixed_point(loss, noise, delta)
    results = _map_replicates(
        _mest_rep, [(params, config.seed, r) for r in range(reps)], _workers(params)
    )
    risk = float(np.mean([r["risk"] for r in results]))
    risk_pred = fp.values["amse"]
    report = ExperimentReport(
        experiment="mest",
        columns=["metric", "empirical", "predicted"],
        rows=[["risk", risk, risk_pred]],
        summary={"fixed_point": fp.to_json(), "replicates": reps},
    )
    if loss.kind == "square":
        closed = sigma**2 / (delta - 1.0)
        report.rows.append(["tau_star_sq_closed_form", fp.values["tau_star"] ** 2, closed])
    if params.get("check", True):
        tol = float(params.get("tol_risk", 0.10))
        report.checks = {"risk_within_tol": bool(abs(risk - risk_pred) <= tol * risk_pred)}
    return report


def cmd_logistic(config: ExperimentConfig) -> ExperimentReport:
    params = config.params
    n, p = int(params["n"]), int(params["p"])
    delta = n / p
    kappa2 = float(params["kappa2"])
    reps = int(params.get("replicates", 10))
    try:
        fp = logistic_fixed_point(kappa2, delta)
    except RuntimeError as exc:
        return ExperimentReport(
            experiment="logistic",
            columns=["metric", "empirical", "predicted"],
            rows=[["fixed_point", "not found", "n/a"]],
            summary={"error": str(exc), "kappa2": kappa2, "delta": delta},
            checks={"fixed_point_found": False},
        )
    results = _map_replicates(
        _logistic_rep,
        [(params, config.seed, r, fp.values) for r in range(reps)],
        _workers(params),
    )
    slope = float(np.mean([r["bias_slope"] for r in results]))
    var = float(np.mean([r["centered_var"] for r in results]))
    mu_t, sig_t = fp.values["mu_tilde_star"], fp.values["sigma_tilde_star"]
    report = ExperimentReport(
        experiment="logistic",
        columns=["metric", "empirical", "predicted"],
        rows=[
            ["bias_slope", slope, mu_t],
            ["centered_variance", var, sig_t**2],
        ],
        summary={"fixed_point": fp.to_json(), "replicates": reps},
    )
    if params.get("check", True):
        report.checks = {
            "slope_within_10pct": bool(abs(slope - mu_t) <= 0.10 * mu_t),
            "variance_within_10pct": bool(abs(var - sig_t**2) <= 0.10 * sig_t**2),
            "mu_tilde_gt_1": bool(mu_t > 1.0),
        }
    return report


def cmd_se(config: ExperimentConfig) -> ExperimentReport:
    params = config.params
    prior = _prior_from(params, "prior", rademacher_prior())
    lam = float(params["lam"])
    rho0 = float(params.get("rho0", 0.0))
    K = int(params.get("K", 20))
    grid_n = int(params.get("grid_points", 50))
    rho_max = float(params.get("rho_max", lam**2 * 1.1))
    report = ExperimentReport(
        experiment="se",
        columns=["kind", "index", "rho", "map_value"],
    )
    grid = np.linspace(0.0, rho_max, grid_n)
    for i, r in enumerate(grid):
        report.rows.append(["map", i, float(r), lam**2 * (1.0 - mmse(prior, float(r)))])
    rho = rho0
    report.rows.append(["trajectory", 0, rho, None])
    for k in range(1, K + 1):
        rho = lam**2 * (1.0 - mmse(prior, rho))
        report.rows.append(["trajectory", k, rho, None])
    report.summary = {"lam": lam, "rho0": rho0, "rho_final": rho,
                      "map_intercept": lam**2 * prior.m1**2}
    return report


_COMMANDS = {
    "spiked": cmd_spiked,
    "bbp": cmd_bbp,
    "lasso": cmd_lasso,
    "mest": cmd_mest,
    "logistic": cmd_logistic,
    "se": cmd_se,
}


def load_config(path: str, experiment: str, seed_override: int | None,
                out_override: str | None) -> ExperimentConfig:
    try:
        if path.endswith(".toml"):
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            with open(path) as fh:
                raw = json.load(fh)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table/object")
    seed = seed_override if seed_override is not None else raw.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    out_dir = out_override or raw.get("out")
    params = dict(raw)
    params.pop("seed", None)
    params.pop("out", None)
    return ExperimentConfig(experiment=experiment, params=params,
                            seed=int(seed), out_dir=out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="amp", description="AMP experiment harness"
    )
    parser.add_argument("experiment", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.experiment, args.seed, args.out)
        report = _COMMANDS[args.experiment](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except (RuntimeError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    if config.out_dir:
        write_report(report, config.out_dir)
    for name, ok in report.checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    if "error" in report.summary:
        print(f"solver error: {report.summary['error']}", file=sys.stderr)
        return 3
    if not report.passed:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
