"""simulate -> estimate -> posterior -> decide, driven by a RunConfig."""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .. import __version__
from ..bayes import bootstrap_draws, gibbs_posterior, posterior_summary
from ..decide import decision_report, moment_bounds, sensitivity_table
from ..estimators import (
    estimates_record,
    identified_means_hat,
    manski_ate_bounds,
    monte_carlo_slopes,
    ols_fit,
    tsls_fit,
    wald_late,
)
from ..sim import (
    TrialSample,
    ols_plim_oracle,
    simulate_production,
    simulate_trial,
    true_params,
)
from .config import ConfigError, RunConfig


def _seeds(seed: int) -> dict:
    children = np.random.SeedSequence(seed).spawn(4)
    return dict(zip(("production", "trial", "replications", "bootstrap"), children))


def production_section(cfg: RunConfig, seeds: dict) -> tuple[dict, object]:
    pc = cfg.production
    sample = simulate_production(pc, seeds["production"])
    ols_plain = ols_fit(sample)
    ols_ctrl = ols_fit(sample, ("v",))
    tsls = tsls_fit(sample, min_first_stage_t=cfg.tolerances.first_stage_t)
    out = {
        "config": asdict(pc),
        "ols_plim_oracle": ols_plim_oracle(pc),
        "ols_slope": ols_plain.slope,
        "tsls_slope": tsls.slope,
        "ols": ols_plain.to_dict(),
        "ols_with_controls": ols_ctrl.to_dict(),
        "tsls": tsls.to_dict(),
    }
    if cfg.replications:
        reps = cfg.replications
        res = monte_carlo_slopes(pc, reps["n_values"], reps["reps"], seeds["replications"])
        out["replications"] = {
            str(n): {
                "reps": reps["reps"],
                "ols_median_abs_error": float(np.median(np.abs(r["ols"] - pc.beta1))),
                "tsls_median_abs_error": float(np.median(np.abs(r["tsls"] - pc.beta1))),
                "ols_mean_slope": float(r["ols"].mean()),
                "tsls_mean_slope": float(r["tsls"].mean()),
            }
            for n, r in res.items()
        }
    return out, sample


def check_outcomes(sample: TrialSample, cfg: RunConfig) -> None:
    """Bounds need a stated outcome range; [0, 1] is implied only for binary data."""
    if not sample.is_binary and not cfg.outcome_range_given:
        raise ConfigError("config.outcome_range: required when outcomes are not binary")
    r = cfg.outcome_range
    if len(sample) and (sample.y.min() < r.y_lo or sample.y.max() > r.y_hi):
        raise ConfigError(
            f"config.outcome_range: observed outcomes span [{sample.y.min()!r}, "
            f"{sample.y.max()!r}], outside [{r.y_lo!r}, {r.y_hi!r}]"
        )


def trial_section(cfg: RunConfig, seeds: dict) -> tuple[dict, dict]:
    tol = cfg.tolerances
    if cfg.data is not None:
        sample = TrialSample.from_csv(cfg.data)
        source = {"data": str(cfg.data)}
        simulated = False
    else:
        sample = simulate_trial(cfg.trial, seeds["trial"])
        source = {"simulated": True}
        simulated = True
    check_outcomes(sample, cfg)
    params = identified_means_hat(
        sample, outcome_range=cfg.outcome_range,
        min_gap=tol.first_stage_gap, monotonicity_tol=tol.monotonicity,
    )
    bounds = manski_ate_bounds(params, cfg.outcome_range)
    out = {
        "source": source,
        "n": len(sample),
        "estimates": estimates_record(params, bounds),
        "wald_late": wald_late(sample, min_gap=tol.first_stage_gap),
    }
    if cfg.trial is not None:
        shares, means = true_params(cfg.trial)
        out["truth"] = {
            "pi_a": shares.pi_a, "pi_n": shares.pi_n, "pi_c": shares.pi_c,
            **{k: getattr(means, k) for k in ("mu_a1", "mu_n0", "mu_c1", "mu_c0", "mu_a0", "mu_n1")},
        }
    if sample.is_binary:
        draws = gibbs_posterior(sample, cfg.prior, cfg.gibbs)
    else:
        draws = bootstrap_draws(
            sample, cfg.n_boot, seeds["bootstrap"], outcome_range=cfg.outcome_range,
            min_gap=tol.first_stage_gap, monotonicity_tol=tol.monotonicity,
        )
    out["posterior"] = {"provenance": draws.provenance, "summary": posterior_summary(draws)}
    out["posterior_moment_bounds"] = moment_bounds(draws, cfg.outcome_range).to_dict()
    report = decision_report(
        draws, cfg.rectangle, cfg.welfare, cfg.outcome_range,
        bounds=bounds, bayes_point=cfg.bayes_point, tie=cfg.tie,
    )
    sens = sensitivity_table(draws, cfg.rectangle, cfg.welfare, cfg.sensitivity_grid, cfg.tie)
    out["decision"] = report.to_dict()
    out["sensitivity"] = sens.to_dict()
    artifacts = {"draws": draws, "sensitivity": sens}
    if simulated:
        artifacts["sample"] = sample
    return out, artifacts


def header(cfg: RunConfig, deterministic: bool) -> dict:
    out = {"tool": "ivchoice", "version": __version__, "mode": cfg.mode, "seed": cfg.seed}
    if not deterministic:
        out["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return out


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def run(cfg: RunConfig, deterministic: bool = False) -> dict:
    """Execute the configured mode and write its artifacts to ``cfg.out_dir``."""
    seeds = _seeds(cfg.seed)
    report = header(cfg, deterministic)
    files = {}
    if cfg.needs_production:
        report["production"], prod_sample = production_section(cfg, seeds)
        if cfg.write_sample:
            files["production_sample.csv" if cfg.needs_trial else "sample.csv"] = prod_sample
    if cfg.needs_trial:
        report["trial"], artifacts = trial_section(cfg, seeds)
        files["draws.csv"] = artifacts["draws"]
        files["sensitivity.csv"] = artifacts["sensitivity"]
        if cfg.write_sample and "sample" in artifacts:
            files["sample.csv"] = artifacts["sample"]

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in cfg.formats:
        for name, obj in files.items():
            obj.to_csv(out_dir / name)
            written.append(name)
    if "json" in cfg.formats:
        report["artifacts"] = sorted(written)
        dump_json(report, out_dir / "report.json")
    return report


def simulate_only(cfg: RunConfig) -> list:
    seeds = _seeds(cfg.seed)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if cfg.needs_production:
        name = "production_sample.csv" if cfg.needs_trial else "sample.csv"
        simulate_production(cfg.production, seeds["production"]).to_csv(out_dir / name)
        written.append(out_dir / name)
    if cfg.needs_trial and cfg.trial is not None:
        simulate_trial(cfg.trial, seeds["trial"]).to_csv(out_dir / "sample.csv")
        written.append(out_dir / "sample.csv")
    return written
