import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ivchoice.cli import main
from ivchoice.sim import TrialConfig, TrialSample, simulate_trial

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TRIAL = {
    "mode": "trial-analysis",
    "seed": 3,
    "trial": {"n": 2000},
    "gibbs": {"n_draws": 500, "burn_in": 100},
    "rectangle": {"m_a0": [0.5, 0.7], "m_n1": [0.3, 0.5]},
}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return path


def run_cli(*argv):
    return main([str(a) for a in argv])


# --- validate ----------------------------------------------------------------

@pytest.mark.parametrize("name", ["production-demo", "trial-analysis", "full-pipeline"])
def test_shipped_configs_validate(name, capsys):
    assert run_cli("validate", CONFIGS / f"{name}.json") == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_missing_rectangle_names_the_field(tmp_path, capsys):
    cfg = {k: v for k, v in TRIAL.items() if k != "rectangle"}
    assert run_cli("validate", write_config(tmp_path, cfg)) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: ConfigError:") and "config.rectangle" in err


def test_out_of_simplex_shares(tmp_path, capsys):
    cfg = dict(TRIAL, trial={"shares": {"pi_a": 0.5, "pi_n": 0.4, "pi_c": 0.3}})
    assert run_cli("validate", write_config(tmp_path, cfg)) == 2
    assert "config.trial" in capsys.readouterr().err


def test_beta1_out_of_range(tmp_path, capsys):
    cfg = {"mode": "production-demo", "production": {"beta1": 1.5}}
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 2
    assert "config.production" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_schema_violation_reports_path(tmp_path, capsys):
    cfg = dict(TRIAL, gibbs={"n_draws": "many"})
    assert run_cli("validate", write_config(tmp_path, cfg)) == 2
    assert "config.gibbs.n_draws" in capsys.readouterr().err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = write_config(tmp_path, '{\n  "mode": "trial-analysis",\n  "seed": ,\n}')
    assert run_cli("validate", path) == 2
    assert f"{path}:3:" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path, capsys):
    assert run_cli("validate", tmp_path / "nope.json") == 4
    assert capsys.readouterr().err.startswith("error: FileNotFoundError:")


def test_rectangle_outside_outcome_range(tmp_path, capsys):
    cfg = dict(TRIAL, rectangle={"m_a0": [0.5, 1.5], "m_n1": [0.3, 0.5]})
    assert run_cli("validate", write_config(tmp_path, cfg)) == 2
    assert "config.rectangle" in capsys.readouterr().err


# --- run -------------------------------------------------------------------

def test_weak_instrument_exits_3(tmp_path, capsys):
    shares = {"pi_a": 0.5, "pi_n": 0.495, "pi_c": 0.005}
    cfg = dict(TRIAL, trial={"shares": shares, "n": 10 ** 5})
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 3
    assert capsys.readouterr().err.startswith("error: WeakInstrument:")


def test_monotonicity_violation_exits_3(tmp_path, capsys):
    # no compliers: sampling noise alone pushes the estimated share below -0.01
    cfg = dict(TRIAL, trial={"shares": {"pi_a": 0.5, "pi_n": 0.5, "pi_c": 0.0}, "n": 2000})
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 3
    assert capsys.readouterr().err.startswith("error: MonotonicityViolation:")


def test_production_demo(tmp_path):
    assert run_cli("run", CONFIGS / "production-demo.json", "--out", tmp_path) == 0
    prod = json.loads((tmp_path / "report.json").read_text())["production"]
    assert prod["ols_plim_oracle"] == 0.75
    assert prod["ols_slope"] == pytest.approx(0.75, abs=0.02)
    assert prod["tsls_slope"] == pytest.approx(0.5, abs=0.02)
    assert set(prod["replications"]) == {"1000", "10000"}
    assert (tmp_path / "sample.csv").read_text().startswith("y_obs,x_obs,v,log_w\n")


def test_trial_analysis_large_sample(tmp_path):
    assert run_cli("run", CONFIGS / "trial-analysis.json", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    trial = report["trial"]
    assert trial["n"] == 10 ** 5
    assert trial["decision"]["rules"]["gamma_minimax"]["action"] == "TreatAll"
    assert trial["wald_late"] == pytest.approx(0.2, abs=0.03)
    assert report["artifacts"] == ["draws.csv", "sample.csv", "sensitivity.csv"]
    assert "generated_at" in report
    rows = (tmp_path / "sensitivity.csv").read_text().splitlines()
    assert rows[0] == "m_a0,m_n1,D,action" and len(rows) == 1 + 121


def test_full_pipeline_writes_both_samples(tmp_path):
    assert run_cli("run", CONFIGS / "full-pipeline.json", "--out", tmp_path, "--deterministic") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert {"production", "trial"} <= set(report)
    assert "generated_at" not in report
    assert (tmp_path / "production_sample.csv").exists() and (tmp_path / "sample.csv").exists()


def test_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path, TRIAL)
    run_cli("run", path, "--out", tmp_path / "a", "--deterministic")
    run_cli("run", path, "--out", tmp_path / "b", "--deterministic", "--seed", 4)
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert (a["seed"], b["seed"]) == (3, 4)
    assert a["trial"]["estimates"] != b["trial"]["estimates"]


def test_continuous_data_file_uses_bootstrap(tmp_path):
    t = simulate_trial(TrialConfig(n=3000), 1)
    y = np.clip(4.0 * t.y + np.random.default_rng(2).random(len(t)), 0.0, 5.0)
    TrialSample(t.z, t.d, y).to_csv(tmp_path / "data.csv")
    cfg = {
        "mode": "trial-analysis",
        "data": "data.csv",
        "outcome_range": [0.0, 5.0],
        "bootstrap": {"n_boot": 50},
        "rectangle": {"m_a0": [1.0, 4.0], "m_n1": [1.0, 4.0]},
    }
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["trial"]["posterior"]["provenance"]["method"] == "bootstrap"
    assert report["artifacts"] == ["draws.csv", "sensitivity.csv"]


def test_continuous_data_needs_explicit_range(tmp_path, capsys):
    t = simulate_trial(TrialConfig(n=500), 1)
    TrialSample(t.z, t.d, 0.5 * t.y + 0.25).to_csv(tmp_path / "data.csv")
    cfg = dict(TRIAL, data="data.csv")
    del cfg["trial"]
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 2
    assert "config.outcome_range" in capsys.readouterr().err
    cfg["outcome_range"] = [0.3, 1.0]
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 2
    assert "outside" in capsys.readouterr().err


def test_too_few_draws_for_a_report(tmp_path, capsys):
    cfg = dict(TRIAL, gibbs={"n_draws": 50})
    assert run_cli("validate", write_config(tmp_path, cfg)) == 2
    assert "config.gibbs.n_draws" in capsys.readouterr().err


def test_binary_data_file_is_not_rewritten(tmp_path):
    simulate_trial(TrialConfig(n=1000), 5).to_csv(tmp_path / "data.csv")
    cfg = dict(TRIAL, data="data.csv")
    del cfg["trial"]
    assert run_cli("run", write_config(tmp_path, cfg), "--out", tmp_path / "o") == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["trial"]["posterior"]["provenance"]["method"] == "gibbs"
    assert not (tmp_path / "o" / "sample.csv").exists()


# --- simulate / decide -------------------------------------------------------

def test_simulate_writes_sample_only(tmp_path, capsys):
    assert run_cli("simulate", write_config(tmp_path, TRIAL), "--out", tmp_path / "s") == 0
    assert sorted(p.name for p in (tmp_path / "s").iterdir()) == ["sample.csv"]
    again = tmp_path / "s2"
    run_cli("simulate", tmp_path / "cfg.json", "--out", again)
    assert (again / "sample.csv").read_bytes() == (tmp_path / "s" / "sample.csv").read_bytes()


def test_simulated_sample_matches_run(tmp_path):
    path = write_config(tmp_path, TRIAL)
    run_cli("simulate", path, "--out", tmp_path / "s")
    run_cli("run", path, "--out", tmp_path / "r")
    assert (tmp_path / "s" / "sample.csv").read_bytes() == (tmp_path / "r" / "sample.csv").read_bytes()


def test_decide_from_draws(tmp_path, capsys):
    path = write_config(tmp_path, TRIAL)
    run_cli("run", path, "--out", tmp_path / "r", "--deterministic")
    capsys.readouterr()
    code = run_cli("decide", "--draws", tmp_path / "r" / "draws.csv", "--config", path,
                   "--out", tmp_path / "d")
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split(":")[0] for ln in lines] == [
        "bayes", "minimax_bounds", "minimax_regret_bounds", "gamma_minimax", "gamma_minimax_regret"]
    decision = json.loads((tmp_path / "d" / "decision.json").read_text())
    ran = json.loads((tmp_path / "r" / "report.json").read_text())["trial"]["decision"]
    for name in ("bayes", "gamma_minimax", "gamma_minimax_regret"):
        assert decision["rules"][name] == ran["rules"][name]


def test_decide_rejects_bad_draws(tmp_path, capsys):
    (tmp_path / "draws.csv").write_text("pi_a,pi_n\n0.5,0.5\n")
    code = run_cli("decide", "--draws", tmp_path / "draws.csv",
                   "--config", write_config(tmp_path, TRIAL))
    assert code == 2
    assert "InvalidConfig" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "ivchoice", "validate", str(CONFIGS / "trial-analysis.json")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and proc.stdout.strip() == "ok"
