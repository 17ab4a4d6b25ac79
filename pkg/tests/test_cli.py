import json

import pandas as pd
import pytest
from click.testing import CliRunner

from core.reporting import read_raw_scores
from main import cli
from tests.conftest import write_config


TINY_AUDIT = """
[experiment]
name = "tiny"
seed = 3
output_dir = '{out}'

[audit]
statistic = "inter_group_gap"
sample_size = 600
n_control_runs = 10
n_shifted_runs = 4
n_q = 10

[learner]
algorithm = "dt"
max_depth = 6

[normative]
kind = "gaussian_gds"
tau = 2.0

[alternative]
kind = "underrep"
tau = 2.0
beta = 1.0
"""


@pytest.fixture
def runner():
    return CliRunner()


def _config(tmp_path, extra=""):
    out = tmp_path / "out"
    return write_config(tmp_path / "audit.toml", TINY_AUDIT.format(out=out.as_posix()) + extra), out


def test_missing_config_exits_with_config_error(runner, tmp_path):
    missing = tmp_path / "nope.toml"
    result = runner.invoke(cli, ["audit", str(missing)])

    assert result.exit_code == 2
    assert "nope.toml" in result.output


def test_invalid_config_exits_with_config_error(runner, tmp_path):
    path = write_config(tmp_path / "bad.toml", "[audit]\nn_control_runs = 3\n")
    result = runner.invoke(cli, ["validate-config", str(path)])

    assert result.exit_code == 2
    assert "n_control_runs" in result.output


def test_validate_config_accepts_a_good_file(runner, tmp_path):
    path, _ = _config(tmp_path)
    result = runner.invoke(cli, ["validate-config", str(path)])

    assert result.exit_code == 0, result.output
    assert "ok" in result.output


def test_audit_writes_reports(runner, tmp_path):
    path, out = _config(tmp_path)
    result = runner.invoke(cli, ["audit", str(path)])

    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["schema_version"] == 1
    assert len(report["control_scores"]) == 10
    assert len(report["shifted_scores"]) == 4
    assert report["naive_baseline"]["scorer"] == "naive"

    scores = pd.read_csv(out / "scores.csv")
    assert list(scores.columns) == ["setting", "run", "score"]
    assert len(scores) == 14
    assert (out / "summary.txt").exists()
    assert (out / "config.resolved.json").exists()
    assert (out / "logs" / "audit.log").exists()


def test_audit_is_byte_identical_across_invocations(runner, tmp_path):
    path, out = _config(tmp_path)
    assert runner.invoke(cli, ["audit", str(path)]).exit_code == 0
    first = (out / "report.json").read_bytes()
    assert runner.invoke(cli, ["audit", str(path), "--workers", "2"]).exit_code == 0

    assert (out / "report.json").read_bytes() == first


def test_seed_environment_override(runner, tmp_path, monkeypatch):
    path, out = _config(tmp_path)
    monkeypatch.setenv("SHIFT_AUDIT_SEED", "99")
    assert runner.invoke(cli, ["audit", str(path)]).exit_code == 0

    assert json.loads((out / "report.json").read_text(encoding="utf-8"))["seed"] == 99


def test_runtime_failure_exits_with_one(runner, tmp_path):
    path, _ = _config(tmp_path, "")
    path.write_text(path.read_text(encoding="utf-8").replace("n_q = 10", "n_q = 500"), encoding="utf-8")
    result = runner.invoke(cli, ["audit", str(path)])

    assert result.exit_code == 1


def test_sweep_isolates_failing_cells(runner, tmp_path):
    path, out = _config(tmp_path, '\n[sweep]\naxis = "learner"\ngrid = ["dt", "svm", "gnb"]\n')
    result = runner.invoke(cli, ["sweep", str(path)])

    assert result.exit_code == 0, result.output
    assert "1 sweep cell(s) failed" in result.output
    summary = pd.read_csv(out / "summary.csv")
    assert summary["status"].tolist() == ["ok", "error", "ok"]
    assert summary["auc_roc"].notna().tolist() == [True, False, True]
    rows = json.loads((out / "summary.json").read_text(encoding="utf-8"))["rows"]
    assert [r["value"] for r in rows] == ["dt", "svm", "gnb"]
    raw = read_raw_scores(out / "raw_scores.jsonl")
    assert len(raw) == 2 * (10 + 4)
    assert {r["value"] for r in raw} == {"dt", "gnb"}
    assert [r["setting"] for r in raw if r["value"] == "dt"] == ["control"] * 10 + ["shifted"] * 4


def test_beta_sweep_rows(runner, tmp_path):
    path, out = _config(tmp_path, '\n[sweep]\naxis = "beta"\ngrid = [1.0, 0.75, 0.5]\n')
    assert runner.invoke(cli, ["sweep", str(path)]).exit_code == 0

    assert len(pd.read_csv(out / "summary.csv")) == 3


def test_theory_single_point_grid(runner, tmp_path):
    output = tmp_path / "curve.csv"
    result = runner.invoke(cli, [
        "theory", "--tau-grid", "2.0", "--trials", "20000", "--resamples", "5", "--output", str(output),
    ])

    assert result.exit_code == 0, result.output
    curve = pd.read_csv(output)
    assert len(curve) == 1
    assert list(curve.columns) == ["tau", "ft_d0", "ft_d1", "ft_d", "fs_d", "fs_d0", "fs_d1", "mc_stderr"]
    assert "max |simulated - closed form|" in result.output


def test_theory_rejects_bad_flags(runner):
    assert runner.invoke(cli, ["theory", "--epsilon", "0"]).exit_code == 2
    assert runner.invoke(cli, ["theory", "--pi-tr", "0.5", "--pi-te", "0.6"]).exit_code == 2


def test_config_reference_lists_sections(runner):
    result = runner.invoke(cli, ["config-reference"])

    assert result.exit_code == 0
    for section in ("[experiment]", "[audit]", "[learner]", "[normative]", "[sweep]", "[theory]"):
        assert section in result.output
    assert "SHIFT_AUDIT_SEED" in result.output
