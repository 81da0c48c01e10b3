import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from pohozaev.cli import cli
from pohozaev.utils.exceptions import ExitCode

COARSE_SOLVE = [
    "solve", "--model", "power", "--lambda", "1",
    "--panels", "200", "--rstar", "12",
    "--guess-amplitude", "4", "--guess-width", "0.3",
    "--eps", "1e-2", "--alpha-min", "1e-6", "--sor-tol", "1e-8",
]


@pytest.fixture
def runner():
    return CliRunner()


def test_infeasible_family_exit_code(runner, tmp_path):
    out = tmp_path / "infeasible"
    result = runner.invoke(cli, ["solve", "--model", "asym", "--lambda", "5", "--s", "0.5", "--out", str(out)])
    assert result.exit_code == ExitCode.INFEASIBLE
    assert "λs ≥ 1" in result.output
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["exit_status"] == ExitCode.INFEASIBLE
    assert manifest["command"] == "solve"


def test_infeasible_guess_exit_code(runner, tmp_path):
    result = runner.invoke(cli, ["solve", "--guess-amplitude", "0.01", "--out", str(tmp_path)])
    assert result.exit_code == ExitCode.INFEASIBLE
    assert "INFEASIBLE_GUESS" in result.output


def test_invalid_solver_option(runner, tmp_path):
    result = runner.invoke(cli, ["solve", "--sor-omega", "2.5", "--out", str(tmp_path)])
    assert result.exit_code == ExitCode.INFEASIBLE
    assert "INVALID_PARAMETER" in result.output


def test_coarse_solve_and_replay(runner, tmp_path):
    out = tmp_path / "solve"
    result = runner.invoke(cli, COARSE_SOLVE + ["--out", str(out)])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    for name in ("profile.csv", "trace.csv", "result.json", "manifest.json"):
        assert (out / name).exists()
    summary = json.loads((out / "result.json").read_text(encoding="utf-8"))
    assert summary["status"] == "converged"
    assert summary["u0"] > 0

    replayed = tmp_path / "replay"
    result = runner.invoke(cli, ["replay", str(out), "--out", str(replayed)])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    again = json.loads((replayed / "result.json").read_text(encoding="utf-8"))
    assert again["u0"] == summary["u0"]
    assert again["action"] == summary["action"]


def test_sweep_marks_infeasible_cells(runner, tmp_path):
    result = runner.invoke(cli, [
        "sweep", "--model", "asym", "--lambdas", "5", "--s-values", "0.5,1.0",
        "--parallel", "1", "--out", str(tmp_path),
    ])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    lines = (tmp_path / "grid.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1:] == [
        "0.50000,5.00000,--,--,--,infeasible",
        "1.00000,5.00000,--,--,--,infeasible",
    ]


def test_sweep_rejects_malformed_list(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "--lambdas", "1,abc", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "comma-separated" in result.output


def test_replay_rejects_replay_manifest(runner, tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"command": "replay", "arguments": {}}), encoding="utf-8")
    result = runner.invoke(cli, ["replay", str(tmp_path)])
    assert result.exit_code == 2


def test_init_creates_directories(runner, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    result = runner.invoke(cli, ["init"])
    assert result.exit_code == ExitCode.SUCCESS
    assert "Initialization completed successfully" in result.output
    assert Path(tmp_path / "data" / "runs").is_dir()


COARSE_OPTIONS = [
    "--panels", "200", "--rstar", "12",
    "--guess-amplitude", "4", "--guess-width", "0.3",
    "--eps", "1e-2", "--alpha-min", "1e-6", "--sor-tol", "1e-8",
]


def test_stalled_solve_is_not_success(runner, tmp_path):
    result = runner.invoke(cli, [
        "solve", "--panels", "200", "--alpha-min", "1e-2", "--eps", "1e-8", "--out", str(tmp_path),
    ])
    assert result.exit_code == ExitCode.NON_CONVERGENCE
    assert "Status: stalled (zero_step)" in result.output
    summary = json.loads((tmp_path / "result.json").read_text(encoding="utf-8"))
    assert summary["status"] == "stalled"


def test_sweep_passes_guess(runner, tmp_path):
    result = runner.invoke(cli, [
        "sweep", "--model", "asym", "--lambdas", "1", "--s-values", "0.1",
        "--panels", "60", "--guess-amplitude", "0.01", "--parallel", "1", "--out", str(tmp_path),
    ])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    lines = (tmp_path / "grid.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1].endswith("INFEASIBLE_GUESS")


def test_study_passes_guess(runner, tmp_path):
    result = runner.invoke(cli, ["study", "robustness", "--guess-amplitude", "0.01", "--out", str(tmp_path)])
    assert result.exit_code == ExitCode.INFEASIBLE
    assert "INFEASIBLE_GUESS" in result.output


def test_study_robustness(runner, tmp_path):
    result = runner.invoke(cli, ["study", "robustness"] + COARSE_OPTIONS + ["--out", str(tmp_path)])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    summary = json.loads((tmp_path / "study.json").read_text(encoding="utf-8"))
    assert "relative_action_difference" in summary
    lines = (tmp_path / "study.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "run,M,alpha_min,sor_tol,u0,I"
    assert [line.split(",")[0] for line in lines[1:]] == ["standard", "coarse"]


def test_demo_two_maxima(runner, tmp_path):
    result = runner.invoke(cli, [
        "demo", "two-maxima", "--panels", "200", "--eps", "1e-2", "--alpha-min", "1e-6", "--sor-tol", "1e-8",
        "--out", str(tmp_path),
    ])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    assert "Fiber maxima: 2" in result.output
    for name in ("fiber.csv", "demo.json", "profile.csv", "manifest.json"):
        assert (tmp_path / name).exists()


def test_reproduce_passes_and_fails(runner, tmp_path, make_coarse_tables):
    loose = make_coarse_tables(tmp_path / "loose.json")
    result = runner.invoke(cli, ["reproduce", "power-heights", "--dataset", str(loose), "--out", str(tmp_path / "pass")])
    assert result.exit_code == ExitCode.SUCCESS, result.output
    assert "Passed 2/2" in result.output
    assert (tmp_path / "pass" / "report.csv").exists()

    strict = make_coarse_tables(tmp_path / "strict.json", tolerance=1e-12)
    result = runner.invoke(cli, ["reproduce", "power-heights", "--dataset", str(strict), "--out", str(tmp_path / "fail")])
    assert result.exit_code == ExitCode.REPRODUCTION_FAILURE
    assert "REPRODUCTION_FAILURE" in result.output
