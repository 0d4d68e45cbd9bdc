import json

import pytest
from typer.testing import CliRunner

from app.cli import app
from tests.conftest import DATA_DIR, GOLDEN_DIR, normalized_lines

runner = CliRunner()

CASH_FLOW = str(DATA_DIR / "cash_flow.csv")
CASH_FLOW_MANIFEST = str(DATA_DIR / "cash_flow.json")
BALANCE_SHEET = str(DATA_DIR / "balance_sheet.csv")
BALANCE_SHEET_MANIFEST = str(DATA_DIR / "balance_sheet.json")


def invoke(*args):
    return runner.invoke(app, [str(arg) for arg in args])


def test_version():
    result = invoke("--version")
    assert result.exit_code == 0
    assert result.stdout.startswith("inclusion-audit 1.0.0 (report schema 1)")


# --- CHECK ---

def test_check_fails_before_the_bank_line_is_inverted():
    result = invoke("check", CASH_FLOW)
    assert result.exit_code == 1
    assert normalized_lines(result.stdout)[1] == "* Zero check 0 60 60 60 (180)"


def test_check_passes_with_the_manifest():
    result = invoke("check", CASH_FLOW, "--manifest", CASH_FLOW_MANIFEST)
    assert result.exit_code == 0
    assert normalized_lines(result.stdout)[1] == "* Zero check 0 0 0 0 0"


# --- INCLUSION ---

def test_include_prints_the_golden_report():
    result = invoke("include", CASH_FLOW, "-m", CASH_FLOW_MANIFEST)
    assert result.exit_code == 0, result.output
    expected = (GOLDEN_DIR / "cash_flow_project.txt").read_text(encoding="utf-8")
    assert normalized_lines(result.stdout) == normalized_lines(expected)


def test_include_with_a_reported_rate_that_does_not_match():
    result = invoke("include", CASH_FLOW, "-m", CASH_FLOW_MANIFEST, "--vector", "(60),60,60,60,-", "--reported", "80%")
    assert result.exit_code == 1


def test_include3_from_the_command_line():
    result = invoke("include3", BALANCE_SHEET, "-m", BALANCE_SHEET_MANIFEST, "--top", "79", "--bottom", "10", "--reported", "89%")
    assert result.exit_code == 0, result.output
    assert "INCLUDED IN DEBT" in result.stdout


def test_include3_without_a_manifest():
    result = invoke("include3", BALANCE_SHEET, "--top", "79", "--bottom", "10")
    assert result.exit_code == 0, result.output


def test_include3_json_report():
    result = invoke("include3", BALANCE_SHEET, "-m", BALANCE_SHEET_MANIFEST, "--format", "json")
    assert result.exit_code == 0
    document = json.loads(result.stdout)
    assert document["schema"] == 1
    assert document["partitions"][0]["assignment"]["Equity/share capital"] == "bottom"


def test_report_can_be_written_to_a_file(tmp_path):
    report = tmp_path / "report.md"
    result = invoke("include3", BALANCE_SHEET, "-m", BALANCE_SHEET_MANIFEST, "--format", "markdown", "--output", report)
    assert result.exit_code == 0
    assert report.read_text(encoding="utf-8").startswith("| Balance sheet | 2012")


def test_audit_runs_every_target():
    result = invoke("audit", CASH_FLOW, "--manifest", CASH_FLOW_MANIFEST)
    assert result.exit_code == 0
    assert "=== project IRR ===" in result.stdout
    assert "=== shareholder IRR ===" in result.stdout


def test_diagnose_an_unreachable_cash_flow():
    result = invoke("diagnose", CASH_FLOW, "-m", CASH_FLOW_MANIFEST, "--vector", "(60),60,60,60,(25)")
    assert result.exit_code == 1
    assert "DIAGNOSIS: no exact partition" in result.stdout


# --- IRR AND GRID ---

def test_irr_matches_the_reported_rate():
    result = invoke("irr", "(60)", "60", "60", "60", "--reported", "83.93%")
    assert result.exit_code == 0
    assert "83.93%" in result.stdout


def test_irr_mismatch_is_a_finding():
    assert invoke("irr", "(60)", "60", "60", "60", "--reported", "80%").exit_code == 1


def test_irr_needs_flows():
    assert invoke("irr").exit_code == 2


def test_grid():
    result = invoke("grid", DATA_DIR / "grid.csv")
    assert result.exit_code == 0
    assert "SUM(A) = G * 4" in result.stdout


# --- ERRORS ---

def test_missing_statement_is_a_usage_error():
    assert invoke("check", DATA_DIR / "missing.csv").exit_code == 2


def test_bad_manifest_exits_2(tmp_path):
    manifest = tmp_path / "bad.json"
    manifest.write_text('{"foo": 1}', encoding="utf-8")
    result = invoke("include", CASH_FLOW, "-m", manifest)
    assert result.exit_code == 2
    assert "bad.json: unknown manifest keys: foo" in result.stderr
    assert any(line.startswith("error: ") and "bad.json" in line for line in result.stderr.splitlines())


def test_zero_tolerance_is_refused():
    assert invoke("check", CASH_FLOW, "--tolerance", "0").exit_code == 2


def test_include_without_a_target_exits_2():
    result = invoke("include", CASH_FLOW)
    assert result.exit_code == 2
    assert "no two-way target" in result.stderr


# --- GENERATOR ---

def test_generated_instance_passes_inclusion(tmp_path):
    result = invoke("gen", "--out", tmp_path, "--seed", 3, "--rows", 9, "--periods", 4)
    assert result.exit_code == 0, result.output
    assert {path.name for path in tmp_path.iterdir()} == {"statement.csv", "manifest.json", "truth.json"}
    result = invoke("include", tmp_path / "statement.csv", "-m", tmp_path / "manifest.json")
    assert result.exit_code == 0, result.output


def test_generated_sign_error_fails_the_check(tmp_path):
    assert invoke("gen", "--out", tmp_path, "--seed", 4, "--fault", "sign_error").exit_code == 0
    result = invoke("check", tmp_path / "statement.csv", "-m", tmp_path / "manifest.json")
    assert result.exit_code == 1


def test_gen_benchmark():
    result = invoke("gen", "--benchmark", 3, "--fault", "sign_error")
    assert result.exit_code == 0
    assert json.loads(result.stdout)["rate"] == 1.0


@pytest.mark.parametrize("args", [["gen"], ["gen", "--benchmark", "3"], ["gen", "--out", "x", "--kind", "four_way"]])
def test_gen_usage_errors(args, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert invoke(*args).exit_code == 2
