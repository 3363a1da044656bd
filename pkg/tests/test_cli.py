"""CLI surface: run, report (with figures), and testgen."""

from __future__ import annotations

import csv
import json

import pytest
from click.testing import CliRunner

from agentassess.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_run_bundled_scenario_to_stdout(runner):
    result = runner.invoke(
        main, ["run", "--scenario", "s1_cost", "--agent", "scripted:s1_golden", "--runs", "1"]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["scenario_id"] == "s1_cost"
    assert report["runs"] == 1
    assert report["judge"]["mode"] == "mock"


def test_run_writes_report_file(runner, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(
        main,
        ["run", "--scenario", "s2_security", "--agent", "scripted:s2_golden",
         "--runs", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["framework"]["environment"]["task_completion"] == 1.0
    assert report["hidden_failures"] == []


def test_run_unknown_scenario_exits_2(runner):
    result = runner.invoke(main, ["run", "--scenario", "s9_ghost", "--agent", "scripted:s1_golden"])
    assert result.exit_code == 2
    assert "error:" in result.output


def test_run_bad_agent_ref_exits_2(runner):
    result = runner.invoke(main, ["run", "--scenario", "s1_cost", "--agent", "telepathy"])
    assert result.exit_code == 2
    result = runner.invoke(main, ["run", "--scenario", "s1_cost", "--agent", "psychic:foo"])
    assert result.exit_code == 2


def test_run_with_run_errors_exits_3(runner, tmp_path):
    script = tmp_path / "broken.yaml"
    script.write_text(
        "agent_id: a\nsteps:\n  - action: tool\n    name: no_such_tool\n", encoding="utf-8"
    )
    result = runner.invoke(
        main, ["run", "--scenario", "s1_cost", "--agent", f"scripted:{script}", "--runs", "1"]
    )
    assert result.exit_code == 3
    report = json.loads(result.output)
    assert report["run_errors"]


def test_run_baseline_only_flag(runner):
    result = runner.invoke(
        main,
        ["run", "--scenario", "s1_cost", "--agent", "scripted:s1_skips_policy",
         "--runs", "1", "--baseline-only"],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["framework"] is None and report["judge"] is None


def test_report_markdown_and_figures(runner, tmp_path):
    out = tmp_path / "report.json"
    run_res = runner.invoke(
        main,
        ["run", "--scenario", "s1_cost", "--agent", "scripted:s1_skips_policy", "--out", str(out)],
    )
    assert run_res.exit_code == 0, run_res.output
    figures = tmp_path / "figs"
    md_out = tmp_path / "report.md"
    rep_res = runner.invoke(
        main, ["report", str(out), "--figures", str(figures), "--out", str(md_out)]
    )
    assert rep_res.exit_code == 0, rep_res.output
    text = md_out.read_text(encoding="utf-8")
    assert text.startswith("# Assessment report:")
    names = sorted(p.name for p in figures.iterdir())
    assert names == ["judge_scores.png", "pillar_failures.png", "runs.csv", "tokens_per_run.png"]
    with (figures / "runs.csv").open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["run_id"] for r in rows] == ["run-1", "run-2", "run-3"]
    assert rows[0]["task_completion"] == "0"
    assert rows[0]["failures"] == "0"
    assert rows[1]["failures"] == "1"


def test_report_rejects_unknown_format(runner, tmp_path):
    out = tmp_path / "report.json"
    runner.invoke(main, ["run", "--scenario", "s1_cost", "--agent", "scripted:s1_golden",
                         "--runs", "1", "--out", str(out)])
    result = runner.invoke(main, ["report", str(out), "--format", "xml"])
    assert result.exit_code == 2  # click rejects the choice


def test_testgen_emits_one_json_line_per_case(runner):
    result = runner.invoke(main, ["testgen", "--scenario", "s1_cost"])
    assert result.exit_code == 0, result.output
    lines = [ln for ln in result.output.splitlines() if ln.strip()]
    cases = [json.loads(ln) for ln in lines]
    assert len(cases) == 12
    assert cases[0]["case_id"] == "s1_cost-llm-01"
    assert {c["pillar"] for c in cases} == {"llm", "memory", "tools", "environment"}
    assert all(c["success"] for c in cases)


def test_testgen_unknown_scenario_exits_2(runner):
    result = runner.invoke(main, ["testgen", "--scenario", "missing"])
    assert result.exit_code == 2
