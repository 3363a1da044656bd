"""Command line entry points: assess run / report / testgen."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .agents import LiveAgent, ScriptedAgent
from .efficiency import load_pricing
from .errors import AssessError
from .harness import render, run_assessment
from .scenario import bundled_scenario_path, generate_test_cases, load_scenario

EXIT_VALIDATION = 2
EXIT_RUN_ERRORS = 3


def _resolve_doc(ref: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    return bundled_scenario_path(ref)  # FileNotFoundError if neither


def _build_agent(ref: str):
    kind, sep, rest = ref.partition(":")
    if not sep:
        raise ValueError("agent must look like scripted:<file-or-name> or live:<base-url>")
    if kind == "scripted":
        return ScriptedAgent.from_file(_resolve_doc(rest))
    if kind == "live":
        return LiveAgent(rest)
    raise ValueError(f"unknown agent kind: {kind}")


@click.group()
def main():
    """Desk-scale assessment harness for tool-using agents."""


@main.command()
@click.option("--scenario", "scenario_ref", required=True, help="scenario file or bundled name")
@click.option("--agent", "agent_ref", required=True, help="scripted:<file-or-name> or live:<base-url>")
@click.option("--runs", type=int, default=None, help="override the scenario's run count")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option(
    "--judge",
    type=click.Choice(["mock", "llm", "agent", "none"]),
    default="mock",
    show_default=True,
)
@click.option("--pricing", "pricing_path", type=click.Path(exists=True), default=None)
@click.option("--macro-memory", is_flag=True, help="macro-average retrieval over gold entries")
@click.option("--baseline-only", is_flag=True, help="skip framework metrics and judging")
@click.option("--out", "out_path", default="-", show_default=True, help="report path or - for stdout")
def run(scenario_ref, agent_ref, runs, seed, judge, pricing_path, macro_memory, baseline_only, out_path):
    """Assess one agent against one scenario and emit a JSON report."""
    try:
        scenario = load_scenario(_resolve_doc(scenario_ref))
        agent = _build_agent(agent_ref)
        pricing = load_pricing(pricing_path)
        report = run_assessment(
            scenario,
            agent,
            runs=runs,
            seed=seed,
            judge=judge,
            pricing=pricing,
            macro_memory=macro_memory,
            baseline_only=baseline_only,
        )
    except (AssessError, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    text = render(report, "json")
    if out_path == "-":
        click.echo(text, nl=False)
    else:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}", err=True)
    if report["run_errors"]:
        sys.exit(EXIT_RUN_ERRORS)


@main.command("report")
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["md", "markdown", "json"]), default="md", show_default=True)
@click.option("--figures", "figures_dir", default=None, help="also render PNG figures + runs.csv here")
@click.option("--out", "out_path", default="-", show_default=True)
def report_cmd(report_path, fmt, figures_dir, out_path):
    """Re-render a JSON report as markdown (optionally with figures)."""
    try:
        data = json.loads(Path(report_path).read_text(encoding="utf-8"))
        text = render(data, fmt)
    except (ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    if figures_dir:
        from .figures import render_figures

        files = render_figures(data, figures_dir)
        click.echo("\n".join(str(f) for f in files), err=True)
    if out_path == "-":
        click.echo(text, nl=False)
    else:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}", err=True)


@main.command()
@click.option("--scenario", "scenario_ref", required=True, help="scenario file or bundled name")
def testgen(scenario_ref):
    """Print the generated per-pillar test cases, one JSON object per line."""
    try:
        scenario = load_scenario(_resolve_doc(scenario_ref))
    except (AssessError, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    for case in generate_test_cases(scenario):
        click.echo(json.dumps(case.to_dict(), ensure_ascii=False))


if __name__ == "__main__":
    main()
