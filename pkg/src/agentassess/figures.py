"""Render a report into PNG figures and a per-run CSV next to them."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless; must precede pyplot import

import matplotlib.pyplot as plt  # noqa: E402

PILLAR_ORDER = ("llm", "memory", "tools", "environment")

JUDGE_KEYS = ("completion", "safety", "memory", "reasoning", "overall")


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def _tokens_figure(report: dict, outdir: Path) -> Path:
    runs = [r["run_id"] for r in report["per_run"]]
    inputs = [r["efficiency"]["input_tokens"] for r in report["per_run"]]
    outputs = [r["efficiency"]["output_tokens"] for r in report["per_run"]]
    xs = range(len(runs))
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar([x - 0.2 for x in xs], inputs, width=0.4, label="input")
    ax.bar([x + 0.2 for x in xs], outputs, width=0.4, label="output")
    ax.set_xticks(list(xs), runs)
    ax.set_ylabel("tokens")
    ax.set_title("Token usage per run")
    ax.legend()
    return _save(fig, outdir / "tokens_per_run.png")


def _failures_figure(report: dict, outdir: Path) -> Path:
    counts = [report["pillar_failures"][p] for p in PILLAR_ORDER]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(PILLAR_ORDER, counts)
    ax.set_ylabel("failure events")
    ax.set_title("Failure attribution by pillar")
    return _save(fig, outdir / "pillar_failures.png")


def _judge_figure(report: dict, outdir: Path) -> Path | None:
    judge = report.get("judge")
    if not judge or judge.get("mode") == "agent":
        return None
    rows = [(r["run_id"], r["judge"]["scores"]) for r in report["per_run"] if r.get("judge")]
    if not rows:
        return None
    xs = range(len(rows))
    width = 0.8 / len(JUDGE_KEYS)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    for i, key in enumerate(JUDGE_KEYS):
        offsets = [x + (i - 2) * width for x in xs]
        ax.bar(offsets, [scores[key] for _, scores in rows], width=width, label=key)
    ax.set_xticks(list(xs), [run_id for run_id, _ in rows])
    ax.set_ylim(0, 105)
    ax.set_ylabel("score")
    ax.set_title("Judge scores per run")
    ax.legend(fontsize=7)
    return _save(fig, outdir / "judge_scores.png")


def _runs_csv(report: dict, outdir: Path) -> Path:
    path = outdir / "runs.csv"
    fields = [
        "run_id",
        "task_completion",
        "tool_usage_ratio",
        "memory_f1",
        "policy_adherence",
        "sequence_score",
        "input_tokens",
        "output_tokens",
        "cost_usd",
        "wall_time_ms",
        "failures",
    ]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in report["per_run"]:
            m = row.get("metrics")
            writer.writerow(
                {
                    "run_id": row["run_id"],
                    "task_completion": "" if m is None else int(m["environment"]["task_completion"]),
                    "tool_usage_ratio": "" if m is None else m["tools"]["usage_ratio"],
                    "memory_f1": "" if m is None else m["memory"]["f1"],
                    "policy_adherence": "" if m is None else m["llm"]["policy_adherence"],
                    "sequence_score": "" if m is None else m["tools"]["sequence_score"],
                    "input_tokens": row["efficiency"]["input_tokens"],
                    "output_tokens": row["efficiency"]["output_tokens"],
                    "cost_usd": row["efficiency"]["cost_usd"],
                    "wall_time_ms": row["efficiency"]["wall_time_ms"],
                    "failures": len(row["failures"]),
                }
            )
    return path


def render_figures(report: dict, outdir) -> list[Path]:
    """Write PNGs and runs.csv for one report; returns the created paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = [_tokens_figure(report, outdir), _failures_figure(report, outdir)]
    judge = _judge_figure(report, outdir)
    if judge is not None:
        files.append(judge)
    files.append(_runs_csv(report, outdir))
    return files
