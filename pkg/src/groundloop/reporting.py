"""Report rendering: JSON, aligned text table, per-item TSV, and figures."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evalharness import MetricReport

logger = logging.getLogger(__name__)


def format_table(rows: list[list[str]], headers: list[str]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    rule = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(headers), rule, *[fmt(r) for r in rows]])


def _metric_text(report: MetricReport) -> str:
    rows = []
    for name, value in report.metrics.items():
        rows.append([name, "n/a" if value is None else f"{value:.4f}"])
    stats = report.stats
    rows.append(["mean_response_length", f"{stats.mean_response_length:.2f}"])
    rows.append(["invoke_errors", str(stats.invoke_errors)])
    rows.append(["reflection_score", f"{stats.reflection_score:.2f}"])
    for name, count in sorted(stats.invocations.items()):
        rows.append([f"invocations[{name}]", str(count)])
    return format_table(rows, ["metric", "value"])


def _item_rows(report: MetricReport) -> list[list[str]]:
    rows = []
    for r in report.results:
        rows.append(
            [
                r.item.id,
                r.item.task_kind,
                "" if r.predicted is None else r.predicted,
                "yes" if r.first_correct else "no",
                f"{sum(r.sample_correct)}/{len(r.sample_correct)}",
            ]
        )
    return rows


def render_text_report(report: MetricReport) -> str:
    items = format_table(_item_rows(report), ["id", "kind", "predicted", "first_correct", "correct"])
    return items + "\n\n" + _metric_text(report)


def write_item_tsv(report: MetricReport, path: Path) -> None:
    headers = ["id", "task_kind", "predicted", "first_correct", "correct_count", "samples"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(headers) + "\n")
        for r in report.results:
            fh.write(
                "\t".join(
                    [
                        r.item.id,
                        r.item.task_kind,
                        (r.predicted or "").replace("\t", " "),
                        str(int(r.first_correct)),
                        str(sum(r.sample_correct)),
                        str(len(r.sample_correct)),
                    ]
                )
                + "\n"
            )


def render_figures(report: MetricReport, path: Path) -> None:
    """Four-panel summary figure: lengths, invocations, errors, reflection."""
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ids = [r.item.id for r in report.results]
    lengths = [
        sum(t.token_length for t in r.batch.trajectories) / max(len(r.batch.trajectories), 1)
        for r in report.results
    ]

    ax = axes[0][0]
    ax.bar(range(len(ids)), lengths, color="#4878d0")
    ax.set_title("Response Length")
    ax.set_ylabel("tokens (mean over samples)")

    ax = axes[0][1]
    names = sorted(report.stats.invocations)
    ax.bar(range(len(names)), [report.stats.invocations[n] for n in names], color="#ee854a")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_title("Interface Invocations")

    ax = axes[1][0]
    ax.bar([0, 1], [report.stats.invoke_errors, report.stats.over_limit], color="#d65f5f")
    ax.set_xticks([0, 1])
    ax.set_xticklabels(["errors", "over limit"])
    ax.set_title("Invoke Errors")

    ax = axes[1][1]
    ax.bar([0], [report.stats.reflection_score], color="#6acc64")
    ax.set_xticks([0])
    ax.set_xticklabels(["mean per response"])
    ax.set_title("Reflection Score")

    for row in axes:
        for a in row:
            a.tick_params(labelsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(report: MetricReport, report_path: str | Path, figures: bool = True) -> list[Path]:
    """Write the JSON report plus its text table, TSV, and figure siblings."""
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    written = []

    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(report_path)

    text_path = report_path.with_suffix(".txt")
    text_path.write_text(render_text_report(report) + "\n", encoding="utf-8")
    written.append(text_path)

    tsv_path = report_path.with_suffix(".tsv")
    write_item_tsv(report, tsv_path)
    written.append(tsv_path)

    if figures:
        fig_path = report_path.with_suffix(".png")
        render_figures(report, fig_path)
        written.append(fig_path)
    return written
