"""Report rendering: delimited metric/latency tables plus matplotlib figures.

Every report lands in one output directory: machine-readable JSON, a
tab-separated table for spreadsheets, the aligned text table, and PNG
figures next to them.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evalkit import MetricReport
from .federation import latency_percentile

FIG_DPI = 150


def _new_axes(width: float = 7.0, height: float = 4.2):
    fig, ax = plt.subplots(figsize=(width, height))
    ax.grid(True, alpha=0.3, linewidth=0.5)
    return fig, ax


def save_eval_report(report: MetricReport, outdir: str | Path, prefix: str = "eval") -> dict:
    """Write JSON, TSV, text table, and figures for a metric report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}

    json_path = outdir / f"{prefix}_metrics.json"
    json_path.write_text(report.to_json(), encoding="utf-8")
    paths["json"] = json_path

    table_path = outdir / f"{prefix}_table.txt"
    table_path.write_text(report.to_table() + "\n", encoding="utf-8")
    paths["table"] = table_path

    tsv_path = outdir / f"{prefix}_per_query.tsv"
    with open(tsv_path, "w", encoding="utf-8") as handle:
        handle.write("query\t" + "\t".join(report.metric_names) + "\n")
        for qid, values in report.per_query.items():
            row = "\t".join(f"{values[name]:.6f}" for name in report.metric_names)
            handle.write(f"{qid}\t{row}\n")
        means = "\t".join(f"{report.means[name]:.6f}" for name in report.metric_names)
        handle.write(f"MEAN\t{means}\n")
    paths["tsv"] = tsv_path

    fig, ax = _new_axes()
    names = report.metric_names
    ax.bar(range(len(names)), [report.means[n] for n in names], color="#33658a")
    ax.set_xticks(range(len(names)), names, rotation=20)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean value")
    ax.set_title(f"Mean metrics over {report.query_count} queries")
    means_png = outdir / f"{prefix}_means.png"
    fig.savefig(means_png, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    paths["means_png"] = means_png

    if report.per_query:
        fig, axes = plt.subplots(
            1, len(names), figsize=(3.0 * len(names), 3.2), sharey=True
        )
        if len(names) == 1:
            axes = [axes]
        for ax, name in zip(axes, names):
            values = [v[name] for v in report.per_query.values()]
            ax.hist(values, bins=20, range=(0.0, 1.0), color="#86bbd8", edgecolor="white")
            ax.set_title(name, fontsize=10)
            ax.set_xlabel("value")
        axes[0].set_ylabel("queries")
        dist_png = outdir / f"{prefix}_distributions.png"
        fig.savefig(dist_png, dpi=FIG_DPI, bbox_inches="tight")
        plt.close(fig)
        paths["distributions_png"] = dist_png

    return paths


def save_latency_report(
    samples_ms: list[float], outdir: str | Path, prefix: str = "latency"
) -> dict:
    """Write latency samples (TSV), percentile summary (JSON), and a figure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}

    tsv_path = outdir / f"{prefix}_samples.tsv"
    with open(tsv_path, "w", encoding="utf-8") as handle:
        handle.write("sample\tms\n")
        for i, value in enumerate(samples_ms):
            handle.write(f"{i}\t{value:.3f}\n")
    paths["tsv"] = tsv_path

    summary = {
        "count": len(samples_ms),
        "p50_ms": latency_percentile(samples_ms, 0.50),
        "p95_ms": latency_percentile(samples_ms, 0.95),
        "max_ms": max(samples_ms),
    }
    json_path = outdir / f"{prefix}_summary.json"
    json_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    paths["json"] = json_path

    fig, ax = _new_axes()
    ordered = sorted(samples_ms)
    percentiles = [(i + 1) / len(ordered) * 100.0 for i in range(len(ordered))]
    ax.plot(percentiles, ordered, color="#33658a", linewidth=1.5)
    for p, label in ((50, "p50"), (95, "p95")):
        value = latency_percentile(samples_ms, p / 100.0)
        ax.axvline(p, color="#f26419", linestyle="--", linewidth=0.8)
        ax.annotate(f"{label}={value:.1f} ms", (p, value), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("percentile")
    ax.set_ylabel("latency (ms)")
    ax.set_title(f"Per-query latency over {len(samples_ms)} samples")
    png_path = outdir / f"{prefix}_percentiles.png"
    fig.savefig(png_path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    paths["png"] = png_path

    return summary | {"paths": paths}
