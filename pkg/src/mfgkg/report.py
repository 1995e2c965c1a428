"""Figure rendering for graph statistics and merge reports.

Everything draws through the Agg backend and lands in PNG files, so reports
work in headless runs; callers get back the list of written paths.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .fusion import MergeReport  # noqa: E402
from .graph import KnowledgeGraph  # noqa: E402


def _bar_chart(path: Path, labels: list[str], values: list[float],
               title: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(labels) + 2.0), 3.5))
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_stats_figures(graph: KnowledgeGraph, out_dir: str | Path) -> list[Path]:
    """Render relation-usage and source-breakdown charts; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    relation_counts = Counter(t.relation.name for t in graph.triples)
    source_counts = Counter(tag.value for t in graph.triples for tag in t.provenance)

    paths = []
    usage_path = out / "relation_usage.png"
    items = sorted(relation_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    _bar_chart(usage_path, [k for k, _ in items], [v for _, v in items],
               "Triples per relation", "triples")
    paths.append(usage_path)

    source_path = out / "source_breakdown.png"
    items = sorted(source_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    _bar_chart(source_path, [k for k, _ in items], [v for _, v in items],
               "Triples per source", "triples")
    paths.append(source_path)
    return paths


def save_merge_figures(report: MergeReport, out_dir: str | Path) -> list[Path]:
    """Render overlap and match-origin charts for a merge report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    paths = []
    overlap_path = out / "overlap.png"
    unmatched = max(report.textbook_entity_count - report.matched_count, 0)
    fig, ax = plt.subplots(figsize=(4.0, 3.5))
    ax.bar([0, 1], [report.matched_count, unmatched], color=["#4878a8", "#b0b0b0"])
    ax.set_xticks([0, 1])
    ax.set_xticklabels(["matched", "unmatched"])
    ax.set_ylabel("notes entities")
    ax.set_title(f"KB overlap: {report.overlap_fraction:.1%}")
    fig.tight_layout()
    fig.savefig(overlap_path, dpi=150)
    plt.close(fig)
    paths.append(overlap_path)

    origins_path = out / "match_origins.png"
    items = sorted(report.origin_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    _bar_chart(origins_path, [k for k, _ in items] or ["none"],
               [v for _, v in items] or [0],
               "Matches per alignment pass", "pairs")
    paths.append(origins_path)
    return paths
