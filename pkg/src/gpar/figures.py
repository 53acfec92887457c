"""Figure rendering for evaluation artifacts.

Every writer takes a report (or plain numbers) and a target path and
saves a PNG next to the delimited output files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import HITS_LEVELS, EvalReport


def metrics_figure(report: EvalReport, path: str):
    labels = ["MRR"] + [f"HITS@{k}" for k in HITS_LEVELS]
    values = [report.metrics["mrr"]] + [report.metrics[f"hits@{k}"] for k in HITS_LEVELS]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(labels, values, color="#4878cf")
    ax.set_ylim(0, 1)
    ax.set_ylabel("value")
    ax.set_title(f"filtered metrics over {report.n_queries} queries")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def per_relation_figure(report: EvalReport, path: str, max_rows: int = 30):
    rows = sorted(report.per_relation, key=lambda r: -r["queries"])[:max_rows]
    if not rows:
        return
    labels = [f"{r['relation']} ({r['direction']})" for r in rows][::-1]
    values = [r["mrr"] for r in rows][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.3 * len(rows) + 1.2))
    ax.barh(labels, values, color="#6acc65")
    ax.set_xlim(0, 1)
    ax.set_xlabel("MRR")
    ax.set_title("per-relation filtered MRR (largest query counts)")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def length_selection_figure(mrr_by_len: dict[int, float], best: int, path: str):
    lengths = sorted(mrr_by_len)
    values = [mrr_by_len[n] for n in lengths]
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot(lengths, values, marker="o")
    ax.scatter([best], [mrr_by_len[best]], color="#d65f5f", zorder=3,
               label=f"selected L={best}")
    ax.set_xticks(lengths)
    ax.set_xlabel("pattern length bound L")
    ax.set_ylabel("validation MRR")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
