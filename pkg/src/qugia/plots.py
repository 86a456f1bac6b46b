"""Figure rendering for the CLI report path.

The harness itself only emits plot-ready data; these helpers turn it into
PNG files next to the CSV/JSON output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_similarity_figure(clean: np.ndarray, attacked: np.ndarray,
                             path, title: str = "Node similarity") -> None:
    """Overlaid similarity histograms (density) for clean vs attacked graph."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(-1.0, 1.0, 51)
    ax.hist(clean, bins=bins, density=True, alpha=0.55, label="clean")
    ax.hist(attacked, bins=bins, density=True, alpha=0.55, label="attacked")
    ax.set_xlabel("cosine similarity to aggregated neighbor features")
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_accuracy_figure(reports, path) -> None:
    """Grouped bars of mean clean vs attacked accuracy per manifest cell group."""
    groups = {}
    for r in reports:
        key = f"{r.dataset}/{r.model}/{'def' if r.defense else 'nodef'}/a={r.a}"
        groups.setdefault(key, []).append(r)
    labels = sorted(groups)
    clean = [np.mean([r.clean_accuracy for r in groups[k]]) for k in labels]
    attacked = [np.mean([r.attacked_accuracy for r in groups[k]]) for k in labels]

    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(labels)), 4))
    ax.bar(x - 0.2, clean, width=0.4, label="clean")
    ax.bar(x + 0.2, attacked, width=0.4, label="attacked")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figures(reports, out_dir) -> list[str]:
    """All figures for an experiment run; returns the written paths."""
    out_dir = Path(out_dir)
    written = []
    acc_path = out_dir / "accuracy.png"
    render_accuracy_figure(reports, acc_path)
    written.append(str(acc_path))
    for r in reports:
        sim_path = out_dir / f"similarity_{r.cell_id()}.png"
        render_similarity_figure(r.similarity_clean, r.similarity_attacked,
                                 sim_path, title=r.cell_id())
        written.append(str(sim_path))
    return written
