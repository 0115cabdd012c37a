"""Figure rendering for experiment outputs.

Uses the Agg backend so rendering works headless; figures are written
through a temp file and an atomic rename.
"""

from __future__ import annotations

import os
import tempfile

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import MetricReport

_PANEL_PREFERENCE = ("dist2", "rep2", "bleu2", "coverage", "dist4", "uniq2", "rouge1", "rougeL", "ppl")


def _save_atomic(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=120)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def save_report_figure(
    reports: dict[str, MetricReport], order: Sequence[str], metrics: Sequence[str], path: Path
) -> None:
    """Bar panels comparing strategies on up to four selected metrics."""
    names = [n for n in order if n in reports]
    panels = [m for m in _PANEL_PREFERENCE if m in metrics]
    panels += [m for m in metrics if m not in panels]
    panels = panels[:4]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    x = range(len(names))
    for ax, metric in zip(axes.flat, panels):
        vals = [reports[n].values[metric] for n in names]
        ax.bar(x, vals, color="#4878a8")
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
        ax.set_title(metric)
        ax.grid(axis="y", alpha=0.3)
    for ax in list(axes.flat)[len(panels):]:
        ax.axis("off")
    fig.suptitle("strategy comparison")
    fig.tight_layout()
    _save_atomic(fig, path)


def save_sweep_figure(rows: Sequence, metric_n: int, path: Path) -> None:
    """Repetition versus generation length, one line per strategy."""
    by_strategy: dict[str, tuple[list[int], list[float], list[float]]] = {}
    for r in rows:
        lengths, means, stds = by_strategy.setdefault(r.strategy, ([], [], []))
        lengths.append(r.max_length)
        means.append(r.mean)
        stds.append(r.std)
    fig, ax = plt.subplots(figsize=(8, 5))
    for name, (lengths, means, stds) in by_strategy.items():
        ax.errorbar(lengths, means, yerr=stds, label=name, marker="o", markersize=3, capsize=2)
    ax.set_xlabel("max generation length")
    ax.set_ylabel(f"rep-{metric_n}")
    ax.set_title("repetition growth with length")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save_atomic(fig, path)
