"""Report figures saved next to the delimited outputs.

PNG only: the PNG writer is byte-deterministic for identical figures, which
the non-timing commands rely on.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

DPI = 110


def save_sweep_figure(rows: list[dict], path: str | Path) -> None:
    """Retained-state quality versus pruning layer, one line per rate."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    rates = sorted({row["rate"] for row in rows})
    for rate in rates:
        pts = sorted((r["k"], r["proxy_quality"]) for r in rows if r["rate"] == rate)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"prune {rate:.1%}")
    ax.set_xlabel("pruning layer K")
    ax.set_ylabel("retained-state cosine vs baseline")
    ax.set_ylim(None, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_bench_figure(rows: list[dict], baseline_ms: float, path: str | Path) -> None:
    """Median forward time per pruning rate against the unpruned baseline."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    labels = [f"{row['rate']:.1%}" for row in rows]
    values = [row["median_ms"] for row in rows]
    xs = range(len(rows))
    ax.bar(xs, values, color="#1f77b4", label="pruned forward")
    ax.axhline(baseline_ms, color="#d62728", linestyle="--",
               label=f"baseline {baseline_ms:.1f} ms")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_xlabel("pruning rate")
    ax.set_ylabel("median wall time (ms)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_recall_figure(values: list[float], path: str | Path) -> None:
    """Histogram of per-sample area recall."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.hist(values, bins=20, range=(0.0, 1.0), color="#2ca02c", edgecolor="white")
    ax.set_xlabel("area recall")
    ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
