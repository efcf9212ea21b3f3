"""Figure rendering for the report path.  Headless (Agg) only; every
function writes a PNG and returns its path."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from typing import Dict, List, Mapping, Sequence  # noqa: E402

from .analysis import CoverageCell, FrequencyDistribution, OverlapCell  # noqa: E402


def coverage_figure(cells: Sequence[CoverageCell], path) -> str:
    """Grouped bars: per log, one bar per vendor with the coverage pct."""
    logs = sorted({c.log_name for c in cells})
    vendors = sorted({c.vendor for c in cells})
    values = {(c.log_name, c.vendor): c.pct for c in cells}
    width = 0.8 / max(len(vendors), 1)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(logs) + 2), 4.5))
    for i, vendor in enumerate(vendors):
        xs = [j + i * width for j in range(len(logs))]
        ys = [values.get((log, vendor), 0.0) for log in logs]
        ax.bar(xs, ys, width=width, label=vendor)
    ax.set_xticks([j + width * (len(vendors) - 1) / 2 for j in range(len(logs))])
    ax.set_xticklabels(logs, rotation=90, fontsize=7)
    ax.set_ylabel("vendor store covered, %")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def overlap_figure(matrix: Sequence[Sequence[OverlapCell]], path) -> str:
    """Heatmap of |X∩Y|/|X| with the row store as denominator."""
    names = [row[0].x for row in matrix]
    values = [[cell.value for cell in row] for row in matrix]
    size = max(4.0, 0.28 * len(names) + 2)
    fig, ax = plt.subplots(figsize=(size, size))
    image = ax.imshow(values, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(names)))
    ax.set_yticks(range(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=6)
    ax.set_yticklabels(names, fontsize=6)
    ax.set_xlabel("Y")
    ax.set_ylabel("X")
    fig.colorbar(image, ax=ax, label="|X∩Y| / |X|", shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def frequency_figure(dist: FrequencyDistribution, path) -> str:
    """Bar chart: number of distinct roots per inclusion count."""
    ns = sorted(dist.buckets)
    fig, ax = plt.subplots(figsize=(max(6, 0.25 * (max(ns) if ns else 1) + 3), 4))
    ax.bar(ns, [dist.buckets[n] for n in ns], width=0.85)
    ax.set_xlabel("included by n stores")
    ax.set_ylabel("distinct roots")
    if dist.universe:
        ax.set_title(f"universe: {dist.universe}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def timelines_figure(timelines: Mapping[str, Sequence], path) -> str:
    """Distinct store size over time, one step line per log.  The legend
    is capped; past that the lines stay but unlabeled."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, (log, points) in enumerate(sorted(timelines.items())):
        if not points:
            continue
        xs = [ts for ts, _ in points]
        ys = [n for _, n in points]
        ax.step(xs, ys, where="post", label=log if i < 10 else None)
    ax.set_ylabel("distinct roots")
    handles, labels = ax.get_legend_handles_labels()
    if handles:
        ax.legend(fontsize=7)
    fig.autofmt_xdate(rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)
