"""Matplotlib figure rendering for demo and report outputs.

All figures are written as SVG next to the delimited data they visualize.
The SVG metadata date is stripped so reruns produce identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_SVG_KW = {"format": "svg", "metadata": {"Date": None}}
_CLASS_COLORS = {0: "tab:red", 1: "tab:blue"}
_OOD_COLOR = "tab:green"


def save_embedding_panels(path, per_net, blocks, classes):
    """Scatter grid of embeddings: one row per net, one column per block.

    per_net maps a net label to an (M+1, n, 2) embedding stack; classes is
    the length-n label array with -1 marking injected out-of-distribution
    points.
    """
    classes = np.asarray(classes)
    n_rows = len(per_net)
    n_cols = len(blocks)
    fig, axes = plt.subplots(n_rows, n_cols, figsize=(3.2 * n_cols, 3.2 * n_rows),
                             squeeze=False)
    for r, (label, stack) in enumerate(per_net.items()):
        for c, block in enumerate(blocks):
            ax = axes[r][c]
            pts = stack[block]
            for cls in np.unique(classes):
                mask = classes == cls
                color = _OOD_COLOR if cls == -1 else _CLASS_COLORS.get(int(cls), "tab:gray")
                name = "ood" if cls == -1 else f"class {cls}"
                ax.scatter(pts[mask, 0], pts[mask, 1], s=4, c=color, label=name)
            ax.set_title(f"{label}: block {block}")
            ax.set_aspect("equal", adjustable="datalim")
            if r == 0 and c == 0:
                ax.legend(loc="upper right", fontsize=7, markerscale=2)
    fig.tight_layout()
    fig.savefig(path, **_SVG_KW)
    plt.close(fig)


def save_cost_histogram(path, per_net):
    """Clean/adversarial transport-cost histograms with quantile markers.

    per_net maps a net label to (clean_costs, adv_costs, low, high).
    """
    n = len(per_net)
    fig, axes = plt.subplots(1, n, figsize=(4.8 * n, 3.6), squeeze=False)
    for i, (label, (clean, adv, low, high)) in enumerate(per_net.items()):
        ax = axes[0][i]
        all_costs = np.concatenate([clean, adv])
        bins = np.histogram_bin_edges(all_costs, bins=40)
        ax.hist(clean, bins=bins, alpha=0.6, label="clean", color="tab:blue")
        ax.hist(adv, bins=bins, alpha=0.6, label="adversarial", color="tab:orange")
        ax.axvline(low, color="k", linestyle="--", linewidth=1, label="quantiles")
        ax.axvline(high, color="k", linestyle="--", linewidth=1)
        ax.set_title(label)
        ax.set_xlabel("transport cost")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SVG_KW)
    plt.close(fig)


def save_report_bars(path, report):
    """Grouped metric bars per attack row of an experiment report."""
    rows = report.rows
    metrics = ["detection_accuracy", "tpr_successful", "fpr", "auroc"]
    labels = [row["attack"] for row in rows]
    x = np.arange(len(rows))
    width = 0.8 / len(metrics)
    fig, ax = plt.subplots(figsize=(1.6 + 1.6 * len(rows), 3.6))
    for j, metric in enumerate(metrics):
        values = [row[metric] if row.get(metric) is not None else 0.0 for row in rows]
        ax.bar(x + j * width, values, width, label=metric)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.set_ylabel("rate")
    fig.tight_layout()
    fig.savefig(path, **_SVG_KW)
    plt.close(fig)
