"""Matplotlib figure rendering for the CLI report paths.

Figures are written alongside the delimited outputs with fixed sizes, fixed
dpi, and stripped PNG metadata so reruns are byte-identical.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_KW = dict(dpi=150, metadata={"Software": None})


def save_coverage_figure(cov, path, scene=None, title=None):
    """Heatmap of a coverage map with optional Tx/Rx/RIS markers."""
    grid = cov.grid
    x = grid.x_coords()
    y = grid.y_coords()
    extent = [x[0] - grid.cell_size / 2, x[-1] + grid.cell_size / 2,
              y[0] - grid.cell_size / 2, y[-1] + grid.cell_size / 2]
    data = np.where(np.isfinite(cov.rsrp_db), cov.rsrp_db, np.nan)

    fig, ax = plt.subplots(figsize=(7.0, 5.6))
    im = ax.imshow(data, origin="lower", extent=extent, aspect="equal", cmap="inferno")
    fig.colorbar(im, ax=ax, label="RSRP (dBm)")
    if scene is not None:
        dep = scene.deployment
        for pos, marker, label in ((dep.tx.position, "^", "Tx"),
                                   (dep.rx.position, "o", "Rx"),
                                   (dep.ris.center, "s", "RIS")):
            px = float(np.dot(pos, grid.x_axis))
            py = float(np.dot(pos, grid.y_axis))
            ax.plot(px, py, marker, color="white", markeredgecolor="black", markersize=9)
            ax.annotate(label, (px, py), textcoords="offset points", xytext=(6, 6),
                        color="white", fontsize=9)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_PNG_KW)
    plt.close(fig)


def save_bits_figure(bits, rows, cols, path, title=None):
    """Panel ON/OFF pattern; viridis maps OFF to purple and ON to yellow."""
    grid = np.asarray(bits).reshape(rows, cols)
    fig, ax = plt.subplots(figsize=(max(3.0, cols * 0.35), max(2.2, rows * 0.35)))
    ax.imshow(grid, cmap="viridis", vmin=0, vmax=1)
    ax.set_xticks(range(cols))
    ax.set_yticks(range(rows))
    ax.tick_params(labelsize=6)
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_PNG_KW)
    plt.close(fig)


def save_gain_bars(rx_ids, gains_by_method, path, title=None):
    """Grouped bars of RSRP gain per receiver for each method.

    gains_by_method maps a method label to one gain per receiver, in rx order.
    """
    methods = list(gains_by_method)
    x = np.arange(len(rx_ids), dtype=float)
    width = 0.8 / max(len(methods), 1)

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for k, method in enumerate(methods):
        vals = [v if np.isfinite(v) else 0.0 for v in gains_by_method[method]]
        ax.bar(x + (k - (len(methods) - 1) / 2) * width, vals, width, label=method)
    ax.set_xticks(x)
    ax.set_xticklabels([f"Rx{i}" for i in rx_ids])
    ax.set_xlabel("Receiver")
    ax.set_ylabel("RSRP gain (dB)")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.grid(axis="y", linestyle="--", alpha=0.5)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_PNG_KW)
    plt.close(fig)
