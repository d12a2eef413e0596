"""
Optional figures written next to the CSV reports. The CSV files are the
data contract; these plots are a convenience for eyeballing a run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _real_series(values: dict):
    for name, arr in values.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            yield f"Re {name}", arr.real
            yield f"Im {name}", arr.imag
        else:
            yield name, arr


def plot_trajectory(times, values: dict, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for name, arr in _real_series(values):
        ax.plot(times, arr, label=name)
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_comparison(results, path, title: str = "") -> Path:
    """Overlay of every method, one panel per observable."""
    names = list(results[0].values)
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 2.8 * len(names)), squeeze=False)
    styles = ["-", "--", ":", "-."]
    for ax, name in zip(axes[:, 0], names):
        for j, res in enumerate(results):
            ax.plot(res.times, np.real(res.values[name]), styles[j % 4], label=res.method)
        ax.set_ylabel(name)
        ax.legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("t")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_scaling(report: dict, path) -> Path:
    x = np.array(report["values"])
    y = np.array(report["errors"])
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    ax.loglog(x, y, "o-", label=f"slope {report['slope']:.2f}")
    ax.set_xlabel(report["parameter"])
    ax.set_ylabel("max-abs error")
    ax.legend(loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
