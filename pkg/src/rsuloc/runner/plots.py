"""Figures rendered next to the CSV outputs (optional, ``--plots``).

matplotlib is imported lazily with the non-interactive Agg backend so the
rest of the runner never needs it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_summary(result, path) -> Path:
    """ALE per method: bars for a single scenario, lines over a sweep."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    methods = result.config.methods
    values = result.sweep_values()
    if result.sweep_parameter is None:
        means = [np.nanmean(result.ale(m)) for m in methods]
        errs = [np.nanstd(result.ale(m)) for m in methods]
        ax.bar(methods, means, yerr=errs, capsize=3, color="0.6", edgecolor="k")
    else:
        numeric = all(isinstance(v, (int, float)) for v in values)
        xs = values if numeric else np.arange(len(values))
        for m in methods:
            ax.plot(xs, [np.nanmean(result.ale(m, v)) for v in values], marker="o", label=m)
        if not numeric:
            ax.set_xticks(xs, [str(v) for v in values])
        ax.set_xlabel(result.sweep_parameter)
        ax.legend(frameon=False)
    ax.set_ylabel("ALE (m)")
    ax.set_title(result.config.name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_trajectory(result, path, run: int = 0) -> Path:
    """Truth and estimates of one run (first sweep value)."""
    plt = _pyplot()
    rr = next(r for r in result.runs if r.run == run)
    fig, ax = plt.subplots(figsize=(8.0, 3.2))
    first = next(iter(rr.tracks.values()))
    ax.plot(first.truths[:, 0], first.truths[:, 1], "k-", lw=2, label="truth")
    for m, t in rr.tracks.items():
        style = "-" if m == "cv2x_loca" else "."
        ax.plot(t.estimates[:, 0], t.estimates[:, 1], style, ms=2, lw=1, label=m)
    ax.set_xlabel("longitudinal X (m)")
    ax.set_ylabel("lateral Y (m)")
    ax.legend(frameon=False, fontsize="small", ncol=4)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_longitudinal_cdf(result, path) -> Path:
    """Empirical CDF of longitudinal errors per method (first sweep value)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    v0 = result.sweep_values()[0]
    for m in result.config.methods:
        rep = result.pooled_report(m, v0)
        if rep is None:
            continue
        e = np.asarray(rep.longitudinal_errors)
        ax.step(e, np.arange(1, e.size + 1) / e.size, where="post", label=m)
    ax.set_xlabel("longitudinal error (m)")
    ax.set_ylabel("CDF")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_all(result, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        plot_summary(result, out_dir / "ale_summary.png"),
        plot_trajectory(result, out_dir / "trajectory.png"),
        plot_longitudinal_cdf(result, out_dir / "longitudinal_cdf.png"),
    ]
