"""Figure rendering for the CLI report paths.

Figures are written next to the CSV outputs; the CSV files remain the
byte-stable data contract and none of the numerics depend on this module.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIELD_LABELS = ("u", "w", r"$\theta$", "n", "q", "m")

plt.rcParams.update({
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.4,
    "lines.linewidth": 1.4,
})


def save_solution_figure(x, fields, path, title=None):
    """2x3 panel of the six field quantities along the arch."""
    fig, axes = plt.subplots(2, 3, figsize=(11, 6), sharex=True)
    for i, ax in enumerate(axes.flat):
        ax.plot(x, fields[i], "b-")
        ax.set_title(FIELD_LABELS[i])
        if i >= 3:
            ax.set_xlabel("x")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_convergence_figure(n_values, errors, indicators, path, title=None):
    """Log-log per-field errors and the residual indicator versus N."""
    fig, ax = plt.subplots(figsize=(7, 5))
    n = np.asarray(n_values, dtype=float)
    markers = "osv^Dp"
    for i, label in enumerate(FIELD_LABELS):
        ax.loglog(n, errors[:, i], marker=markers[i], ms=4, label=label)
    if indicators is not None:
        ax.loglog(n, indicators, "k--", label="indicator")
    ref = errors[0].max() * (n / n[0]) ** -2.0
    ax.loglog(n, ref, "k:", alpha=0.6, label=r"$N^{-2}$")
    ax.set_xlabel("N")
    ax.set_ylabel("relative $L_2$ error")
    ax.legend(ncol=2, fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_stability_figure(lams, c_n, c_q, c_q0, path, c_stab=None, code=None):
    """Curvature-dependent stability constants over a lambda grid."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(lams, c_n, "-", label=r"$C_n$")
    ax.plot(lams, c_q, "--", label=r"$C_q$")
    ax.plot(lams, c_q0, ":", label=r"$C_q^{(0)}$")
    if c_stab is not None:
        ax.plot(lams, c_stab, "-.", label=rf"$C_{{stab}}$ ({code})")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylim(0.0, min(80.0, 1.05 * float(np.nanmax(c_n))))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_comparison_figure(n_values, dpg_errors, fem_reduced, fem_unreduced, path):
    """DPG versus reduced/unreduced FEM displacement errors."""
    fig, ax = plt.subplots(figsize=(7, 5))
    n = np.asarray(n_values, dtype=float)
    for i, label in enumerate(("u", "w", r"$\theta$")):
        ax.loglog(n, dpg_errors[:, i], "o-", ms=4, label=f"DPG {label}")
        ax.loglog(n, fem_reduced[:, i], "s--", ms=4, label=f"FEM red. {label}")
        ax.loglog(n, fem_unreduced[:, i], "v:", ms=4, label=f"FEM unred. {label}")
    ax.set_xlabel("N")
    ax.set_ylabel("relative $L_2$ error")
    ax.legend(ncol=3, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
