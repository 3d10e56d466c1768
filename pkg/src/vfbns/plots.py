"""Figure rendering for run and sweep reports (written next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _semilogy_safe(ax, x, y, **kw):
    # floor at a tiny positive value so identically-zero series (equilibrium
    # runs) still render on the shared log axis without warnings
    y = np.maximum(np.asarray(y, dtype=float), 1e-300)
    ax.semilogy(x, y, **kw)


def render_run(records, path):
    """Energy decay, free boundary and Jacobian range of one trajectory."""
    t = np.asarray([r.t for r in records])
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))

    ax = axes[0, 0]
    _semilogy_safe(ax, t, [r.E for r in records], label="E")
    _semilogy_safe(ax, t, [r.D for r in records], label="D", ls="--")
    ax.set_xlabel("t")
    ax.set_title("basic energy and dissipation")
    ax.legend()

    ax = axes[0, 1]
    _semilogy_safe(ax, t, [r.EL for r in records], label="EL")
    _semilogy_safe(ax, t, [r.EH for r in records], label="EH", ls="--")
    _semilogy_safe(ax, t, [r.EL_tilde for r in records], label="EL~", ls=":")
    ax.set_xlabel("t")
    ax.set_title("weighted energies")
    ax.legend()

    ax = axes[1, 0]
    ax.plot(t, [r.gamma_fb for r in records])
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_xlabel("t")
    ax.set_title("free boundary position")

    ax = axes[1, 1]
    ax.plot(t, [r.min_etax for r in records], label="min")
    ax.plot(t, [r.max_etax for r in records], label="max")
    qbar = records[0].qbar
    if np.isfinite(qbar):
        ax.axhline(qbar, color="r", lw=0.5, ls="--", label="bound")
        ax.axhline(1.0 / qbar, color="r", lw=0.5, ls="--")
    ax.set_xlabel("t")
    ax.set_title("Jacobian range")
    ax.legend()

    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_eps_sweep(values, metrics, slope, path):
    """Log-log metric decay against the Mach/Froude parameter with the fit."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    names = ("sup_dev_l2", "v_l2_l2", "gamma_err")
    for name in names:
        ys = [m.get(name, np.nan) for m in metrics]
        ax.loglog(values, ys, "o-", label=name)
    if np.isfinite(slope):
        ref = metrics[0]["sup_dev_l2"]
        xs = np.asarray(values, dtype=float)
        ax.loglog(xs, ref * (xs / xs[0]) ** slope, "k--",
                  label=f"slope {slope:.2f}")
    ax.set_xlabel("epsilon")
    ax.legend()
    ax.set_title("singular-limit sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_mesh_sweep(values, diffs, order, path):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    xs = np.asarray(values[:-1], dtype=float)
    diffs = np.maximum(np.asarray(diffs, dtype=float), 1e-300)
    ax.loglog(xs, diffs, "o-", label="coarse-grid difference")
    if np.isfinite(order) and len(xs) and diffs[0] > 1e-290:
        ax.loglog(xs, diffs[0] * (xs / xs[0]) ** (-order), "k--",
                  label=f"order {order:.2f}")
    ax.set_xlabel("N")
    ax.legend()
    ax.set_title("mesh self-convergence")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_csv(table, columns, path):
    """Quick-look figure for an analyze pass over a stored run.csv."""
    t = table[:, 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("E", "D", "EL", "EH"):
        j = columns.index(name)
        _semilogy_safe(ax, t, table[:, j], label=name)
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
