"""Matplotlib renderings written next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def study_figure(table, path):
    """Log-log error against dx with the fitted rate line."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    dxs, errs = table.dxs(), table.errors()
    ax.loglog(dxs, np.maximum(errs, 1e-300), "o-", label=table.kind)
    if table.rate is not None:
        ref = errs[-1] * (dxs / dxs[-1]) ** table.rate
        ax.loglog(dxs, ref, "k--", lw=0.8,
                  label=f"slope {table.rate:.2f} ± {table.rate_stderr:.2f}")
    ax.set_xlabel("dx")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def run_figure(state, path):
    """Final profiles plus monitor traces of one run."""
    mesh = state.mesh
    fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.2))
    k_last = state.n_levels - 1
    u = state.u_at(k_last)
    axes[0].plot(u.xs(), u.values, ".-", ms=3)
    axes[0].set_title(f"u at t = {mesh.t(k_last):.4g}")
    axes[0].set_xlabel("x")
    if state.v_history:
        v = state.v_history[k_last]
        axes[1].plot(v.xs(), v.values, ".-", ms=3, color="tab:orange")
        axes[1].set_title("v at final level")
        axes[1].set_xlabel("x")
    ks = [r.k for r in state.monitors]
    axes[2].plot(ks, [r.max_slope for r in state.monitors], label="max |H_p|")
    axes[2].axhline(state.cfl.slope_bound, color="r", ls="--", lw=0.8, label="slope bound")
    axes[2].plot(ks, [abs(r.mass) for r in state.monitors], label="|mass|")
    axes[2].set_xlabel("k")
    axes[2].legend(fontsize=7)
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def walk_figure(ensemble, path):
    """Occupation fan and dispersion moments against the bound."""
    cone, mesh = ensemble.cone, ensemble.cone.mesh
    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.4))
    for k, p in enumerate(ensemble.occupation):
        xs = mesh.x(cone.level_ms(k))
        axes[0].scatter(xs, np.full_like(xs, mesh.t(k)), s=200 * np.asarray(p) + 1,
                        c="tab:blue", alpha=0.5)
    axes[0].set_xlabel("x")
    axes[0].set_ylabel("t")
    axes[0].set_title("occupation probabilities")
    d = ensemble.dispersion
    ks = np.arange(cone.depth + 1)
    axes[1].plot(ks, d.mean_sq_gap, "o-", ms=3, label="mean square gap")
    axes[1].plot(ks, d.mean_abs_gap**2, "s-", ms=3, label="(mean abs gap)^2")
    axes[1].plot(ks, d.bound, "k--", lw=0.8, label="bound")
    axes[1].set_xlabel("k")
    axes[1].legend(fontsize=7)
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def characteristic_figure(char, line_xs, path):
    """Expected walk against the straight reference line."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(char.times, char.expected_xs, "o-", ms=3, label="expected walk")
    if line_xs is not None:
        ax.plot(char.times, line_xs, "k--", lw=0.9, label="exact minimizer")
    if np.any(char.stderr > 0):
        ax.fill_between(char.times, char.expected_xs - 2 * char.stderr,
                        char.expected_xs + 2 * char.stderr, alpha=0.2)
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
