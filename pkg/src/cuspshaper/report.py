"""Figures for experiment reports, rendered straight to files.

Uses the object-oriented matplotlib API (no pyplot state), so it is safe in
headless runs and from worker processes.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

AXIS_FS = 9
LABEL_FS = 8


def _style(ax, xlabel, ylabel):
    ax.set_xlabel(xlabel, fontsize=AXIS_FS)
    ax.set_ylabel(ylabel, fontsize=AXIS_FS)
    ax.tick_params(labelsize=LABEL_FS)
    ax.grid(True, alpha=0.3, linewidth=0.5)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def plot_convergence(results, path):
    fig = Figure(figsize=(8, 3.2))
    ax1, ax2 = fig.subplots(1, 2)
    for r in results:
        trace = np.maximum(np.asarray(r.fitness_trace, dtype=float), 1.0)
        ax1.semilogy(np.arange(1, trace.size + 1), trace, lw=0.6, alpha=0.7)
    _style(ax1, "generation", "best F (floored at 1)")
    gens = [r.generations for r in results]
    ax2.hist(gens, bins=min(20, max(1, len(gens))), color="0.4")
    _style(ax2, "generations to stop", "runs")
    _save(fig, path)


def plot_degeneration(result, path, delta=None):
    fig = Figure(figsize=(8, 3.2))
    ax1, ax2 = fig.subplots(1, 2)
    n = np.arange(result.v_original.size)
    ax1.plot(n, result.v_original, "k-", lw=1, label="original")
    ax1.plot(n, result.v_degraded, "r-", lw=0.8, label="degenerated")
    _style(ax1, "sample", "input [V]")
    ax1.legend(fontsize=LABEL_FS)
    ax2.plot(n, result.s_reference, "k-", lw=1.2, label=f"reference {result.reference}")
    ax2.plot(n, result.s_damaged, "r--", lw=0.8, label="damaged")
    ax2.plot(n, result.s_restored, "b-", lw=0.8, label=f"regenerated {result.regenerated}")
    _style(ax2, "sample", "shaper output [bus units]")
    ax2.legend(fontsize=LABEL_FS - 1)
    if delta is not None:
        fig.suptitle(f"delta = {delta}", fontsize=AXIS_FS)
    _save(fig, path)


def plot_histograms(hists: dict, path, title=None):
    fig = Figure(figsize=(6, 3.2))
    ax = fig.subplots()
    styles = {"original": "k-", "damaged": "r-", "restored": "b-"}
    for name, h in hists.items():
        centers = 0.5 * (h.bin_edges[:-1] + h.bin_edges[1:])
        ax.step(centers, h.counts, styles.get(name, "-"), where="mid", lw=0.9, label=name)
    _style(ax, "peak height [bus units]", "events")
    ax.legend(fontsize=LABEL_FS)
    if title:
        ax.set_title(title, fontsize=AXIS_FS)
    _save(fig, path)


def plot_sweep(sweep, path):
    fig = Figure(figsize=(6, 3.2))
    ax = fig.subplots()
    relations = {
        "tau only": [(p.delta_tau, p.relative_error) for p in sweep.points if p.delta_amplitude == 0],
        "amplitude only": [(p.delta_amplitude, p.relative_error) for p in sweep.points if p.delta_tau == 0],
        "combined": [(p.delta_amplitude, p.relative_error) for p in sweep.points
                     if p.delta_amplitude == p.delta_tau],
    }
    for (name, xy), marker in zip(relations.items(), "o^s"):
        if xy:
            xs, ys = zip(*sorted(xy))
            ax.plot(xs, ys, marker=marker, ms=4, lw=0.8, label=name)
    others = [(p.delta_amplitude, p.relative_error) for p in sweep.points]
    ax.scatter(*zip(*others), s=6, c="0.6", zorder=0, label="all grid points")
    ax.axhline(8, color="r", lw=0.5, ls=":")
    ax.axhline(-8, color="r", lw=0.5, ls=":")
    _style(ax, "variation [%]", "peak relative error [%]")
    ax.legend(fontsize=LABEL_FS - 1)
    _save(fig, path)


def plot_waveform(samples, path, label="value"):
    fig = Figure(figsize=(6, 3))
    ax = fig.subplots()
    ax.plot(np.arange(len(samples)), samples, "k-", lw=0.9)
    _style(ax, "sample", label)
    _save(fig, path)
