"""Render experiment tables as figures saved next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_assoc(rows: list[dict], path: str):
    """Three panels: recovery error, accuracy and iterations, minimum energy."""
    ns = sorted({r["n"] for r in rows})
    by = {(r["n"], r["statistic"]): r for r in rows}

    def series(field, stat):
        return [by[(n, stat)][field] for n in ns]

    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    ax = axes[0]
    ax.plot(ns, series("eta", "q50"), "o-", color="tab:blue")
    ax.fill_between(ns, series("eta", "q25"), series("eta", "q75"), alpha=0.25)
    ax.fill_between(ns, series("eta", "q05"), series("eta", "q95"), alpha=0.12)
    ax.set_xlabel("n")
    ax.set_ylabel("trajectory error")

    ax = axes[1]
    ax.plot(ns, series("accuracy_pct", "q50"), "s-", color="tab:green", label="accuracy %")
    ax.set_xlabel("n")
    ax.set_ylabel("accuracy %")
    ax2 = ax.twinx()
    ax2.plot(ns, series("iterations", "q50"), "d--", color="tab:gray", label="iterations")
    ax2.set_ylabel("iterations")

    ax = axes[2]
    ax.plot(ns, series("energy", "q50"), "o-", color="tab:red")
    ax.fill_between(ns, series("energy", "q05"), series("energy", "q95"), alpha=0.2, color="tab:red")
    ax.set_xlabel("n")
    ax.set_ylabel("minimum energy")
    _save(fig, path)


def render_crossing(rows: list[dict], path: str):
    """Mean energy gap with a one-sigma band, and the detection rate."""
    t = [r["t_fit"] for r in rows]
    mean = np.array([r["delta_e_mean"] for r in rows])
    std = np.array([r["delta_e_std"] for r in rows])
    det = [r["detect_pct"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 3.5))
    ax.axhline(0.0, color="k", lw=0.6)
    ax.plot(t, mean, "o-", color="tab:blue", label="mean energy gap")
    ax.fill_between(t, mean - std, mean + std, alpha=0.2, color="tab:blue")
    ax.set_xlabel("fit horizon")
    ax.set_ylabel("non-crossing minus crossing energy")
    ax2 = ax.twinx()
    ax2.plot(t, det, "s--", color="tab:orange", label="detection %")
    ax2.set_ylabel("crossing detection %")
    ax2.set_ylim(0, 105)
    _save(fig, path)


def render_fourier(rows: list[dict], path: str):
    """Closed-form and Monte Carlo expected penalty against n, per exponent."""
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ps = sorted({r["p"] for r in rows})
    for p in ps:
        sub = sorted((r for r in rows if r["p"] == p), key=lambda r: r["n"])
        ns = [r["n"] for r in sub]
        ax.plot(ns, [r["S_closed"] for r in sub], "-", label=f"p={p}")
        ax.errorbar(
            ns,
            [r["S_mc_mean"] for r in sub],
            yerr=[3 * r["S_mc_se"] for r in sub],
            fmt="o",
            ms=4,
            capsize=3,
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("expected curvature penalty")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_tracking(rows: list[dict], path: str):
    """Median recovery error and accuracy across subsample fractions."""
    fracs = sorted({r["fraction"] for r in rows})
    med_eta, med_acc = [], []
    for f in fracs:
        etas = sorted(r["eta"] for r in rows if r["fraction"] == f)
        accs = sorted(r["accuracy_pct"] for r in rows if r["fraction"] == f)
        med_eta.append(etas[len(etas) // 2])
        med_acc.append(accs[len(accs) // 2])
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(fracs, med_eta, "o-", color="tab:blue")
    ax.set_xlabel("sample fraction")
    ax.set_ylabel("median trajectory error")
    ax2 = ax.twinx()
    ax2.plot(fracs, med_acc, "s--", color="tab:green")
    ax2.set_ylabel("median accuracy %")
    ax2.set_ylim(0, 105)
    _save(fig, path)


def render_spline_check(rows: list[dict], path: str):
    """Per-instance solver diagnostics on a log scale."""
    idx = [r["instance"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    floor = 1e-18
    ax.semilogy(idx, [max(r["dense_rel_err"], floor) for r in rows], "o", label="vs dense solve")
    ax.semilogy(idx, [max(r["quad_rel_err"], floor) for r in rows], "s", label="penalty vs quadrature")
    ax.semilogy(idx, [max(r["perturb_gain"], floor) for r in rows], "^", label="perturbation gain")
    ax.set_xlabel("instance")
    ax.set_ylabel("relative error / gain")
    ax.legend(fontsize=8)
    _save(fig, path)
