"""Optional matplotlib rendering of report data to files.

Figures accompany the delimited outputs when --figures is passed on the CLI;
they are a convenience view, not part of the deterministic report contract.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_ledger(rows, path):
    """Residual and |defect| trends along the synthesis schedule (log scale)."""
    alphas = [r.alpha for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    axes[0].semilogy(alphas, [max(r.residual, 1e-300) for r in rows], "o-")
    axes[0].set_xlabel("schedule index")
    axes[0].set_ylabel("dual-norm residual")
    axes[1].semilogy(alphas, [max(abs(r.defect), 1e-300) for r in rows], "s-", color="C1")
    axes[1].set_xlabel("schedule index")
    axes[1].set_ylabel("|energy defect|")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_extraction(x, u_input, report, params, path):
    """Input trace, recovered bubble profiles, and the final residual."""
    from .bubbles import eval_trace

    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    axes[0].plot(x, u_input, "k-", lw=1, label="input trace")
    for i, b in enumerate(report.bubbles):
        axes[0].plot(x, eval_trace(b, params, x), "--", lw=1,
                     label=f"bubble {i + 1}: lam={b.lam:.3g}")
    axes[0].legend(loc="best", fontsize=8)
    axes[0].set_ylabel("u")
    if report.residual is not None:
        axes[1].plot(x, report.residual, "C3-", lw=1)
    axes[1].set_ylabel("residual")
    axes[1].set_xlabel("x")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.suptitle(f"extraction: m={report.m}, halt={report.halt_reason}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_field(fld, path, title=""):
    """Half-space heat map of a field (log-spaced vertical axis)."""
    g = fld.grid
    fig, ax = plt.subplots(figsize=(7, 4))
    Y = np.maximum(g.y, g.y[1] / 2)
    pc = ax.pcolormesh(g.x, Y, fld.samples.T, shading="auto", cmap="viridis")
    ax.set_yscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title, fontsize=10)
    fig.colorbar(pc, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_acceptance(results, path):
    """One bar per criterion, green pass / red fail."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ids = [r.cid for r in results]
    vals = [1.0 if r.passed else 0.0 for r in results]
    colors = ["#2a9d42" if v else "#c22b2b" for v in vals]
    ax.bar(range(len(ids)), [1.0] * len(ids), color=colors)
    ax.set_xticks(range(len(ids)), [str(i) for i in ids])
    ax.set_yticks([])
    ax.set_xlabel("acceptance criterion")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
