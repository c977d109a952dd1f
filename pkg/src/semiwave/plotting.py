"""Optional PNG figures for the CLI (``--figure``); CSV output is always written too."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def profile_figure(profile, path, kappa: float | None = None) -> Path:
    plt = _pyplot()
    fig, (ax, axl) = plt.subplots(1, 2, figsize=(10, 3.8))
    ax.plot(profile.t, profile.values, lw=1.5)
    if kappa is not None:
        ax.axhline(kappa, ls="--", lw=0.8, color="gray")
    ax.set_xlabel("t")
    ax.set_ylabel("phi(t)")
    ax.set_title(f"c = {profile.c:.4g}, {profile.classification or 'unclassified'}")
    pos = profile.values > 0
    axl.semilogy(profile.t[pos], profile.values[pos], lw=1.2)
    axl.set_xlabel("t")
    axl.set_title(f"tail: lambda = {profile.lam:.4g}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def evolve_figure(history, path, n_curves: int = 8) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4))
    idx = np.linspace(0, len(history.times) - 1, n_curves).astype(int)
    for i in idx:
        ax.plot(history.x, history.snapshots[i], lw=1.0, label=f"t={history.times[i]:.3g}")
    ax.set_xlabel("x" if history.kind == "rd" else "j")
    ax.set_ylabel("u")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def gmap_figure(G, path) -> Path:
    plt = _pyplot()
    s = np.linspace(0.0, G.zeta2, 1001)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(s, G(s), label="G(s)")
    ax.plot(s, s, ls="--", lw=0.8, color="gray", label="s")
    if G.zeta1 is not None:
        ax.axvline(G.zeta1, ls=":", color="tab:red", label="zeta1")
    ax.set_xlabel("s")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
