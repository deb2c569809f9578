"""Figure rendering for the CLI report paths (written next to the data files)."""
from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def ts3_figures(built, scal_sigma, scal_closed, out_stem):
    """Profile and scalar-curvature figures for a geodesic sweep."""
    t = built.grid
    paths = []

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(t, built.f1, label="f1")
    ax.plot(t, built.f2, label="f2")
    ax.plot(t, built.psi2, label="psi2")
    ax.plot(t, built.phi5, label="phi5")
    ax.set_xlabel("t")
    ax.set_title("profile functions along the geodesic")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    path = f"{out_stem}.profile.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(t, scal_sigma, label="Scal from torsion", lw=2.0)
    ax.plot(t, scal_closed, label="Scal closed form", ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("Scal(g)")
    ax.set_title("scalar curvature")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    path = f"{out_stem}.scal.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)
    return paths


def torus_figures(report, out_stem):
    """Bar chart of the automorphism-scan residuals."""
    fields = list(report["per_field"].keys())
    res_om = [report["per_field"][f]["res_omega"] for f in fields]
    res_psi = [report["per_field"][f]["res_psi"] for f in fields]
    x = np.arange(len(fields))

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    floor = 1e-18
    ax.bar(x - 0.2, np.maximum(res_om, floor), 0.4, label="|L_X omega|")
    ax.bar(x + 0.2, np.maximum(res_psi, floor), 0.4, label="|L_X psi|")
    ax.set_yscale("log")
    ax.axhline(1e-8, color="k", ls=":", lw=1, label="preservation threshold")
    ax.set_xticks(x, [f"d/d{f}" for f in fields])
    ax.set_ylabel("sup residual over grid")
    strict = "strict" if report["strict"] else "not strict"
    ax.set_title(f"coordinate-field scan ({strict}, "
                 f"dim >= {report['dim_lower_bound']})")
    ax.legend(loc="best", fontsize=8)
    path = f"{out_stem}.scan.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return [path]
