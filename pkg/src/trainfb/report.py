"""
Matplotlib renderings of the sweep tables.

The functions take the row dictionaries produced by :mod:`trainfb.sweeps`
and write one image per call; the file format follows the path suffix.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "analog": "analog",
    "tdd": "TDD",
    "digital-errorfree": "digital",
    "digital-qam": "digital w/ errors",
}
STYLES = {
    "analog": dict(color="tab:blue", marker="o"),
    "tdd": dict(color="tab:gray", marker="s"),
    "digital-errorfree": dict(color="tab:green", marker="^"),
    "digital-qam": dict(color="tab:red", marker="v"),
}


def _by_scheme(rows):
    out = defaultdict(list)
    for r in rows:
        out[r["scheme"]].append(r)
    return out


def _finish(fig, ax, path, title):
    ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_feedback_vs_budget(rows, path, *, n_t=None):
    """Feedback symbols of the best split against the total budget.

    Points of the uncoded-QAM curve are annotated with the constellation in
    use, which makes the switch to BPSK visible.
    """
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for scheme, pts in _by_scheme(rows).items():
        if scheme == "tdd":
            continue
        tt = [p["Tt"] for p in pts]
        tfb = [p["Tfb"] for p in pts]
        ax.plot(tt, tfb, label=LABELS.get(scheme, scheme), ms=3, lw=1.2, **STYLES.get(scheme, {}))
        if scheme == "digital-qam":
            last = None
            for p in pts:
                if p["M"] != last:
                    ax.annotate(f"M={p['M']}", (p["Tt"], p["Tfb"]), fontsize=7,
                                xytext=(4, -10), textcoords="offset points")
                    last = p["M"]
    ax.set_xlabel("training + feedback budget $T_t$")
    ax.set_ylabel("feedback symbols $T_{fb}$")
    title = "Optimal feedback length" + (f" ($N_t$={n_t})" if n_t else "")
    return _finish(fig, ax, path, title)


def plot_lengths_vs_blocklength(rows, path):
    """Optimal training (solid) and feedback (dashed) lengths against T."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for scheme, pts in _by_scheme(rows).items():
        t = [p["T"] for p in pts]
        style = STYLES.get(scheme, {})
        name = LABELS.get(scheme, scheme)
        ax.plot(t, [p["T1"] for p in pts], ls="-", ms=3, label=f"$T_1$ {name}", **style)
        if scheme != "tdd":
            ax.plot(t, [p["Tfb"] for p in pts], ls="--", ms=3, label=f"$T_{{fb}}$ {name}",
                    **style)
    approx = sorted({(r["T"], r["T1_approx"]) for r in rows if r.get("T1_approx")})
    if approx:
        ax.plot([a for a, _ in approx], [b for _, b in approx], "k:", lw=1,
                label=r"$\sqrt{(N_t-1)T/R^{ZF}}$")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("block length $T$")
    ax.set_ylabel("symbols")
    return _finish(fig, ax, path, "Optimal training and feedback lengths")


def plot_rate_vs_blocklength(rows, path):
    """Net rate per user against T; dotted lines are the closed-form
    approximations where they exist."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    zf = None
    for scheme, pts in _by_scheme(rows).items():
        t = [p["T"] for p in pts]
        style = STYLES.get(scheme, {})
        ax.plot(t, [p["net_rate_bits"] for p in pts], ms=3, label=LABELS.get(scheme, scheme),
                **style)
        approx = [(p["T"], p["net_rate_approx_bits"]) for p in pts
                  if p.get("net_rate_approx_bits") is not None]
        if approx:
            ax.plot([a for a, _ in approx], [b for _, b in approx], ls=":", lw=1,
                    color=style.get("color"))
        zf = pts[-1]["zf_rate_bits"]
    if zf is not None and math.isfinite(zf):
        ax.axhline(zf, color="k", lw=0.8, ls="--", label="perfect CSI")
    ax.set_xscale("log")
    ax.set_xlabel("block length $T$")
    ax.set_ylabel("net rate per user [bit/channel use]")
    ax.set_ylim(bottom=0)
    return _finish(fig, ax, path, "Net achievable rate")
