"""Render sweep results to figure files next to the delimited output.

One PNG per results file: mean response against the swept axis (cluster size
or load), one line per policy with replication error bars, plus a second
panel for the helper-routing probability and its closed-form value whenever a
split policy is present.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import summarize

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

plt.rcParams.update({
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
})


def _axis_key(rows: list[dict]) -> str:
    ks = {row["k"] for row in rows}
    return "rho" if len(ks) <= 1 else "k"


def render_rows(rows: list[dict], path: str, title: str = "") -> str:
    """Aggregate rows, draw the figure and save it to ``path``."""
    x_key = _axis_key(rows)
    summary = summarize(rows, x_key)
    policies = sorted({pol for (_x, pol) in summary})
    xs = sorted({x for (x, _pol) in summary})

    with_helper = any(
        s["p_helper"] is not None and not math.isnan(s["p_helper"]) and s["p_helper"] > 0
        for s in summary.values()
    )
    n_panels = 2 if with_helper else 1
    width = 6.4
    fig, axes = plt.subplots(
        n_panels, 1, figsize=(width, width * _GOLDEN * n_panels * 0.85),
        sharex=True, squeeze=False,
    )
    ax_resp = axes[0][0]

    for pol in policies:
        pts = [(x, summary[(x, pol)]) for x in xs if (x, pol) in summary]
        ax_resp.errorbar(
            [p[0] for p in pts],
            [p[1]["mean_response"] for p in pts],
            yerr=[p[1]["mean_response_ci"] for p in pts],
            marker="o", markersize=3, capsize=2, label=pol,
        )
    ax_resp.set_ylabel("mean response time")
    ax_resp.legend()
    if title:
        ax_resp.set_title(title)

    if with_helper:
        ax_ph = axes[1][0]
        for pol in policies:
            pts = [(x, summary[(x, pol)]) for x in xs if (x, pol) in summary]
            if all(p[1]["p_helper"] in (0.0, None) for p in pts):
                continue
            ax_ph.errorbar(
                [p[0] for p in pts],
                [p[1]["p_helper"] for p in pts],
                yerr=[p[1]["p_helper_ci"] for p in pts],
                marker="s", markersize=3, capsize=2, label=f"{pol} (simulated)",
            )
        bounds = [
            (x, summary[(x, policies[0])]["p_helper_bound"])
            for x in xs
            if summary[(x, policies[0])]["p_helper_bound"] is not None
        ]
        if bounds:
            ax_ph.plot(
                [b[0] for b in bounds], [b[1] for b in bounds],
                "k--", linewidth=1, label="irrevocable split, closed form",
            )
        ax_ph.set_ylabel("helper-routing probability")
        ax_ph.legend()
        last_ax = ax_ph
    else:
        last_ax = ax_resp

    if x_key == "k":
        last_ax.set_xscale("log", base=2)
        last_ax.set_xlabel("servers k")
    else:
        last_ax.set_xlabel("load rho")

    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
