"""Figure builders for the four supported kinds.

Every builder consumes validated CSV rows and returns a matplotlib
Figure; render() writes it to disk. Style is pinned in code so that
the same inputs always produce the same pixels.
"""

import dataclasses
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import schema

KINDS = ("theorem", "bler", "cost", "rd")

BLER_FLOOR, BLER_CEIL = 1e-4, 1.0

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.35,
    "lines.linewidth": 1.4,
    "lines.markersize": 5,
    "legend.framealpha": 0.9,
    "svg.hashsalt": "softbitq-plots",
}

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

MARKERS = ("o", "s", "^", "D", "v", "P", "X", "*")


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_paths: tuple
    out_path: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if not self.csv_paths:
            raise ValueError("at least one input CSV is required")


def _load(spec: FigureSpec) -> list:
    rows = []
    for path in spec.csv_paths:
        rows.extend(schema.read_rows(path, spec.kind))
    return rows


def _series(rows, key):
    """Group rows by a column, preserving first-appearance order."""
    groups = defaultdict(list)
    for row in rows:
        groups[row[key]].append(row)
    return groups


def _sorted_xy(rows, xcol, ycol):
    pts = sorted((schema.parse_float(r[xcol]), schema.parse_float(r[ycol]))
                 for r in rows)
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    keep = ~np.isnan(y)
    return x[keep], y[keep]


def _fig_theorem(rows):
    fig, ax = plt.subplots()
    ks = sorted({int(r["k"]) for r in rows})
    for i, k in enumerate(ks):
        sub = [r for r in rows if int(r["k"]) == k]
        depth, sigma = _sorted_xy(sub, "depth", "sigma_hat")
        _, se = _sorted_xy(sub, "depth", "sigma_se")
        color = PALETTE[i % len(PALETTE)]
        ax.errorbar(depth, sigma, yerr=3 * se, color=color,
                    marker=MARKERS[i % len(MARKERS)], capsize=3,
                    label=f"K={k} measured")
        theory = [schema.parse_float(r["sigma_theory"]) for r in sub
                  if r["depth"].strip() == "1"]
        theory = [t for t in theory if not math.isnan(t)]
        if theory:
            ax.plot([1.0], [theory[0]], linestyle="none", marker="*",
                    markersize=14, markerfacecolor=color,
                    markeredgecolor="black", label=f"K={k} theory")
    ax.set_xlabel("encoder depth (hidden layers)")
    ax.set_ylabel("latent standard deviation at initialization")
    ax.set_xticks(sorted({int(r["depth"]) for r in rows}))
    ax.legend()
    return fig


def _plot_per_method(rows, ycol, ax):
    for i, (method, sub) in enumerate(_series(rows, "method").items()):
        x, y = _sorted_xy(sub, "snr_db", ycol)
        if x.size == 0:
            continue
        ax.plot(x, y, color=PALETTE[i % len(PALETTE)],
                marker=MARKERS[i % len(MARKERS)], label=method)
    ax.set_xlabel("SNR (dB)")
    ax.legend()


def _fig_bler(rows):
    fig, ax = plt.subplots()
    _plot_per_method(rows, "bler_method", ax)
    ax.set_yscale("log")
    ax.set_ylim(BLER_FLOOR, BLER_CEIL)
    ax.set_ylabel("block error rate")
    return fig


def _fig_cost(rows):
    fig, ax = plt.subplots()
    # float rows carry no cost (empty cells) and drop out of the plot
    _plot_per_method(rows, "avg_bits_per_soft_bit", ax)
    ax.set_ylabel("storage cost (bits per soft bit)")
    ax.set_ylim(bottom=0.0)
    return fig


def _fig_rd(rows):
    fig, ax = plt.subplots()
    snrs = sorted({schema.parse_float(r["snr_db"]) for r in rows})
    for i, snr in enumerate(snrs):
        sub = [r for r in rows if schema.parse_float(r["snr_db"]) == snr]
        sub.sort(key=lambda r: schema.parse_float(r["alpha"]))
        rate = np.array([schema.parse_float(r["avg_bits_per_soft_bit"])
                         for r in sub])
        penalty = np.array([schema.parse_float(r["additive_bler"])
                            for r in sub])
        color = PALETTE[i % len(PALETTE)]
        ax.plot(rate, penalty, color=color,
                marker=MARKERS[i % len(MARKERS)], label=f"{snr:g} dB")
        for r, x, y in zip(sub, rate, penalty):
            alpha = schema.parse_float(r["alpha"])
            ax.annotate(f"alpha={alpha:g}", (x, y), textcoords="offset points",
                        xytext=(4, 4), fontsize=7, color=color)
    ax.set_xlabel("rate (bits per soft bit)")
    ax.set_ylabel("added block error rate vs unquantized")
    ax.legend()
    return fig


_BUILDERS = {
    "theorem": _fig_theorem,
    "bler": _fig_bler,
    "cost": _fig_cost,
    "rd": _fig_rd,
}


def build_figure(kind: str, rows) -> "plt.Figure":
    """Build the figure for already-validated rows (useful for tests)."""
    if kind not in _BUILDERS:
        raise ValueError(f"unknown figure kind {kind!r}")
    with plt.rc_context(STYLE):
        return _BUILDERS[kind](rows)


def render(spec: FigureSpec) -> str:
    """Render one figure to spec.out_path and return that path.

    Reads every input CSV (validating schema), never writes to them,
    and produces identical bytes for identical inputs: the style is
    fixed above and the PNG metadata is pinned.
    """
    rows = _load(spec)
    fig = build_figure(spec.kind, rows)
    try:
        fig.savefig(spec.out_path, format="png",
                    metadata={"Software": "softbitq-plots"})
    finally:
        plt.close(fig)
    return spec.out_path
