"""Figure rendering for experiment reports.

Figures are advisory companions to the delimited trace files; every plot is
rendered headlessly straight to the requested path (SVG works well).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({"figure.figsize": (6.4, 4.0), "font.size": 9, "axes.grid": True, "grid.alpha": 0.3})


def _trace_curve(trace):
    return [trace.initial_cost] + [r.cost for r in trace.records]


def plot_maxcut(report, path: str) -> None:
    fig, ax = plt.subplots()
    colors = {}
    for label, trace in report.runs:
        base, mode = label.rsplit("_", 1)
        color = colors.setdefault(base, f"C{len(colors)}")
        ax.plot(
            _trace_curve(trace),
            color=color,
            linestyle="-" if mode == "ideal" else "--",
            label=f"{base} ({mode})",
        )
    ax.axhline(report.aggregates["optimum"], color="k", lw=0.8, label="optimum")
    ax.set_xlabel("iteration")
    ax.set_ylabel("cut expectation")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_poly(report, path: str) -> None:
    fig, ax = plt.subplots()
    for label, trace in report.runs:
        ax.plot(_trace_curve(trace), lw=0.9, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("polynomial cost")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_disturbance(report, path: str) -> None:
    fig, ax = plt.subplots()
    curves = report.aggregates["mean_cost_curves"]
    for i, (mag, data) in enumerate(curves.items()):
        mean = np.asarray(data["mean"])
        std = np.asarray(data["std"])
        xs = np.arange(1, mean.size + 1)
        ax.plot(xs, mean, color=f"C{i}", label=f"magnitude {mag}")
        ax.fill_between(xs, mean - std, mean + std, color=f"C{i}", alpha=0.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean cut expectation")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_bound_grid(rows: list[dict], path: str) -> None:
    fig, ax = plt.subplots()
    xs = np.arange(len(rows))
    emp = [r["empirical_tail"] for r in rows]
    bnd = [min(r["analytic_bound"], 1.0) for r in rows]
    ax.bar(xs - 0.2, emp, width=0.4, label="empirical tail")
    ax.bar(xs + 0.2, bnd, width=0.4, label="analytic bound (clipped at 1)")
    ax.set_xticks(xs)
    ax.set_xticklabels(
        [f"{r['kind'][:4]}\nd={r['d']}\neps={r['epsilon']}\nm={r['m']}" for r in rows], fontsize=5
    )
    ax.set_ylabel("tail probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_training_curves(curves: dict[str, list], path: str) -> None:
    """curves maps a label to its per-episode returns."""
    fig, ax = plt.subplots()
    for label, rets in curves.items():
        rets = np.asarray(rets, dtype=float)
        if rets.size >= 8:
            k = max(1, rets.size // 20)
            smooth = np.convolve(rets, np.ones(k) / k, mode="valid")
            ax.plot(smooth, lw=0.9, label=label)
        else:
            ax.plot(rets, lw=0.9, label=label)
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_damping(demo: dict, path: str) -> None:
    fig, ax = plt.subplots()
    xs = [r["xi"] for r in demo["rows"]]
    ax.plot(xs, [r["ratio"] for r in demo["rows"]], "o-", label="measured contraction")
    ax.plot(xs, [r["bound"] for r in demo["rows"]], "s--", label="spectral bound")
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xlabel("learning rate")
    ax.set_ylabel("one-step error ratio")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
