"""Figure rendering for experiment reports (PNG files next to the CSVs)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _plot_moments(report: dict, out_dir: str) -> list:
    fig, ax = plt.subplots()
    by_order = {}
    for entry in report["results"]:
        by_order.setdefault(entry["p"], []).append((entry["level"], entry["estimate"]))
    for p, pts in sorted(by_order.items()):
        pts.sort()
        ax.plot([n for n, _ in pts], [v for _, v in pts], marker="o", label=f"p = {p:g}")
    ax.set_xlabel("dyadic level n")
    ax.set_ylabel("estimated sup-process moment")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("One-point sup moments across levels")
    return [_save(fig, out_dir, "moments.png")]


def _plot_two_point(report: dict, out_dir: str) -> list:
    fig, ax = plt.subplots()
    for rep in report["reports"]:
        ks = rep["params"]["ks"]
        ax.plot(ks, rep["details"]["ratios"], marker="o", label=f"p = {rep['params']['p']:g}")
    ax.set_xlabel("pair separation exponent k  (|x - y| = 2^-k)")
    ax.set_ylabel("E|dz|^p / |x-y|^p")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("Two-point moment ratios over shrinking pairs")
    return [_save(fig, out_dir, "two_point.png")]


def _plot_convergence(report: dict, out_dir: str) -> list:
    result = report["result"]
    levels = result["levels"]
    med = [result["per_level"][str(n)]["median"] for n in levels]
    q25 = [result["per_level"][str(n)]["q25"] for n in levels]
    q75 = [result["per_level"][str(n)]["q75"] for n in levels]
    fig, ax = plt.subplots()
    ax.plot(levels, med, marker="o", label="median sup error")
    ax.fill_between(levels, q25, q75, alpha=0.25, label="interquartile range")
    ax.set_yscale("log", base=2)
    ax.set_xlabel("dyadic level n")
    ax.set_ylabel("sup error vs reference")
    ax.legend()
    ax.set_title(f"Convergence to the reference (slope {result['slope']:.2f}/level)")
    return [_save(fig, out_dir, "convergence.png")]


def _plot_flow_check(report: dict, out_dir: str) -> list:
    times = [e["time"] for e in report["per_time"]]
    margins = [e["min_injectivity_margin"] for e in report["per_time"]]
    holders = [e["max_holder_constant"] for e in report["per_time"]]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.bar([str(t) for t in times], margins)
    ax1.set_xlabel("t")
    ax1.set_ylabel("min injectivity margin")
    ax2.bar([str(t) for t in times], holders, color="tab:orange")
    ax2.set_xlabel("t")
    ax2.set_ylabel("max Hoelder constant")
    fig.suptitle("Flow map diagnostics")
    return [_save(fig, out_dir, "flow_check.png")]


def _plot_hypothesis_check(report: dict, out_dir: str) -> list:
    radii = report["diagnostics"]["radii"]
    fig, ax = plt.subplots()
    for line, ratios in report["diagnostics"]["ratios"].items():
        ax.plot(radii, ratios, marker="o", label=line)
    ax.set_xscale("log")
    ax.set_xlabel("ball radius m")
    ax.set_ylabel("profile entry / admissible power of log m")
    ax.legend(ncol=2, fontsize="small")
    ax.set_title("Growth-hypothesis ratio profiles")
    return [_save(fig, out_dir, "hypothesis_check.png")]


def _plot_bounds(report: dict, out_dir: str) -> list:
    reps = report["reports"]
    if not reps:
        return []
    names = [f"{i}:{r['name']}" for i, r in enumerate(reps)]
    lhs = np.array([r["lhs"] for r in reps], dtype=float)
    rhs = np.array([r["rhs"] for r in reps], dtype=float)
    x = np.arange(len(reps))
    fig, ax = plt.subplots(figsize=(max(6, len(reps)), 4))
    ax.bar(x - 0.2, np.abs(lhs), width=0.4, label="|LHS| estimate")
    ax.bar(x + 0.2, np.abs(rhs), width=0.4, label="|RHS| bound")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("Inequality checks: estimate vs bound")
    return [_save(fig, out_dir, "bounds.png")]


_RENDERERS = {
    "moments": _plot_moments,
    "two-point": _plot_two_point,
    "convergence": _plot_convergence,
    "flow-check": _plot_flow_check,
    "hypothesis-check": _plot_hypothesis_check,
    "bounds": _plot_bounds,
}


def render(report: dict, out_dir: str) -> list:
    """Render the figures for one experiment report; returns created paths."""
    renderer = _RENDERERS.get(report.get("experiment"))
    return renderer(report, out_dir) if renderer else []
