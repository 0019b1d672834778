"""Figure rendering for benchmark output directories.

Reads the artifacts written by the benchmark runner (report.json,
histograms.json, traces/*.json) and renders a set of PNG figures next
to them: discounted-return distributions, time-to-treatment
distributions, and per-trace timelines showing the belief trajectory
above the action sequence.
"""
from __future__ import annotations

import json
import os
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .model import Action  # noqa: E402

MARGINAL_SERIES = (("p_ane", "aneurysm"), ("p_avm", "AVM"),
                   ("p_occ", "occlusion"), ("p_stroke_free", "stroke-free"))


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _policy_colors(names) -> dict:
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    return {name: cycle[i % len(cycle)] for i, name in enumerate(names)}


def _plot_return_mass(ax, edges, mass_by_policy, colors, title):
    centers = (edges[:-1] + edges[1:]) / 2.0
    for name, mass in mass_by_policy.items():
        ax.plot(centers, mass, drawstyle="steps-mid", label=name,
                color=colors[name])
    ax.set_title(title)
    ax.set_xlabel("discounted return")
    ax.set_ylabel("fraction of episodes")
    ax.legend(fontsize=8)


def render_return_figures(hist: dict, out_dir: str) -> List[str]:
    edges = np.asarray(hist["return_edges"], dtype=float)
    colors = _policy_colors(hist["return_mass"].keys())
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    _plot_return_mass(ax, edges, hist["return_mass"], colors,
                      "Discounted return by policy")
    fig.tight_layout()
    path = os.path.join(out_dir, "returns.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    _plot_return_mass(axes[0], edges, hist["return_mass_sick"], colors,
                      "Initially sick")
    _plot_return_mass(axes[1], edges, hist["return_mass_healthy"], colors,
                      "Initially healthy")
    fig.tight_layout()
    path = os.path.join(out_dir, "returns_split.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths


def render_time_to_treatment_figure(hist: dict, out_dir: str) -> str:
    mass = hist["time_to_treatment_mass"]
    names = list(mass.keys())
    colors = _policy_colors(names)
    n_bins = max((len(v) for v in mass.values()), default=0)
    x = np.arange(n_bins)
    width = 0.8 / max(len(names), 1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, name in enumerate(names):
        ax.bar(x + (i - (len(names) - 1) / 2) * width, mass[name],
               width=width, label=name, color=colors[name])
    ax.set_title("Time to treatment (initially sick episodes)")
    ax.set_xlabel("epochs until every initial condition cleared "
                  "(last bin: never cleared)")
    ax.set_ylabel("fraction of sick episodes")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "time_to_treatment.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_trace_figure(trace: dict, out_path: str) -> str:
    """Belief marginals over epochs above the action sequence."""
    steps = trace["steps"]
    ts = [s["t"] for s in steps]
    fig, (ax_belief, ax_action) = plt.subplots(
        2, 1, figsize=(8, 5.5), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]})

    for key, label in MARGINAL_SERIES:
        ax_belief.plot(ts, [s["marginals"][key] for s in steps],
                       marker=".", label=label)
    ax_belief.set_ylabel("belief at decision time")
    ax_belief.set_ylim(-0.05, 1.05)
    ax_belief.legend(fontsize=8, ncol=2)
    title = f"{trace['policy']}  (seed {trace['master_seed']}, " \
            f"episode {trace['k']}, {trace['terminal_reason']})"
    ax_belief.set_title(title)

    action_ids = [Action[s["action"]].value for s in steps]
    ax_action.step(ts, action_ids, where="post", marker="o")
    ax_action.set_yticks([a.value for a in Action])
    ax_action.set_yticklabels([a.name for a in Action], fontsize=8)
    ax_action.set_ylim(-0.5, len(Action) - 0.5)
    ax_action.set_xlabel("epoch")
    ax_action.set_xticks(ts)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_report(bench_dir: str, out_dir: Optional[str] = None) -> List[str]:
    """Render every figure for a benchmark directory; returns the paths.

    ``out_dir`` defaults to ``<bench_dir>/figures``. Trace timelines are
    rendered for whatever trace files exist under ``<bench_dir>/traces``.
    """
    hist_path = os.path.join(bench_dir, "histograms.json")
    if not os.path.exists(hist_path):
        raise FileNotFoundError(f"no histograms.json under {bench_dir!r}; "
                                "is this a benchmark output directory?")
    hist = _load_json(hist_path)
    out_dir = out_dir or os.path.join(bench_dir, "figures")
    os.makedirs(out_dir, exist_ok=True)

    paths = render_return_figures(hist, out_dir)
    paths.append(render_time_to_treatment_figure(hist, out_dir))

    trace_dir = os.path.join(bench_dir, "traces")
    if os.path.isdir(trace_dir):
        for name in sorted(os.listdir(trace_dir)):
            if not name.endswith(".json"):
                continue
            trace = _load_json(os.path.join(trace_dir, name))
            stem = name[:-len(".json")]
            out_path = os.path.join(out_dir, f"trace_{stem}.png")
            paths.append(render_trace_figure(trace, out_path))
    return paths
