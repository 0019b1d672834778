"""Command-line interface: benchmarks, single episodes, figures, service.

Shared options: ``--config`` points at a parameter TOML file (packaged
defaults otherwise) whose optional ``[solver]`` section seeds the search
configuration; ``--seed`` is the master seed that makes every run
replayable.
"""
from __future__ import annotations

import json
import sys
from typing import Optional

import click

from .episodes import run_episode, trace_from_dict, trace_to_dict
from .harness import episode_row, run_benchmark, time_to_treatment
from .model import StrokeModel, load_params, load_raw_config
from .policies import POLICY_NAMES
from .solver import SolverConfig


def _load(config_path: Optional[str]):
    raw = load_raw_config(config_path)
    params = load_params(config_path)
    solver_config = SolverConfig.from_dict(raw.get("solver", {}))
    return params, solver_config


def _fmt(value, digits=2) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


@click.group()
def main() -> None:
    """Stroke admission planning: simulate, benchmark, serve."""


@main.command()
@click.option("--policy", "policies", multiple=True,
              type=click.Choice(POLICY_NAMES),
              help="Policy to benchmark; repeatable. Default: all.")
@click.option("--episodes", default=1000, show_default=True,
              help="Paired episodes per policy.")
@click.option("--seed", default=0, show_default=True,
              help="Master seed shared by every policy.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Parameter TOML file.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for report.json, episodes.csv, traces/.")
@click.option("--workers", default=1, show_default=True,
              help="Worker processes; output is identical for any count.")
@click.option("--trials", default=None, type=int,
              help="Search trials per decision (pinned to 12 when omitted).")
@click.option("--no-traces", is_flag=True, default=False,
              help="Skip the showcase trace files.")
def bench(policies, episodes, seed, config_path, out_dir, workers, trials,
          no_traces) -> None:
    """Run paired episodes per policy and write benchmark artifacts."""
    params, solver_config = _load(config_path)
    if trials is not None:
        solver_config = solver_config.with_overrides({"max_trials": trials})
    names = tuple(policies) if policies else POLICY_NAMES
    result = run_benchmark(params=params, policy_names=names,
                           episodes=episodes, master_seed=seed,
                           out_dir=out_dir, workers=workers,
                           solver_config=solver_config,
                           write_traces=not no_traces)
    header = (f"{'policy':<14} {'episodes':>8} {'failed':>6} "
              f"{'mean_return':>12} {'std':>10} {'recovery':>8} "
              f"{'ttt_mean':>8}")
    click.echo(header)
    for name, stats in result.report.policies.items():
        click.echo(f"{name:<14} {stats.episodes:>8} {stats.failed:>6} "
                   f"{_fmt(stats.mean_return):>12} "
                   f"{_fmt(stats.std_return):>10} "
                   f"{_fmt(stats.recovery_rate, 4):>8} "
                   f"{_fmt(stats.ttt_mean):>8}")
    click.echo(f"artifacts written to {result.out_dir}")
    if result.failed:
        click.echo(f"error: {result.failed} episode(s) failed", err=True)
        sys.exit(1)


@main.command()
@click.option("--policy", type=click.Choice(POLICY_NAMES),
              default="expert-hosp", show_default=True)
@click.option("--seed", default=0, show_default=True, help="Master seed.")
@click.option("--k", default=0, show_default=True,
              help="Episode index under the master seed.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Write the full trace as JSON to this path.")
@click.option("--trials", default=None, type=int,
              help="Pin search trials per decision; otherwise the config's "
                   "wall-clock budget applies and reruns may differ.")
def episode(policy, seed, k, config_path, trace_path, trials) -> None:
    """Simulate one episode and print its timeline."""
    params, solver_config = _load(config_path)
    if trials is not None:
        solver_config = solver_config.with_overrides(
            {"max_trials": trials, "time_budget_ms": 1e9})
    model = StrokeModel(params)
    trace = run_episode(model, policy, seed, k, solver_config)
    _print_trace(trace, params.horizon)
    if trace_path:
        with open(trace_path, "w") as fh:
            json.dump(trace_to_dict(trace), fh, indent=2)
            fh.write("\n")
        click.echo(f"trace written to {trace_path}")
    if trace.failed:
        sys.exit(1)


@main.command()
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True), help="Trace JSON to display.")
def inspect(trace_path) -> None:
    """Print the timeline of a previously written trace file."""
    with open(trace_path) as fh:
        trace = trace_from_dict(json.load(fh))
    horizon = max((s.t for s in trace.steps), default=0) + 1
    _print_trace(trace, horizon)


def _print_trace(trace, horizon) -> None:
    init = trace.initial_state
    flags = [name for name, on in (("aneurysm", init.is_ane),
                                   ("avm", init.is_avm),
                                   ("occlusion", init.is_occ)) if on]
    click.echo(f"policy={trace.policy} seed={trace.master_seed} k={trace.k}")
    click.echo("admitted with: " + (", ".join(flags) or "no condition"))
    click.echo(f"{'t':>3} {'action':<6} {'observation':<26} {'reward':>9} "
               f"{'p_ane':>6} {'p_avm':>6} {'p_occ':>6} {'p_free':>6}")
    for step in trace.steps:
        obs = step.observation
        if hasattr(obs, "siriraj"):
            obs_text = f"{obs.ct.value} siriraj={obs.siriraj:+d}"
        else:
            obs_text = (f"dsa ane={int(obs.pred_ane)} "
                        f"avm={int(obs.pred_avm)} occ={int(obs.pred_occ)}")
        m = step.marginals
        click.echo(f"{step.t:>3} {step.action.name:<6} {obs_text:<26} "
                   f"{step.reward:>9.1f} {m.p_ane:>6.3f} {m.p_avm:>6.3f} "
                   f"{m.p_occ:>6.3f} {m.p_stroke_free:>6.3f}")
    click.echo(f"terminal: {trace.terminal_reason}"
               f" penalty={trace.terminal_penalty:.1f}"
               f" discounted_return={trace.discounted_return:.2f}")
    if trace.failed:
        click.echo(f"failed: {trace.failed}", err=True)
    else:
        row = episode_row(trace, horizon)
        if row["initially_sick"]:
            ttt = time_to_treatment(trace, horizon)
            click.echo(f"recovered={row['recovered']}"
                       f" time_to_treatment={ttt}")


@main.command()
@click.option("--bench", "bench_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Benchmark output directory.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Figure directory (default: <bench>/figures).")
def report(bench_dir, out_dir) -> None:
    """Render figures from a benchmark output directory."""
    from .report import render_report

    paths = render_report(bench_dir, out_dir)
    for path in paths:
        click.echo(path)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--db", "db_path", type=click.Path(), default=None,
              help="Sqlite session store (default: in-memory).")
@click.option("--ttl", "ttl_seconds", type=float, default=None,
              help="Session idle expiry in seconds.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
def serve(host, port, db_path, ttl_seconds, config_path) -> None:
    """Run the session service."""
    import uvicorn

    from .service import create_app

    app = create_app(params_path=config_path, db_path=db_path,
                     ttl_seconds=ttl_seconds)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
