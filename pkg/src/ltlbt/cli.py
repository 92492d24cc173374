"""Command-line entry points: one-shot planning, headless session runs,
and the benchmark suites that reproduce the evaluation tables at desk
scale.

Exit codes: 0 success, 1 IO/validation error, 2 no plan exists,
3 session timeout.

Output files (all under --out):
  plan.json    one-shot plan: schema, actions, cost, length, planner stats
  stats.json   planner statistics for the one-shot plan
  trace.jsonl  session event trace, one JSON object per line
  metrics.csv  one row per session (documented header row)
  curves.csv   scaling benchmark data points
"""
from __future__ import annotations

import csv
import json
import os
import sys

import click

from . import bench
from .scenario import ScenarioError, load_scenario
from .sim import RunConfig, Session, load_script, run_session

_PLANNERS = click.Choice(["astar-exp", "astar", "dijkstra"])
_GRAPHS = click.Choice(["partial", "full"])
_BTS = click.Choice(["online-action", "online-state", "offline-action"])


def _dashes_to_config(planner: str, graph: str, bt: str, **kw) -> RunConfig:
    return RunConfig(planner=planner.replace("-", "_"), graph=graph,
                     bt=bt.replace("-", "_"), **kw)


def _write_json(out: str, name: str, payload):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def _write_csv(out: str, name: str, rows):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return path


def _load_scenario_or_exit(path: str):
    try:
        return load_scenario(path)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: cannot read scenario: {exc}", err=True)
        sys.exit(1)
    except ScenarioError as exc:
        click.echo(f"error: invalid scenario: {exc}", err=True)
        sys.exit(1)


@click.group()
def main():
    """Reactive task planning toolkit."""


@main.command("plan")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--planner", type=_PLANNERS, default="astar-exp", show_default=True)
@click.option("--graph", type=_GRAPHS, default="partial", show_default=True)
@click.option("--provider-latency-ms", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_plan(scenario_path, planner, graph, provider_latency_ms, seed, out):
    """Compute one plan and write plan.json + stats.json."""
    scenario = _load_scenario_or_exit(scenario_path)
    config = _dashes_to_config(planner, graph, "online-action",
                               provider_latency_ms=provider_latency_ms, seed=seed)
    try:
        session = Session(scenario, config)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if not session.initial_plan():
        click.echo("no plan exists for this scenario", err=True)
        sys.exit(2)
    plan = session.plan
    payload = {
        "schema": "v1",
        "scenario": scenario.name,
        "actions": plan.action_keys,
        "cost": plan.cost,
        "length": len(plan.steps),
        "stats": plan.stats.to_dict(),
    }
    path = _write_json(out, "plan.json", payload)
    _write_json(out, "stats.json", {"schema": "v1", **plan.stats.to_dict()})
    click.echo(f"plan: {len(plan.steps)} actions, cost {plan.cost:.4f} -> {path}")


_METRIC_COLUMNS = (
    "scenario", "planner", "graph", "bt", "seed", "success", "reason",
    "init_plan_time_s", "total_replan_time_s", "ts_reconstruct_time_s",
    "replan_count", "recovery_count", "bt_change_count",
    "completion_time_s", "provider_invocations", "cache_hits", "ticks",
)


def _metrics_row(scenario, config: RunConfig, metrics) -> dict:
    row = {
        "scenario": scenario.name,
        "planner": config.planner,
        "graph": config.graph,
        "bt": config.bt,
        "seed": config.seed,
    }
    row.update({k: v for k, v in metrics.to_dict().items()
                if k in _METRIC_COLUMNS})
    return {k: row[k] for k in _METRIC_COLUMNS}


@main.command("run")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--script", "script_path", type=click.Path(), default=None)
@click.option("--planner", type=_PLANNERS, default="astar-exp", show_default=True)
@click.option("--graph", type=_GRAPHS, default="partial", show_default=True)
@click.option("--bt", type=_BTS, default="online-action", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--provider-latency-ms", type=float, default=0.0, show_default=True)
@click.option("--timeout-s", type=float, default=None)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_run(scenario_path, script_path, planner, graph, bt, seed,
            provider_latency_ms, timeout_s, out):
    """Run one headless session; write trace.jsonl + metrics.csv."""
    scenario = _load_scenario_or_exit(scenario_path)
    if timeout_s is not None:
        scenario.timeout_s = timeout_s
    script = []
    if script_path is not None:
        try:
            script = load_script(script_path)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            click.echo(f"error: cannot read script: {exc}", err=True)
            sys.exit(1)
    config = _dashes_to_config(planner, graph, bt, seed=seed,
                               provider_latency_ms=provider_latency_ms)
    session = run_session(scenario, config, script)

    os.makedirs(out, exist_ok=True)
    trace_path = os.path.join(out, "trace.jsonl")
    with open(trace_path, "w") as fh:
        for e in session.trace:
            fh.write(json.dumps(e, separators=(",", ":")) + "\n")
    _write_csv(out, "metrics.csv", [_metrics_row(scenario, config, session.metrics)])

    m = session.metrics
    click.echo(f"session {'succeeded' if m.success else 'failed: ' + m.reason}; "
               f"replans {m.replan_count}, completion {m.completion_time_s:.2f} s "
               f"-> {trace_path}")
    if not m.success:
        sys.exit(3 if m.reason == "timeout" else 2)


@main.command("bench-interventions")
@click.option("--seeds", type=int, default=30, show_default=True)
@click.option("--planner", type=_PLANNERS, default="astar-exp", show_default=True)
@click.option("--bt", type=_BTS, default="online-action", show_default=True)
@click.option("--provider-latency-ms", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_bench_interventions(seeds, planner, bt, provider_latency_ms, out):
    """Intervention-handling statistics over relocate/add/remove suites."""
    rows = bench.bench_interventions(
        seeds=range(seeds),
        planner=planner.replace("-", "_"),
        bt=bt.replace("-", "_"),
        provider_latency_ms=provider_latency_ms,
    )
    path = _write_csv(out, "metrics.csv", rows)
    summaries = bench.summarize_interventions(rows)
    _write_json(out, "summary.json", {"schema": "v1", "rows": summaries})
    click.echo(bench.format_intervention_table(summaries))
    click.echo(f"-> {path}")


@main.command("bench-scaling")
@click.option("--max-objects", type=int, default=6, show_default=True)
@click.option("--geometries", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_bench_scaling(max_objects, geometries, out):
    """Full vs partial construction timing across state-space sizes."""
    rows = bench.bench_scaling(object_counts=range(2, max_objects + 1),
                               geometries=geometries)
    path = _write_csv(out, "curves.csv", rows)
    for s in bench.summarize_scaling(rows):
        full = ("-" if s["full_time_mean"] is None
                else f"{s['full_time_mean']:.3f}s")
        click.echo(f"|O|={s['n_objects']}  nodes={s['node_count']:<7} "
                   f"partial={s['partial_time_mean']:.3f}s full={full}")
    click.echo(f"-> {path}")


@main.command("bench-bt")
@click.option("--seeds", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_bench_bt(seeds, out):
    """Compare BT reconfiguration variants on scripted interventions."""
    rows = bench.bench_bt(seeds=range(seeds))
    path = _write_csv(out, "metrics.csv", rows)
    for s in bench.summarize_bt(rows):
        click.echo(f"{s['variant']:<16} success {s['successes']}/{s['runs']}  "
                   f"bt-changes {s['bt_changes_mean']:.2f}  "
                   f"completion {s['completion_time_mean']:.2f}s")
    click.echo(f"-> {path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def cmd_serve(host, port):
    """Serve the session API over HTTP."""
    from .service import main as serve_main

    serve_main(host=host, port=port)


if __name__ == "__main__":
    main()
