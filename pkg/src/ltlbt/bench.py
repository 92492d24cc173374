"""Benchmark suites: intervention-handling statistics, full-vs-partial
construction scaling, and behavior-tree variant comparison. Pure
library; the CLI and tests drive these and format the output."""
from __future__ import annotations

import math
import random
import statistics
import time
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .costs import ExperienceCache, GeometricCostProvider
from .ltl import build_buchi, parse_formula, to_nnf
from .scenario import Scenario, scenario_from_dict
from .search import (
    GraphTooLarge,
    PartialGraph,
    dijkstra_full,
    full_graph_construct,
    plan_astar,
)
from .sim import InterventionEvent, RunConfig, run_session
from .world import SymbolicState

INTERVENTION_BENCH_KINDS = ("relocate", "add", "remove")
BT_VARIANTS = ("online_action", "online_state", "offline_action")


def ci95(values: Sequence[float]) -> float:
    """Normal-approximation 95% confidence half-width."""
    if len(values) < 2:
        return 0.0
    return 1.96 * statistics.stdev(values) / math.sqrt(len(values))


def aggregate(values: Sequence[float]) -> Dict[str, float]:
    return {
        "mean": statistics.mean(values),
        "median": statistics.median(values),
        "ci95": ci95(values),
    }


# -- intervention benchmark (Table-style medians) --------------------------


def intervention_scenario(kind: str) -> Dict[str, object]:
    """Two-region pick-and-place world. The remove suite carries
    bystander objects so removal never deletes a goal object."""
    objects = [{"id": f"o{i}", "region": "r1"} for i in (1, 2, 3)]
    if kind == "remove":
        objects += [{"id": "o4", "region": "r1"}, {"id": "o5", "region": "r2"}]
    return {
        "schema": "v1",
        "name": f"bench-{kind}",
        "regions": [
            {"id": "r1", "center": [0.0, 0.0, 0.0]},
            {"id": "r2", "center": [0.6, 0.0, 0.0]},
        ],
        "objects": objects,
        "formula": "F (o1r2 & o2r2 & o3r2)",
        "cost": {"approach": "chain", "speed": 0.25},
    }


def intervention_script(
    kind: str, seed: int, window: Tuple[float, float] = (1.0, 10.0)
) -> List[InterventionEvent]:
    rng = random.Random((seed << 8) ^ 0x5EED)
    t = rng.uniform(*window)
    if kind == "relocate":
        obj = rng.choice(["o1", "o2", "o3"])
        region = rng.choice(["r1", "r2"])
        return [InterventionEvent.of(t, "relocate_object", obj=obj, region=region)]
    if kind == "add":
        region = rng.choice(["r1", "r2"])
        return [InterventionEvent.of(t, "add_object", obj="ox", region=region)]
    if kind == "remove":
        obj = rng.choice(["o4", "o5"])
        return [InterventionEvent.of(t, "remove_object", obj=obj)]
    raise ValueError(f"unknown intervention benchmark kind {kind!r}")


def bench_interventions(
    kinds: Iterable[str] = INTERVENTION_BENCH_KINDS,
    seeds: Iterable[int] = range(30),
    planner: str = "astar_exp",
    graph: str = "partial",
    bt: str = "online_action",
    provider_latency_ms: float = 0.0,
) -> List[Dict[str, object]]:
    """One row per (kind, seed) with the session's headline metrics."""
    rows = []
    for kind in kinds:
        doc = intervention_scenario(kind)
        for seed in seeds:
            scenario = scenario_from_dict(doc)
            config = RunConfig(planner=planner, graph=graph, bt=bt,
                               provider_latency_ms=provider_latency_ms, seed=seed)
            session = run_session(scenario, config, intervention_script(kind, seed))
            m = session.metrics
            rows.append({
                "kind": kind,
                "seed": seed,
                "planner": planner,
                "bt": bt,
                "success": m.success,
                "init_plan_time_s": m.init_plan_time_s,
                "total_replan_time_s": m.total_replan_time_s,
                "ts_reconstruct_time_s": m.ts_reconstruct_time_s,
                "replan_count": m.replan_count,
                "recovery_count": m.recovery_count,
                "completion_time_s": m.completion_time_s,
            })
    return rows


def summarize_interventions(rows: List[Dict[str, object]]) -> List[Dict[str, object]]:
    out = []
    for kind in sorted({r["kind"] for r in rows}):
        sub = [r for r in rows if r["kind"] == kind]
        summary: Dict[str, object] = {
            "kind": kind,
            "runs": len(sub),
            "successes": sum(1 for r in sub if r["success"]),
        }
        for col in ("init_plan_time_s", "total_replan_time_s",
                    "replan_count", "completion_time_s"):
            agg = aggregate([float(r[col]) for r in sub])
            summary[f"{col}_mean"] = agg["mean"]
            summary[f"{col}_median"] = agg["median"]
            summary[f"{col}_ci95"] = agg["ci95"]
        out.append(summary)
    return out


def format_intervention_table(summaries: List[Dict[str, object]]) -> str:
    header = (f"{'kind':<10}{'success':<10}{'init[s]':<12}{'replan[s]':<12}"
              f"{'#replan (med)':<16}{'completion[s]':<14}")
    lines = [header, "-" * len(header)]
    for s in summaries:
        lines.append(
            f"{s['kind']:<10}"
            f"{s['successes']}/{s['runs']:<7}"
            f"{s['init_plan_time_s_mean']:<12.3f}"
            f"{s['total_replan_time_s_mean']:<12.3f}"
            f"{s['replan_count_mean']:.2f} ({s['replan_count_median']:.0f})"
            f"{'':<6}"
            f"{s['completion_time_s_mean']:<14.2f}"
        )
    return "\n".join(lines)


# -- construction scaling ---------------------------------------------------


def random_scaling_scenario(
    n_objects: int, seed: int, n_regions: int = 5
) -> Scenario:
    """n_regions randomly placed regions (min separation keeps perception
    unambiguous), all objects starting in r1, goal: keep every object in
    r2 eventually and forever."""
    rng = random.Random((seed << 8) ^ 0xC0DE)
    centers: List[Tuple[float, float, float]] = []
    while len(centers) < n_regions:
        c = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0)
        if all(math.dist(c, o) >= 0.45 for o in centers):
            centers.append(c)
    doc = {
        "schema": "v1",
        "name": f"scaling-{n_objects}-{seed}",
        "regions": [
            {"id": f"r{i + 1}", "center": list(c)} for i, c in enumerate(centers)
        ],
        "objects": [{"id": f"o{i + 1}", "region": "r1"} for i in range(n_objects)],
        "formula": "FG all_obj_in_r2",
        "macros": [{"atom": "all_obj_in_r2", "region": "r2"}],
        "cost": {"approach": "home", "speed": 0.25},
    }
    return scenario_from_dict(doc)


def scaling_point(scenario: Scenario, max_nodes: int = 10 ** 6) -> Dict[str, object]:
    """Time construction + replanning on one instance: full graph plus
    Dijkstra against lazy A*. The query is a replanning one — all
    objects already at the goal region except o1 — so the lazy
    construction only grows the part of the product the query touches,
    while the full construction always materializes everything."""
    ts = scenario.build_ts()
    ba = build_buchi(to_nnf(parse_formula(scenario.formula_text)))
    geometry = scenario.build_geometry()
    replan_start = SymbolicState.of(
        {o: ("r1" if o == "o1" else "r2") for o in ts.objects}
    )

    row: Dict[str, object] = {
        "state_count": ts.state_space_size(),
        "ba_states": len(ba.states),
    }
    provider = GeometricCostProvider("home")
    try:
        t0 = time.perf_counter()
        full = full_graph_construct(ts, ba, geometry, provider, max_nodes=max_nodes)
        plan_full = dijkstra_full(full, ts, ba, start_state=replan_start)
        row["full_time_s"] = time.perf_counter() - t0
        row["node_count"] = full.node_count
        row["full_cost"] = plan_full.cost
    except GraphTooLarge as exc:
        row["full_time_s"] = None
        row["node_count"] = ts.state_space_size() * len(ba.states)
        row["full_error"] = str(exc)

    provider = GeometricCostProvider("home")
    t0 = time.perf_counter()
    plan_partial = plan_astar(
        ts, ba, geometry, provider, ExperienceCache(),
        start_state=replan_start,
        graph=PartialGraph(ts.geometry_version, provider.path_dependent),
    )
    row["partial_time_s"] = time.perf_counter() - t0
    row["partial_cost"] = plan_partial.cost
    row["partial_nodes_expanded"] = plan_partial.stats.nodes_expanded
    return row


def bench_scaling(
    object_counts: Iterable[int] = (2, 3, 4, 5, 6),
    geometries: int = 10,
    n_regions: int = 5,
    max_nodes: int = 10 ** 6,
) -> List[Dict[str, object]]:
    rows = []
    for n_objects in object_counts:
        for g in range(geometries):
            scenario = random_scaling_scenario(n_objects, g, n_regions)
            row = scaling_point(scenario, max_nodes=max_nodes)
            row.update({"n_objects": n_objects, "geometry_seed": g})
            rows.append(row)
    return rows


def summarize_scaling(rows: List[Dict[str, object]]) -> List[Dict[str, object]]:
    out = []
    for n in sorted({r["n_objects"] for r in rows}):
        sub = [r for r in rows if r["n_objects"] == n]
        full = [r["full_time_s"] for r in sub if r["full_time_s"] is not None]
        partial = [r["partial_time_s"] for r in sub]
        entry = {
            "n_objects": n,
            "node_count": sub[0]["node_count"],
            "samples": len(sub),
            "partial_time_mean": statistics.mean(partial),
            "partial_time_std": statistics.pstdev(partial),
        }
        if full:
            entry["full_time_mean"] = statistics.mean(full)
            entry["full_time_std"] = statistics.pstdev(full)
        else:
            entry["full_time_mean"] = None
            entry["full_time_std"] = None
        out.append(entry)
    return out


# -- behavior-tree variant benchmark ---------------------------------------


def bt_case(seed: int) -> Tuple[Dict[str, object], List[InterventionEvent]]:
    """Goal moves o1..o3; a bystander relocation (irrelevant to any
    action condition) plus an add-object force one replanning episode."""
    doc = {
        "schema": "v1",
        "name": "bt-variants",
        "regions": [
            {"id": "r1", "center": [0.0, 0.0, 0.0]},
            {"id": "r2", "center": [0.6, 0.0, 0.0]},
        ],
        "objects": [
            {"id": "o1", "region": "r1"},
            {"id": "o2", "region": "r1"},
            {"id": "o3", "region": "r1"},
            {"id": "o4", "region": "r2"},
        ],
        "formula": "F (o1r2 & o2r2 & o3r2)",
        "cost": {"approach": "chain", "speed": 0.25},
    }
    rng = random.Random((seed << 8) ^ 0xB7)
    script = [
        InterventionEvent.of(rng.uniform(1.0, 4.0), "relocate_object",
                             obj="o4", region="r1"),
        InterventionEvent.of(rng.uniform(5.0, 8.0), "relocate_object",
                             obj="o4", region="r2"),
        InterventionEvent.of(rng.uniform(9.0, 11.0), "add_object",
                             obj="o5", region="r2"),
    ]
    return doc, script


def bench_bt(
    seeds: Iterable[int] = range(10),
    variants: Iterable[str] = BT_VARIANTS,
) -> List[Dict[str, object]]:
    rows = []
    for seed in seeds:
        doc, script = bt_case(seed)
        for variant in variants:
            scenario = scenario_from_dict(doc)
            session = run_session(scenario, RunConfig(bt=variant, seed=seed), script)
            m = session.metrics
            rows.append({
                "variant": variant,
                "seed": seed,
                "success": m.success,
                "bt_change_count": m.bt_change_count,
                "replan_count": m.replan_count,
                "recovery_count": m.recovery_count,
                "completion_time_s": m.completion_time_s,
            })
    return rows


def summarize_bt(rows: List[Dict[str, object]]) -> List[Dict[str, object]]:
    out = []
    for variant in sorted({r["variant"] for r in rows}):
        sub = [r for r in rows if r["variant"] == variant]
        out.append({
            "variant": variant,
            "runs": len(sub),
            "successes": sum(1 for r in sub if r["success"]),
            "bt_changes_mean": statistics.mean(
                [r["bt_change_count"] for r in sub]),
            "completion_time_mean": statistics.mean(
                [r["completion_time_s"] for r in sub]),
        })
    return out
