"""Scenario documents: JSON schema v1, validation, and world construction."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .ltl import atoms_of, parse_formula, to_nnf, LTLSyntaxError
from .world import (
    DEFAULT_REGION_RADIUS,
    FixedRegion,
    MacroAtom,
    SymbolicState,
    TrayGeom,
    TransitionSystem,
    Vec,
    WorldGeometry,
    check_atoms,
    ts_from_geometry,
)

SCHEMA_VERSION = "v1"


class ScenarioError(ValueError):
    """Validation failure; carries (field path, message) pairs."""

    def __init__(self, problems: List[Tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in problems))


@dataclass
class CostConfig:
    approach: str = "chain"  # 'chain' | 'home' | 'none'
    speed: float = 0.25  # end-effector m/s, for action durations
    latency_ms: float = 0.0  # artificial per-call provider latency


@dataclass
class Scenario:
    name: str
    regions: List[FixedRegion]
    trays: List[TrayGeom]
    objects: Dict[str, str]  # object id -> start region id
    macros: List[MacroAtom]
    formula_text: str
    home: Vec = (0.0, 0.0, 0.3)
    cost: CostConfig = field(default_factory=CostConfig)
    seed: int = 0
    timeout_s: float = 600.0
    tick_hz: float = 20.0

    def build_geometry(self) -> WorldGeometry:
        geo = WorldGeometry(home=self.home)
        for r in self.regions:
            geo.regions[r.id] = FixedRegion(r.id, tuple(r.center), r.radius)
        for t in self.trays:
            geo.trays[t.id] = TrayGeom(
                t.id, {d: tuple(p) for d, p in t.docks.items()}, t.dock, t.radius
            )
        for oid, rid in self.objects.items():
            geo.objects[oid] = geo.region_center(rid)
        geo.version = 0
        return geo

    def initial_state(self) -> SymbolicState:
        return SymbolicState.of(
            dict(self.objects), {t.id: t.dock for t in self.trays}
        )

    def build_ts(self) -> TransitionSystem:
        ts = ts_from_geometry(self.build_geometry(), self.initial_state(), self.macros)
        check_atoms(ts, atoms_of(self.formula()))
        return ts

    def formula(self):
        return parse_formula(self.formula_text)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "regions": [
                {"id": r.id, "center": list(r.center), "radius": r.radius}
                for r in self.regions
            ],
            "trays": [
                {
                    "id": t.id,
                    "docks": {d: list(p) for d, p in t.docks.items()},
                    "dock": t.dock,
                    "radius": t.radius,
                }
                for t in self.trays
            ],
            "objects": [{"id": o, "region": r} for o, r in self.objects.items()],
            "macros": [{"atom": m.atom, "region": m.region} for m in self.macros],
            "formula": self.formula_text,
            "home": list(self.home),
            "cost": {
                "approach": self.cost.approach,
                "speed": self.cost.speed,
                "latency_ms": self.cost.latency_ms,
            },
            "seed": self.seed,
            "timeout_s": self.timeout_s,
            "tick_hz": self.tick_hz,
        }


def _vec(value, path, problems) -> Vec:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 3
        or not all(isinstance(x, (int, float)) for x in value)
    ):
        problems.append((path, "expected [x, y, z] numbers"))
        return (0.0, 0.0, 0.0)
    return tuple(float(x) for x in value)


def scenario_from_dict(doc: Dict[str, Any]) -> Scenario:
    """Validate and build a Scenario; raises ScenarioError listing every
    offending field path."""
    problems: List[Tuple[str, str]] = []
    if not isinstance(doc, dict):
        raise ScenarioError([("", "scenario document must be an object")])
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        problems.append(("schema", f"unsupported schema {doc.get('schema')!r}"))

    name = doc.get("name", "scenario")

    regions: List[FixedRegion] = []
    seen_regions = set()
    for i, r in enumerate(doc.get("regions", [])):
        path = f"regions[{i}]"
        rid = r.get("id")
        if not rid:
            problems.append((path + ".id", "missing region id"))
            continue
        if rid in seen_regions:
            problems.append((path + ".id", f"duplicate region id {rid!r}"))
            continue
        seen_regions.add(rid)
        regions.append(
            FixedRegion(
                rid,
                _vec(r.get("center"), path + ".center", problems),
                float(r.get("radius", DEFAULT_REGION_RADIUS)),
            )
        )
    if not regions:
        problems.append(("regions", "at least one region is required"))

    trays: List[TrayGeom] = []
    for i, t in enumerate(doc.get("trays", [])):
        path = f"trays[{i}]"
        tid = t.get("id")
        if not tid:
            problems.append((path + ".id", "missing tray id"))
            continue
        if tid in seen_regions:
            problems.append((path + ".id", f"duplicate region id {tid!r}"))
            continue
        seen_regions.add(tid)
        docks = t.get("docks") or {}
        if not isinstance(docks, dict) or not docks:
            problems.append((path + ".docks", "expected a nonempty dock map"))
            docks = {}
        docks = {
            d: _vec(p, f"{path}.docks.{d}", problems) for d, p in docks.items()
        }
        dock = t.get("dock")
        if docks and dock not in docks:
            problems.append((path + ".dock", f"initial dock {dock!r} not in docks"))
            dock = next(iter(docks), None)
        trays.append(
            TrayGeom(tid, docks, dock, float(t.get("radius", DEFAULT_REGION_RADIUS)))
        )

    objects: Dict[str, str] = {}
    for i, o in enumerate(doc.get("objects", [])):
        path = f"objects[{i}]"
        oid = o.get("id")
        if not oid:
            problems.append((path + ".id", "missing object id"))
            continue
        if oid in objects:
            problems.append((path + ".id", f"duplicate object id {oid!r}"))
            continue
        rid = o.get("region")
        if rid not in seen_regions:
            problems.append((path + ".region", f"unknown region {rid!r}"))
            continue
        objects[oid] = rid

    macros: List[MacroAtom] = []
    for i, m in enumerate(doc.get("macros", [])):
        path = f"macros[{i}]"
        atom, rid = m.get("atom"), m.get("region")
        if not atom:
            problems.append((path + ".atom", "missing macro atom name"))
            continue
        if rid not in seen_regions:
            problems.append((path + ".region", f"unknown region {rid!r}"))
            continue
        macros.append(MacroAtom(atom, rid))

    formula_text = doc.get("formula", "")
    try:
        parse_formula(formula_text)
    except LTLSyntaxError as exc:
        problems.append(("formula", str(exc)))

    cost_doc = doc.get("cost", {}) or {}
    approach = cost_doc.get("approach", "chain")
    if approach not in ("chain", "home", "none"):
        problems.append(("cost.approach", f"unknown approach mode {approach!r}"))
    cost = CostConfig(
        approach=approach,
        speed=float(cost_doc.get("speed", 0.25)),
        latency_ms=float(cost_doc.get("latency_ms", 0.0)),
    )
    if cost.speed <= 0:
        problems.append(("cost.speed", "speed must be positive"))

    home = _vec(doc.get("home", [0.0, 0.0, 0.3]), "home", problems)

    if problems:
        raise ScenarioError(problems)

    return Scenario(
        name=name,
        regions=regions,
        trays=trays,
        objects=objects,
        macros=macros,
        formula_text=formula_text,
        home=home,
        cost=cost,
        seed=int(doc.get("seed", 0)),
        timeout_s=float(doc.get("timeout_s", 600.0)),
        tick_hz=float(doc.get("tick_hz", 20.0)),
    )


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
