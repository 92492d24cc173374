"""Motion-cost providers: geometric end-effector displacement estimates
standing in for inverse kinematics, an artificial-latency wrapper for
benchmarks, and the experience cache reused across replanning queries.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .world import (
    MoveObject,
    MoveRegion,
    SymbolicState,
    Vec,
    WorldGeometry,
    dist,
)

HOME_ANCHOR = "home"


def anchor_position(geometry: WorldGeometry, anchor: str) -> Vec:
    """Resolve an end-effector anchor id to a position.

    Anchors: 'home', 'r:<region>' (fixed region center), or
    'd:<tray>:<dock>' (a specific dock position).
    """
    if anchor == HOME_ANCHOR:
        return geometry.home
    kind, _, rest = anchor.partition(":")
    if kind == "r":
        return geometry.regions[rest].center
    if kind == "d":
        tray, _, dock = rest.partition(":")
        return geometry.trays[tray].docks[dock]
    raise ValueError(f"unknown anchor {anchor!r}")


def place_anchor(s_after: SymbolicState, a) -> str:
    """Anchor where the end effector rests after executing a in a state
    that produced s_after."""
    if isinstance(a, MoveObject):
        dest = a.dest
        if dest in s_after.dock_map:
            return f"d:{dest}:{s_after.dock(dest)}"
        return f"r:{dest}"
    return f"d:{a.tray}:{a.dest_dock}"


def _pick_place_points(
    geometry: WorldGeometry, s: SymbolicState, a
) -> Tuple[Vec, Vec]:
    docks = s.dock_map
    if isinstance(a, MoveObject):
        pick = geometry.region_center(s.region(a.obj), docks)
        place = geometry.region_center(a.dest, docks)
        return pick, place
    if isinstance(a, MoveRegion):
        grasp = geometry.dock_position(a.tray, s.dock(a.tray))
        dest = geometry.dock_position(a.tray, a.dest_dock)
        return grasp, dest
    raise TypeError(f"unknown action {a!r}")


def motion_cost_geometric(
    geometry: WorldGeometry,
    s: SymbolicState,
    a,
    ee_anchor: str = HOME_ANCHOR,
    approach: str = "chain",
) -> float:
    """End-effector displacement in meters: approach leg (current ee to
    the pick/grasp point) plus carry leg (pick to place, straight line
    between region/dock centers).

    approach='home' pins the ee to the rest pose for every action (path
    independent); 'chain' uses the given anchor; 'none' drops the leg.
    """
    pick, place = _pick_place_points(geometry, s, a)
    carry = dist(pick, place)
    if approach == "none":
        return carry
    if approach == "home":
        ee = geometry.home
    else:
        ee = anchor_position(geometry, ee_anchor)
    return dist(ee, pick) + carry


def min_positive_cost(geometry: WorldGeometry) -> float:
    """Lower bound on any legal action's cost: the smallest positive
    center-to-center distance over all region centers and dock positions.
    Recompute when the geometry version bumps."""
    points = [r.center for r in geometry.regions.values()]
    for t in geometry.trays.values():
        points.extend(t.docks.values())
    best = None
    for p, q in itertools.combinations(points, 2):
        d = dist(p, q)
        if d > 1e-12 and (best is None or d < best):
            best = d
    return best if best is not None else 1e-9


class GeometricCostProvider:
    """Pluggable geometric cost model; the seam where a real IK-based
    skill library would plug in."""

    def __init__(self, approach: str = "chain"):
        if approach not in ("chain", "home", "none"):
            raise ValueError(f"unknown approach mode {approach!r}")
        self.approach = approach
        self.invocations = 0

    @property
    def path_dependent(self) -> bool:
        return self.approach == "chain"

    def cost(self, geometry, s, a, ee_anchor=HOME_ANCHOR) -> float:
        self.invocations += 1
        return motion_cost_geometric(geometry, s, a, ee_anchor, self.approach)

    def c_min(self, geometry) -> float:
        return min_positive_cost(geometry)


class LatencyWrappedProvider:
    """Identical costs to the inner provider, but each call sleeps a
    fixed delay, simulating an expensive kinematics query."""

    def __init__(self, inner, delay_s: float):
        if delay_s < 0:
            raise ValueError("delay must be >= 0")
        self.inner = inner
        self.delay_s = delay_s
        self.invocations = 0
        self.total_delay_s = 0.0

    @property
    def approach(self) -> str:
        return self.inner.approach

    @property
    def path_dependent(self) -> bool:
        return self.inner.path_dependent

    def cost(self, geometry, s, a, ee_anchor=HOME_ANCHOR) -> float:
        self.invocations += 1
        if self.delay_s > 0:
            time.sleep(self.delay_s)
            self.total_delay_s += self.delay_s
        return self.inner.cost(geometry, s, a, ee_anchor)

    def c_min(self, geometry) -> float:
        return self.inner.c_min(geometry)


@dataclass
class ExperienceCache:
    """Motion costs of previously evaluated edges, keyed by (source node
    key, action key, geometry version). Stale-version entries never hit."""

    entries: Dict[Tuple[str, str, int], float] = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def lookup(self, node_key: str, action_key: str, version: int) -> Optional[float]:
        value = self.entries.get((node_key, action_key, version))
        if value is None:
            self.misses += 1
        else:
            self.hits += 1
        return value

    def store(self, node_key: str, action_key: str, version: int, cost: float):
        self.entries[(node_key, action_key, version)] = cost

    def __len__(self):
        return len(self.entries)
