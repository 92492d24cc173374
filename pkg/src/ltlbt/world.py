"""Manipulation world model: geometry, symbolic states, actions, and the
transition system the planner searches over.

States assign every object to a region (or to the gripper pseudo-region
`rhand` at the execution layer); movable regions (trays) additionally
carry a current dock. The planner's state space excludes held-object
states, so its cardinality is |R|^|O| times the product of dock counts.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple

Vec = Tuple[float, float, float]

RHAND = "rhand"

DEFAULT_REGION_RADIUS = 0.15


class NoRegion(Exception):
    """Position lies outside every region's radius."""


class IllegalAction(Exception):
    pass


class UnknownAtom(Exception):
    pass


class InconsistentObservation(Exception):
    pass


def dist(a: Vec, b: Vec) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


# -- geometry ------------------------------------------------------------


@dataclass
class FixedRegion:
    id: str
    center: Vec
    radius: float = DEFAULT_REGION_RADIUS


@dataclass
class TrayGeom:
    id: str
    docks: Dict[str, Vec]
    dock: str  # current dock
    radius: float = DEFAULT_REGION_RADIUS

    @property
    def center(self) -> Vec:
        return self.docks[self.dock]


@dataclass
class WorldGeometry:
    """Continuous layout: region centers, tray docks, object positions.

    The version counter increments on any add/remove/dock-set change;
    downstream caches are keyed by it. Moving an object or the tray
    between existing docks does not bump it (centers are unchanged).
    """

    regions: Dict[str, FixedRegion] = field(default_factory=dict)
    trays: Dict[str, TrayGeom] = field(default_factory=dict)
    objects: Dict[str, Vec] = field(default_factory=dict)
    home: Vec = (0.0, 0.0, 0.3)
    version: int = 0

    def region_ids(self) -> List[str]:
        return sorted(list(self.regions) + list(self.trays))

    def region_center(self, rid: str, tray_docks: Optional[Dict[str, str]] = None) -> Vec:
        if rid in self.regions:
            return self.regions[rid].center
        tray = self.trays[rid]
        if tray_docks and rid in tray_docks:
            return tray.docks[tray_docks[rid]]
        return tray.center

    def dock_position(self, tray_id: str, dock: str) -> Vec:
        return self.trays[tray_id].docks[dock]

    def bump(self):
        self.version += 1

    def add_object(self, oid: str, pos: Vec):
        if oid in self.objects:
            raise ValueError(f"duplicate object {oid}")
        self.objects[oid] = pos
        self.bump()

    def remove_object(self, oid: str):
        if oid not in self.objects:
            raise KeyError(oid)
        del self.objects[oid]
        self.bump()

    def add_tray(self, tray: TrayGeom):
        if tray.id in self.trays or tray.id in self.regions:
            raise ValueError(f"duplicate region {tray.id}")
        self.trays[tray.id] = tray
        self.bump()

    def remove_region(self, rid: str):
        if rid in self.regions:
            del self.regions[rid]
        elif rid in self.trays:
            del self.trays[rid]
        else:
            raise KeyError(rid)
        self.bump()

    def set_tray_dock(self, tray_id: str, dock: str):
        # tray motion between existing docks; centers unchanged, no bump
        self.trays[tray_id].dock = dock


def region_of(geometry: WorldGeometry, pos: Vec) -> str:
    """Nearest region center within its radius; lexicographic tie-break.

    Raises NoRegion when pos is outside every region's radius.
    """
    best: Optional[Tuple[float, str]] = None
    for rid in geometry.region_ids():
        if rid in geometry.regions:
            center, radius = geometry.regions[rid].center, geometry.regions[rid].radius
        else:
            tray = geometry.trays[rid]
            center, radius = tray.center, tray.radius
        d = dist(pos, center)
        if d <= radius and (best is None or d < best[0] - 1e-12):
            best = (d, rid)
    if best is None:
        raise NoRegion(f"position {pos} outside every region")
    return best[1]


# -- symbolic state ------------------------------------------------------


@dataclass(frozen=True)
class SymbolicState:
    """Immutable object->region assignment plus tray dock choices."""

    assignment: Tuple[Tuple[str, str], ...]  # sorted (object, region|rhand)
    tray_docks: Tuple[Tuple[str, str], ...] = ()  # sorted (tray, dock)

    @staticmethod
    def of(assignment: Dict[str, str], tray_docks: Optional[Dict[str, str]] = None):
        held = [o for o, r in assignment.items() if r == RHAND]
        if len(held) > 1:
            raise ValueError(f"more than one held object: {held}")
        return SymbolicState(
            tuple(sorted(assignment.items())),
            tuple(sorted((tray_docks or {}).items())),
        )

    @property
    def assignment_map(self) -> Dict[str, str]:
        return dict(self.assignment)

    @property
    def dock_map(self) -> Dict[str, str]:
        return dict(self.tray_docks)

    @property
    def held(self) -> Optional[str]:
        for o, r in self.assignment:
            if r == RHAND:
                return o
        return None

    def region(self, obj: str) -> str:
        for o, r in self.assignment:
            if o == obj:
                return r
        raise KeyError(obj)

    def dock(self, tray: str) -> str:
        for t, d in self.tray_docks:
            if t == tray:
                return d
        raise KeyError(tray)

    def with_object(self, obj: str, region: str) -> "SymbolicState":
        a = self.assignment_map
        a[obj] = region
        return SymbolicState.of(a, self.dock_map)

    def with_dock(self, tray: str, dock: str) -> "SymbolicState":
        d = self.dock_map
        if tray not in d:
            raise KeyError(tray)
        d[tray] = dock
        return SymbolicState.of(self.assignment_map, d)


def encode_state(s: SymbolicState) -> str:
    """Canonical state string: object pairs sorted by object id, then
    tray-dock pairs, joined by underscores (e.g. o1r1_o2r3_r3d1)."""
    parts = [f"{o}{r}" for o, r in s.assignment]
    parts += [f"{t}{d}" for t, d in s.tray_docks]
    return "_".join(parts)


def decode_state(ts: "TransitionSystem", text: str) -> SymbolicState:
    """Inverse of encode_state, given the ts id vocabulary."""
    parts = text.split("_") if text else []
    assignment: Dict[str, str] = {}
    docks: Dict[str, str] = {}
    regions = set(ts.region_ids) | {RHAND}
    tray_ids = {t.id for t in ts.trays}
    idx = 0
    for part in parts:
        matched = False
        for oid in sorted(ts.objects, key=len, reverse=True):
            if part.startswith(oid) and part[len(oid):] in regions:
                assignment[oid] = part[len(oid):]
                matched = True
                break
        if matched:
            continue
        for tid in sorted(tray_ids, key=len, reverse=True):
            if part.startswith(tid):
                docks[tid] = part[len(tid):]
                matched = True
                break
        if not matched:
            raise ValueError(f"cannot decode state part {part!r}")
    if set(assignment) != set(ts.objects):
        raise ValueError(f"decoded objects {sorted(assignment)} != {sorted(ts.objects)}")
    return SymbolicState.of(assignment, docks)


# -- actions -------------------------------------------------------------


@dataclass(frozen=True)
class MoveObject:
    obj: str
    dest: str  # region id

    @property
    def key(self) -> str:
        return f"move_{self.obj}_{self.dest}"

    def __str__(self):
        return self.key


@dataclass(frozen=True)
class MoveRegion:
    tray: str
    dest_dock: str

    @property
    def key(self) -> str:
        return f"move_{self.tray}_{self.dest_dock}"

    def __str__(self):
        return self.key


ActionSpec = object  # MoveObject | MoveRegion


# -- transition system ---------------------------------------------------


@dataclass(frozen=True)
class TraySpec:
    id: str
    docks: Tuple[str, ...]


@dataclass(frozen=True)
class MacroAtom:
    """all_obj_in_<region>: true iff every object is assigned to region."""

    atom: str
    region: str


@dataclass(frozen=True)
class TransitionSystem:
    objects: Tuple[str, ...]
    fixed_regions: Tuple[str, ...]
    trays: Tuple[TraySpec, ...]
    init: SymbolicState
    macros: Tuple[MacroAtom, ...] = ()
    geometry_version: int = 0

    def __post_init__(self):
        ids = list(self.fixed_regions) + [t.id for t in self.trays]
        assert len(ids) == len(set(ids)), "duplicate region ids"

    @property
    def region_ids(self) -> Tuple[str, ...]:
        return tuple(sorted(list(self.fixed_regions) + [t.id for t in self.trays]))

    @property
    def atoms(self) -> FrozenSet[str]:
        pairs = {
            f"{o}{r}" for o in self.objects for r in self.region_ids
        }
        pairs |= {f"{o}{RHAND}" for o in self.objects}
        pairs |= {f"{t.id}{d}" for t in self.trays for d in t.docks}
        pairs |= {m.atom for m in self.macros}
        return frozenset(pairs)

    def state_space_size(self) -> int:
        n = len(self.region_ids) ** len(self.objects)
        for t in self.trays:
            n *= len(t.docks)
        return n

    def enumerate_states(self) -> Iterator[SymbolicState]:
        """All planning states (held-object states excluded)."""
        regions = self.region_ids
        dock_choices = [[(t.id, d) for d in t.docks] for t in self.trays]
        for assign in itertools.product(regions, repeat=len(self.objects)):
            for docks in itertools.product(*dock_choices):
                yield SymbolicState(
                    tuple(zip(self.objects, assign)), tuple(sorted(docks))
                )


def label(ts: TransitionSystem, s: SymbolicState) -> FrozenSet[str]:
    """Atoms true in s: one o_i r_j atom per object, tray dock atoms,
    and declared macro atoms (vacuously true with no objects)."""
    atoms = {f"{o}{r}" for o, r in s.assignment}
    atoms |= {f"{t}{d}" for t, d in s.tray_docks}
    amap = s.assignment_map
    for m in ts.macros:
        if all(r == m.region for r in amap.values()):
            atoms.add(m.atom)
    return frozenset(atoms)


def check_atoms(ts: TransitionSystem, needed: Iterable[str]):
    """Raise UnknownAtom if a formula references an atom with no
    labeling rule in ts."""
    vocab = ts.atoms
    unknown = sorted(set(needed) - vocab)
    if unknown:
        raise UnknownAtom(f"no labeling rule for atoms: {unknown}")


def enumerate_actions(ts: TransitionSystem, s: SymbolicState) -> List[ActionSpec]:
    """Legal actions in s: object moves to a different region and tray
    dock changes. No-ops are excluded, keeping edge costs strictly
    positive. Deterministic order."""
    held = s.held
    actions: List[ActionSpec] = []
    for o, r in s.assignment:
        if r == RHAND:
            continue
        for dest in ts.region_ids:
            if dest != r:
                actions.append(MoveObject(o, dest))
    for t in ts.trays:
        if held is not None and s.region(held) == t.id:
            continue  # tray is carrying context for a held object
        cur = s.dock(t.id)
        for d in t.docks:
            if d != cur:
                actions.append(MoveRegion(t.id, d))
    return actions


def apply_action(ts: TransitionSystem, s: SymbolicState, a: ActionSpec) -> SymbolicState:
    """Deterministic successor. Objects on a tray ride along when it
    moves (their region id stays the tray's id)."""
    if isinstance(a, MoveObject):
        if a.obj not in s.assignment_map:
            raise IllegalAction(f"unknown object {a.obj}")
        if a.dest not in ts.region_ids:
            raise IllegalAction(f"unknown region {a.dest}")
        if s.region(a.obj) == a.dest:
            raise IllegalAction(f"no-op move of {a.obj} to {a.dest}")
        if s.region(a.obj) == RHAND:
            raise IllegalAction(f"{a.obj} is held")
        return s.with_object(a.obj, a.dest)
    if isinstance(a, MoveRegion):
        spec = next((t for t in ts.trays if t.id == a.tray), None)
        if spec is None:
            raise IllegalAction(f"unknown tray {a.tray}")
        if a.dest_dock not in spec.docks:
            raise IllegalAction(f"unknown dock {a.dest_dock} for {a.tray}")
        if s.dock(a.tray) == a.dest_dock:
            raise IllegalAction(f"no-op tray move to {a.dest_dock}")
        return s.with_dock(a.tray, a.dest_dock)
    raise IllegalAction(f"unknown action {a!r}")


def ts_from_geometry(
    geometry: WorldGeometry,
    observed: SymbolicState,
    macros: Iterable[MacroAtom] = (),
) -> TransitionSystem:
    """Build the TS induced by the current geometry and an observed state."""
    objects = tuple(sorted(geometry.objects))
    trays = tuple(
        TraySpec(t.id, tuple(sorted(t.docks))) for t in
        sorted(geometry.trays.values(), key=lambda t: t.id)
    )
    ts = TransitionSystem(
        objects=objects,
        fixed_regions=tuple(sorted(geometry.regions)),
        trays=trays,
        init=observed,
        macros=tuple(macros),
        geometry_version=geometry.version,
    )
    _check_observed(ts, observed)
    return ts


def _check_observed(ts: TransitionSystem, observed: SymbolicState):
    amap = observed.assignment_map
    if set(amap) != set(ts.objects):
        raise InconsistentObservation(
            f"observed objects {sorted(amap)} != known {sorted(ts.objects)}"
        )
    valid = set(ts.region_ids) | {RHAND}
    for o, r in observed.assignment:
        if r not in valid:
            raise InconsistentObservation(f"object {o} in unknown region {r}")
    dock_map = observed.dock_map
    for t in ts.trays:
        if t.id not in dock_map or dock_map[t.id] not in t.docks:
            raise InconsistentObservation(f"tray {t.id} has no valid observed dock")


def reconstruct_ts(
    ts: TransitionSystem,
    observed: SymbolicState,
    geometry: WorldGeometry,
) -> TransitionSystem:
    """Rebuild O, R, and the atom vocabulary after the geometry changed
    (objects added/removed, regions added or removed). The new TS carries
    the geometry version, so version-keyed caches go stale."""
    macros = [m for m in ts.macros]
    region_ids = set(geometry.regions) | set(geometry.trays)
    macros = [m for m in macros if m.region in region_ids]
    return ts_from_geometry(geometry, observed, macros)
