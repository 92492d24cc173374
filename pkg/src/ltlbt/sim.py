"""Deterministic execution simulator: a discrete-time world with one
gripper, live interventions, and the outer control loop — perceive,
attempt subtree recovery, reconstruct the transition system when the
object/region sets changed, replan with carried experience, reconfigure
the behavior tree, tick.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .bt import (
    BTNode,
    Executor,
    NodeStatus,
    Subtree,
    TickContext,
    build_task_root,
    build_subtree,
    find_recovery_subtree,
    offline_rebuild,
    plan_to_action_tuples,
    reconfigure,
    tick,
    tree_to_json,
)
from .costs import (
    HOME_ANCHOR,
    ExperienceCache,
    GeometricCostProvider,
    LatencyWrappedProvider,
    motion_cost_geometric,
)
from .ltl import accepts_constant_word, build_buchi, parse_formula, to_nnf
from .scenario import Scenario
from .search import (
    NoPlan,
    PartialGraph,
    Plan,
    dijkstra_full,
    full_graph_construct,
    plan_astar,
    plan_dijkstra,
)
from .world import (
    MoveObject,
    MoveRegion,
    NoRegion,
    RHAND,
    SymbolicState,
    TrayGeom,
    TransitionSystem,
    label,
    region_of,
    reconstruct_ts,
)


class UnresolvableEvent(Exception):
    """Intervention references something that does not resolve."""


class HeldObjectConflict(Exception):
    """Intervention touches the object currently in the gripper."""


class PerceptionGap(Exception):
    """An object lies outside every region's radius."""


# -- interventions --------------------------------------------------------

INTERVENTION_KINDS = (
    "relocate_object",
    "add_object",
    "remove_object",
    "add_tray",
    "remove_region",
)


@dataclass(frozen=True)
class InterventionEvent:
    time: float
    kind: str
    params: Tuple[Tuple[str, object], ...]

    @staticmethod
    def of(time: float, kind: str, **params) -> "InterventionEvent":
        if kind not in INTERVENTION_KINDS:
            raise ValueError(f"unknown intervention kind {kind!r}")
        return InterventionEvent(time, kind, tuple(sorted(params.items())))

    @property
    def param_map(self) -> Dict[str, object]:
        return dict(self.params)

    def to_dict(self) -> Dict[str, object]:
        return {"time": self.time, "kind": self.kind, **self.param_map}


def intervention_from_dict(doc: Dict[str, object]) -> InterventionEvent:
    doc = dict(doc)
    t = float(doc.pop("time"))
    kind = doc.pop("kind")
    return InterventionEvent.of(t, kind, **doc)


def load_script(path: str) -> List[InterventionEvent]:
    import json

    with open(path) as fh:
        return [intervention_from_dict(d) for d in json.load(fh)]


# -- world ----------------------------------------------------------------


@dataclass
class ActiveAction:
    action: object
    duration: float
    remaining: float
    source: str  # source region id (MoveObject) or source dock (MoveRegion)
    started_at: float


class SimWorld:
    """Continuous world with one gripper and at most one active action.
    Object placement jitter is seeded, so sessions are reproducible."""

    def __init__(self, geometry, seed: int = 0):
        self.geometry = geometry
        self.rng = random.Random(seed)
        self.gripper: Optional[str] = None  # held object id
        self.active: Optional[ActiveAction] = None
        self.last_completed: Optional[str] = None  # action key
        self.clock = 0.0
        self.change_flag = False

    def _jittered(self, rid: str) -> Tuple[float, float, float]:
        center = self.geometry.region_center(rid)
        radius = (
            self.geometry.regions[rid].radius
            if rid in self.geometry.regions
            else self.geometry.trays[rid].radius
        )
        r = self.rng.uniform(0.0, 0.4 * radius)
        ang = self.rng.uniform(0.0, 2.0 * math.pi)
        return (center[0] + r * math.cos(ang), center[1] + r * math.sin(ang), center[2])

    def riding_objects(self, tray_id: str) -> List[str]:
        out = []
        for oid, pos in self.geometry.objects.items():
            if oid == self.gripper:
                continue
            try:
                if region_of(self.geometry, pos) == tray_id:
                    out.append(oid)
            except NoRegion:
                pass
        return sorted(out)

    def _complete_active(self):
        a = self.active.action
        if isinstance(a, MoveObject):
            self.geometry.objects[a.obj] = self._jittered(a.dest)
            self.gripper = None
        else:
            riders = self.riding_objects(a.tray)
            self.geometry.set_tray_dock(a.tray, a.dest_dock)
            for oid in riders:
                self.geometry.objects[oid] = self._jittered(a.tray)
        self.last_completed = a.key
        self.active = None

    def abort_active(self):
        """Offline-baseline abort rule: the held object returns to its
        source region instantly; a tray move leaves the dock unchanged."""
        if self.active is None:
            return
        a = self.active.action
        if isinstance(a, MoveObject):
            self.geometry.objects[a.obj] = self._jittered(self.active.source)
            self.gripper = None
        self.active = None


def step(world: SimWorld, dt: float) -> SimWorld:
    """Advance the clock; finish the active action when its duration
    elapses."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    world.clock += dt
    if world.active is not None:
        world.active.remaining -= dt
        if world.active.remaining <= 1e-12:
            world._complete_active()
    return world


def perceive(world: SimWorld) -> SymbolicState:
    """Symbolic snapshot: objects mapped through region membership, the
    held object reported as rhand, tray dock choices read directly."""
    assignment: Dict[str, str] = {}
    for oid, pos in sorted(world.geometry.objects.items()):
        if oid == world.gripper:
            assignment[oid] = RHAND
            continue
        try:
            assignment[oid] = region_of(world.geometry, pos)
        except NoRegion as exc:
            raise PerceptionGap(str(exc)) from exc
    docks = {t.id: t.dock for t in world.geometry.trays.values()}
    return SymbolicState.of(assignment, docks)


def inject(world: SimWorld, e: InterventionEvent) -> SimWorld:
    """Apply an intervention; the change flag makes the next loop
    iteration observe the new snapshot."""
    p = e.param_map
    geo = world.geometry
    if e.kind == "relocate_object":
        oid, dest = p["obj"], p["region"]
        if oid not in geo.objects:
            raise UnresolvableEvent(f"unknown object {oid!r}")
        if dest not in geo.regions and dest not in geo.trays:
            raise UnresolvableEvent(f"unknown region {dest!r}")
        if oid == world.gripper:
            raise HeldObjectConflict(f"{oid} is in the gripper")
        geo.objects[oid] = world._jittered(dest)
    elif e.kind == "add_object":
        oid, dest = p["obj"], p["region"]
        if oid in geo.objects:
            raise UnresolvableEvent(f"duplicate object {oid!r}")
        if dest not in geo.regions and dest not in geo.trays:
            raise UnresolvableEvent(f"unknown region {dest!r}")
        geo.add_object(oid, world._jittered(dest))
    elif e.kind == "remove_object":
        oid = p["obj"]
        if oid not in geo.objects:
            raise UnresolvableEvent(f"unknown object {oid!r}")
        if oid == world.gripper:
            raise HeldObjectConflict(f"{oid} is in the gripper")
        geo.remove_object(oid)
    elif e.kind == "add_tray":
        tid = p["tray"]
        docks = {d: tuple(v) for d, v in dict(p["docks"]).items()}
        if tid in geo.regions or tid in geo.trays:
            raise UnresolvableEvent(f"duplicate region {tid!r}")
        if p["dock"] not in docks:
            raise UnresolvableEvent(f"initial dock {p['dock']!r} not in docks")
        geo.add_tray(TrayGeom(tid, docks, p["dock"]))
    elif e.kind == "remove_region":
        rid = p["region"]
        if rid not in geo.regions and rid not in geo.trays:
            raise UnresolvableEvent(f"unknown region {rid!r}")
        occupied = [
            oid
            for oid, pos in geo.objects.items()
            if oid != world.gripper and _safe_region(geo, pos) == rid
        ]
        if occupied:
            raise UnresolvableEvent(f"region {rid!r} still holds {occupied}")
        geo.remove_region(rid)
    else:
        raise UnresolvableEvent(f"unknown intervention kind {e.kind!r}")
    world.change_flag = True
    return world


def _safe_region(geo, pos):
    try:
        return region_of(geo, pos)
    except NoRegion:
        return None


# -- session --------------------------------------------------------------


@dataclass
class RunConfig:
    planner: str = "astar_exp"  # astar_exp | astar | dijkstra
    graph: str = "partial"  # partial | full
    bt: str = "online_action"  # online_action | online_state | offline_action
    provider_latency_ms: float = 0.0
    fault_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.planner not in ("astar_exp", "astar", "dijkstra"):
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.graph not in ("partial", "full"):
            raise ValueError(f"unknown graph mode {self.graph!r}")
        if self.bt not in ("online_action", "online_state", "offline_action"):
            raise ValueError(f"unknown bt mode {self.bt!r}")

    @property
    def style(self) -> str:
        return "state" if self.bt == "online_state" else "action"

    @property
    def online(self) -> bool:
        return self.bt != "offline_action"


@dataclass
class SessionMetrics:
    success: bool = False
    reason: str = ""
    init_plan_time_s: float = 0.0
    total_replan_time_s: float = 0.0
    ts_reconstruct_time_s: float = 0.0
    replan_count: int = 0
    recovery_count: int = 0
    bt_change_count: int = 0
    completion_time_s: float = 0.0
    provider_invocations: int = 0
    cache_hits: int = 0
    ticks: int = 0

    def to_dict(self) -> Dict[str, object]:
        return dict(self.__dict__)


def plan_payload(plan: Plan) -> Dict[str, object]:
    return {
        "actions": plan.action_keys,
        "cost": plan.cost,
        "length": len(plan.steps),
        "stats": plan.stats.to_dict(),
    }


class _SimExecutor(Executor):
    """World command seam: dispatch starts a timed motion whose duration
    is the geometric cost over the configured speed; a seeded fault makes
    a completed pick-and-place drop the object back at its source."""

    def __init__(self, session: "Session"):
        self.session = session

    def dispatch(self, action):
        sess = self.session
        world = sess.world
        assert world.active is None, "one active action at a time"
        snapshot = sess.last_snapshot
        cost = motion_cost_geometric(
            world.geometry, snapshot, action, sess.sim_ee, sess.scenario.cost.approach
        )
        duration = cost / sess.scenario.cost.speed
        if isinstance(action, MoveObject):
            source = snapshot.region(action.obj)
            world.gripper = action.obj
        else:
            source = snapshot.dock(action.tray)
        world.active = ActiveAction(action, duration, duration, source, world.clock)
        world.last_completed = None
        sess.emit("action_dispatched", action=action.key, duration=round(duration, 6))

    def poll(self, action) -> NodeStatus:
        world = self.session.world
        if world.active is not None and world.active.action == action:
            return NodeStatus.RUNNING
        if world.last_completed == action.key:
            return NodeStatus.SUCCESS
        return NodeStatus.FAILURE

    def record_state(self, state: SymbolicState):
        # The tracked state is advanced by the action's real effect in
        # _on_action_complete; the planned target may be stale for
        # placements that changed through absorbed interventions.
        self.session.emit("state_update", state=str(state.assignment))


class Session:
    """One execution session: owns the world, the behavior tree, the
    experience cache, and the event trace; advanced one tick at a time."""

    def __init__(self, scenario: Scenario, config: RunConfig,
                 script: List[InterventionEvent] = ()):
        self.scenario = scenario
        self.config = config
        self.script = sorted(script, key=lambda e: e.time)
        self.pending_events: List[InterventionEvent] = list(self.script)
        self.deferred_events: List[InterventionEvent] = []

        self.geometry = scenario.build_geometry()
        self.world = SimWorld(self.geometry, seed=config.seed)
        if config.fault_prob > 0:
            self.fault_rng = random.Random(config.seed + 1)
        else:
            self.fault_rng = None

        self.ts: TransitionSystem = scenario.build_ts()
        self.ba = build_buchi(to_nnf(parse_formula(scenario.formula_text)))
        inner = GeometricCostProvider(scenario.cost.approach)
        latency = config.provider_latency_ms or scenario.cost.latency_ms
        self.provider = (
            LatencyWrappedProvider(inner, latency / 1000.0) if latency > 0 else inner
        )
        self.cache = ExperienceCache()
        self.expected: SymbolicState = scenario.initial_state()
        self.last_snapshot: SymbolicState = self.expected
        self.sim_ee = HOME_ANCHOR

        self.executor = _SimExecutor(self)
        self.subtrees: List[Subtree] = []
        self.root: Optional[BTNode] = None
        self.ctx_epoch = 0
        self.plan: Optional[Plan] = None
        self.last_graph = None  # product graph behind the latest plan

        self.metrics = SessionMetrics()
        self.trace: List[Dict[str, object]] = []
        self.done = False
        self._pending_replan = False
        self._goal_memo: Dict[Tuple[int, FrozenSet[str]], bool] = {}
        self.dt = 1.0 / scenario.tick_hz

        self.emit("scenario_loaded", name=scenario.name,
                  formula=scenario.formula_text)

    # -- plumbing ---------------------------------------------------------

    def emit(self, event: str, **payload):
        self.trace.append({"t": round(self.world.clock, 6), "event": event, **payload})

    def goal_holds(self, s: SymbolicState) -> bool:
        letter = label(self.ts, s)
        key = (self.ts.geometry_version, letter)
        if key not in self._goal_memo:
            self._goal_memo[key] = accepts_constant_word(
                self.ba, self.ba.initial, letter
            )
        return self._goal_memo[key]

    def bt_snapshot(self) -> Optional[Dict[str, object]]:
        if self.root is None:
            return None
        return tree_to_json(self.root, self.ctx_epoch)

    # -- planning ---------------------------------------------------------

    def _plan_once(self, start: SymbolicState) -> Plan:
        if self.config.planner == "astar_exp":
            cache = self.cache
        else:
            cache = ExperienceCache()
        if self.config.graph == "full":
            full = full_graph_construct(
                self.ts, self.ba, self.geometry, self.provider
            )
            self.last_graph = full
            return dijkstra_full(full, self.ts, self.ba, start)
        graph = PartialGraph(self.ts.geometry_version, self.provider.path_dependent)
        self.last_graph = graph
        fn = plan_dijkstra if self.config.planner == "dijkstra" else plan_astar
        return fn(
            self.ts, self.ba, self.geometry, self.provider, cache,
            start_state=start, graph=graph, start_ee=self.sim_ee,
        )

    def _fail(self, reason: str):
        self.done = True
        self.metrics.success = False
        self.metrics.reason = reason
        self.metrics.completion_time_s = self.world.clock
        self._finalize()
        self.emit("session_failed", reason=reason)
        self.emit("metrics", **self.metrics.to_dict())

    def _finalize(self):
        self.metrics.provider_invocations = self.provider.invocations
        self.metrics.cache_hits = self.cache.hits

    def initial_plan(self) -> bool:
        self.emit("initial_plan_started")
        t0 = time.perf_counter()
        try:
            self.plan = self._plan_once(self.expected)
        except NoPlan:
            self.metrics.init_plan_time_s = time.perf_counter() - t0
            self._fail("infeasible")
            return False
        self.metrics.init_plan_time_s = time.perf_counter() - t0
        self.subtrees = [
            build_subtree(t, self.config.style, i)
            for i, t in enumerate(plan_to_action_tuples(self.plan))
        ]
        self.root = build_task_root(
            self.subtrees, lambda ctx: self.goal_holds(ctx.snapshot)
        )
        self.emit("initial_plan_done",
                  wall_time_s=round(self.metrics.init_plan_time_s, 6),
                  **plan_payload(self.plan))
        return True

    def _replan(self, s_now: SymbolicState, sets_changed: bool):
        if sets_changed:
            t0 = time.perf_counter()
            try:
                self.ts = reconstruct_ts(self.ts, s_now, self.geometry)
            except Exception as exc:
                self._fail(f"reconstruction: {exc}")
                return
            self._goal_memo.clear()
            self.metrics.ts_reconstruct_time_s += time.perf_counter() - t0
            self.emit("ts_reconstructed",
                      objects=list(self.ts.objects),
                      regions=list(self.ts.region_ids),
                      version=self.ts.geometry_version)
        self.emit("replan_started", state=str(s_now.assignment))
        t0 = time.perf_counter()
        try:
            plan = self._plan_once(s_now)
        except NoPlan:
            self.metrics.total_replan_time_s += time.perf_counter() - t0
            self._fail("infeasible")
            return
        wall = time.perf_counter() - t0
        self.metrics.total_replan_time_s += wall
        self.metrics.replan_count += 1
        self.plan = plan
        if self.config.online:
            res = reconfigure(self.subtrees, plan, self.config.style)
            self.subtrees = res.subtrees
            changes = res.changes
            self.emit("reconfigured", kept=res.kept, inserted=res.inserted,
                      removed=res.removed, updated=res.updated,
                      deferred=len(res.deferred))
        else:
            changes = len(self.subtrees) + len(plan.steps)
            self.world.abort_active()
            self.subtrees = offline_rebuild(plan, self.config.style)
            self.emit("rebuilt", inserted=len(self.subtrees),
                      removed=changes - len(self.subtrees))
        self.metrics.bt_change_count += changes
        self.root = build_task_root(
            self.subtrees, lambda ctx: self.goal_holds(ctx.snapshot)
        )
        self.expected = s_now
        self.emit("replan_done", wall_time_s=round(wall, 6), **plan_payload(plan))

    # -- the loop ---------------------------------------------------------

    def _apply_due_events(self):
        cutoff = self.world.clock + 1e-12
        due = [e for e in self.pending_events if e.time <= cutoff]
        self.pending_events = [e for e in self.pending_events if e.time > cutoff]
        retry = []
        for e in due + self.deferred_events:
            try:
                inject(self.world, e)
                self.emit("intervention_applied", **e.to_dict())
            except HeldObjectConflict as exc:
                retry.append(e)
                self.emit("intervention_deferred", reason=str(exc), **e.to_dict())
            except UnresolvableEvent as exc:
                self.emit("intervention_rejected", reason=str(exc), **e.to_dict())
        self.deferred_events = retry

    def _refresh_completed(self, s_new: SymbolicState):
        """A subtree counts as completed exactly while its action's
        effect holds; interventions can undo or pre-satisfy effects."""
        amap = s_new.assignment_map
        for st in self.subtrees:
            a = st.tup.action
            if isinstance(a, MoveObject):
                if a.obj in amap:
                    st.completed = amap[a.obj] == a.dest
            else:
                try:
                    st.completed = s_new.dock(a.tray) == a.dest_dock
                except KeyError:
                    pass

    def _expected_variants(self) -> List[SymbolicState]:
        variants = [self.expected]
        active = self.world.active
        if active is not None and isinstance(active.action, MoveObject):
            obj = active.action.obj
            if obj in self.expected.assignment_map:
                variants.append(self.expected.with_object(obj, RHAND))
        return variants

    def _sets_changed(self, s_new: SymbolicState) -> bool:
        return (
            set(s_new.assignment_map) != set(self.ts.objects)
            or set(s_new.dock_map) != {t.id for t in self.ts.trays}
            or set(self.geometry.region_ids()) != set(self.ts.region_ids)
        )

    def _handle_change(self, s_new: SymbolicState) -> bool:
        """True if the change was absorbed without replanning."""
        self.emit("change_detected", state=str(s_new.assignment))
        if not self._sets_changed(s_new):
            self._refresh_completed(s_new)
            idx = find_recovery_subtree(s_new, self.subtrees)
            if idx is not None:
                self.metrics.recovery_count += 1
                self._resync_expected(s_new)
                self.emit("recovery", subtree=idx,
                          action=self.subtrees[idx].tup.action.key)
                return True
            self._replan_or_defer(s_new, sets_changed=False)
            return False
        self._replan_or_defer(s_new, sets_changed=True)
        return False

    def _resync_expected(self, s_new: SymbolicState):
        active = self.world.active
        if (
            active is not None
            and isinstance(active.action, MoveObject)
            and s_new.assignment_map.get(active.action.obj) == RHAND
        ):
            self.expected = s_new.with_object(active.action.obj, active.source)
        else:
            self.expected = s_new

    def _replan_or_defer(self, s_new: SymbolicState, sets_changed: bool):
        if self.world.active is not None and self.config.online:
            # keep ticking the running subtree; replan at the next
            # boundary where the gripper is free
            self._pending_replan = True
            self._resync_expected(s_new)
            self.emit("replan_deferred", until="action_complete")
            return
        if not self.config.online:
            self.world.abort_active()
            s_new = perceive(self.world)
            sets_changed = self._sets_changed(s_new)
        self._replan(s_new, sets_changed)

    def tick_once(self):
        if self.done:
            return
        world = self.world
        self._apply_due_events()
        try:
            s_new = perceive(world)
        except PerceptionGap as exc:
            self._fail(f"perception_gap: {exc}")
            return
        self.last_snapshot = s_new

        if self._pending_replan and world.active is None:
            self._pending_replan = False
            self._replan(s_new, self._sets_changed(s_new))
            if self.done:
                return
        elif s_new not in self._expected_variants():
            self._handle_change(s_new)
            if self.done:
                return
            s_new = perceive(world)
            self.last_snapshot = s_new

        ctx = TickContext.of(s_new, self.executor)
        ctx.epoch = self.ctx_epoch
        status = tick(self.root, ctx)
        self.ctx_epoch = ctx.epoch
        self.metrics.ticks += 1

        self._sweep_deferred_subtrees()

        if status == NodeStatus.SUCCESS:
            self.done = True
            self.metrics.success = True
            self.metrics.reason = "goal"
            self.metrics.completion_time_s = world.clock
            self._finalize()
            self.emit("goal_reached")
            self.emit("metrics", **self.metrics.to_dict())
            return
        if status == NodeStatus.FAILURE and not self._pending_replan:
            # no subtree applies and the goal does not hold yet
            self._replan_or_defer(s_new, self._sets_changed(s_new))
            if self.done:
                return

        before = None
        if world.active is not None:
            before = world.active.action
        step(world, self.dt)
        if before is not None and world.active is None:
            self._on_action_complete(before)

        if world.clock > self.scenario.timeout_s:
            self._fail("timeout")

    def _on_action_complete(self, action):
        world = self.world
        if (
            self.fault_rng is not None
            and isinstance(action, MoveObject)
            and self.fault_rng.random() < self.config.fault_prob
        ):
            # failed grasp: the motion ends with the object back at its source
            src = None
            for st in self.subtrees:
                if st.tup.action == action:
                    src = st.tup.source.region(action.obj)
            if src is not None:
                world.geometry.objects[action.obj] = world._jittered(src)
                self.emit("fault_injected", action=action.key)
        if isinstance(action, MoveObject):
            dest = action.dest
            if dest in world.geometry.trays:
                self.sim_ee = f"d:{dest}:{world.geometry.trays[dest].dock}"
            else:
                self.sim_ee = f"r:{dest}"
            self.expected = self.expected.with_object(action.obj, action.dest)
        else:
            self.sim_ee = f"d:{action.tray}:{action.dest_dock}"
            if action.tray in self.expected.dock_map:
                self.expected = self.expected.with_dock(action.tray, action.dest_dock)
        self.emit("action_completed", action=action.key)

    def _sweep_deferred_subtrees(self):
        kept = []
        for st in self.subtrees:
            if st.pending_removal and not st.running:
                self.emit("subtree_removed", action=st.tup.action.key)
                continue
            kept.append(st)
        if len(kept) != len(self.subtrees):
            self.subtrees = kept
            self.root = build_task_root(
                self.subtrees, lambda ctx: self.goal_holds(ctx.snapshot)
            )

    def run(self) -> SessionMetrics:
        if not self.initial_plan():
            return self.metrics
        max_ticks = int(self.scenario.timeout_s / self.dt) + 2
        for _ in range(max_ticks):
            if self.done:
                break
            self.tick_once()
        if not self.done:
            self._fail("timeout")
        return self.metrics


def run_session(
    scenario: Scenario,
    config: RunConfig,
    script: List[InterventionEvent] = (),
) -> Session:
    session = Session(scenario, config, script)
    session.run()
    return session
