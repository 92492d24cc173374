"""Behavior trees: plan compilation into condition-guarded action
subtrees, tick semantics (sequence / selector / non-preempting chooser),
online reconfiguration against a new plan, and structural export.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence as Seq

from .search import Plan
from .world import MoveObject, MoveRegion, RHAND, SymbolicState


class NodeStatus(enum.Enum):
    SUCCESS = "success"
    RUNNING = "running"
    FAILURE = "failure"
    INVALID = "invalid"


def state_atoms(s: SymbolicState) -> FrozenSet[str]:
    """Ground atoms of a symbolic state: one placement atom per object
    (rhand for a held object) and one dock atom per tray."""
    atoms = {f"{o}{r}" for o, r in s.assignment}
    atoms |= {f"{t}{d}" for t, d in s.tray_docks}
    return frozenset(atoms)


# -- tick plumbing --------------------------------------------------------


class Executor:
    """World command seam for Action leaves. The simulator implements
    this; tests use scripted stand-ins."""

    def dispatch(self, action) -> None:
        raise NotImplementedError

    def poll(self, action) -> NodeStatus:
        raise NotImplementedError

    def record_state(self, state: SymbolicState) -> None:
        """State-update hook: the expected symbolic state after an action
        completes."""


@dataclass
class TickContext:
    snapshot: SymbolicState
    atoms: FrozenSet[str]
    executor: Executor
    epoch: int = 0

    @classmethod
    def of(cls, snapshot: SymbolicState, executor: Executor,
           atoms: Optional[FrozenSet[str]] = None) -> "TickContext":
        return cls(snapshot, atoms if atoms is not None else state_atoms(snapshot),
                   executor)


_node_ids = itertools.count(1)


class BTNode:
    kind = "node"

    def __init__(self, name: str, children: Seq["BTNode"] = ()):
        self.id = next(_node_ids)
        self.name = name
        self.children: List[BTNode] = list(children)
        self.last_status = NodeStatus.INVALID
        self.last_epoch = -1

    def tick(self, ctx: TickContext) -> NodeStatus:
        status = self._tick(ctx)
        self.last_status = status
        self.last_epoch = ctx.epoch
        return status

    def _tick(self, ctx: TickContext) -> NodeStatus:
        raise NotImplementedError

    def status_at(self, epoch: int) -> NodeStatus:
        """Status from the given traversal; INVALID if not ticked then."""
        return self.last_status if self.last_epoch == epoch else NodeStatus.INVALID


class Condition(BTNode):
    """Atom-subset check against the snapshot, or an arbitrary predicate
    (goal sentinels). A predicate that raises evaluates to FAILURE."""

    kind = "condition"

    def __init__(self, name: str, atoms: Optional[FrozenSet[str]] = None,
                 predicate: Optional[Callable[[TickContext], bool]] = None):
        super().__init__(name)
        self.atoms = frozenset(atoms) if atoms is not None else None
        self.predicate = predicate

    def _tick(self, ctx: TickContext) -> NodeStatus:
        try:
            if self.atoms is not None:
                ok = self.atoms <= ctx.atoms
            elif self.predicate is not None:
                ok = bool(self.predicate(ctx))
            else:
                ok = False
        except Exception:
            ok = False
        return NodeStatus.SUCCESS if ok else NodeStatus.FAILURE


class ActionNode(BTNode):
    """Issues its world command once and reports RUNNING until the
    executor declares it terminal; a terminal status re-arms the node so
    re-activation dispatches again."""

    kind = "action"

    def __init__(self, action):
        super().__init__(action.key)
        self.action = action
        self.dispatched = False

    def _tick(self, ctx: TickContext) -> NodeStatus:
        if not self.dispatched:
            ctx.executor.dispatch(self.action)
            self.dispatched = True
        status = ctx.executor.poll(self.action)
        if status != NodeStatus.RUNNING:
            self.dispatched = False
        return status


class StateUpdateDecorator(BTNode):
    """Passes the child status through; on child SUCCESS, refreshes the
    recorded expected state and fires the completion hook."""

    kind = "state_update"

    def __init__(self, child: BTNode, state: SymbolicState,
                 on_success: Optional[Callable[[], None]] = None):
        super().__init__(f"update_{child.name}", [child])
        self.state = state
        self.on_success = on_success

    def _tick(self, ctx: TickContext) -> NodeStatus:
        status = self.children[0].tick(ctx)
        if status == NodeStatus.SUCCESS:
            ctx.executor.record_state(self.state)
            if self.on_success is not None:
                self.on_success()
        return status


class GuardDecorator(BTNode):
    """Returns FAILURE without ticking the child while the guard
    predicate holds; used to skip subtrees whose effect is already in
    place so restricted preconditions cannot re-trigger them."""

    kind = "guard"

    def __init__(self, child: BTNode, blocked: Callable[[], bool]):
        super().__init__(f"guard_{child.name}", [child])
        self.blocked = blocked

    def _tick(self, ctx: TickContext) -> NodeStatus:
        if self.blocked():
            return NodeStatus.FAILURE
        return self.children[0].tick(ctx)


class ContinueDecorator(BTNode):
    """Maps child SUCCESS to RUNNING: completing one plan step leaves the
    task in progress, so only the goal sentinel can finish the root."""

    kind = "continue"

    def __init__(self, child: BTNode):
        super().__init__(f"continue_{child.name}", [child])

    def _tick(self, ctx: TickContext) -> NodeStatus:
        status = self.children[0].tick(ctx)
        return NodeStatus.RUNNING if status == NodeStatus.SUCCESS else status


class Sequence(BTNode):
    """Ticks children left to right, returning the first non-SUCCESS
    status. With memory=True a RUNNING tick resumes at the running child
    instead of re-evaluating earlier children: preconditions then gate
    dispatch, not every poll of an already-issued command."""

    kind = "sequence"

    def __init__(self, children: Seq[BTNode], name: str = "seq",
                 memory: bool = False):
        super().__init__(name, children)
        self.memory = memory
        self._resume = 0

    def _tick(self, ctx: TickContext) -> NodeStatus:
        start = self._resume if self.memory else 0
        for i in range(start, len(self.children)):
            status = self.children[i].tick(ctx)
            if status == NodeStatus.RUNNING:
                self._resume = i if self.memory else 0
                return status
            if status != NodeStatus.SUCCESS:
                self._resume = 0
                return status
        self._resume = 0
        return NodeStatus.SUCCESS


class Selector(BTNode):
    kind = "selector"

    def __init__(self, children: Seq[BTNode], name: str = "sel"):
        super().__init__(name, children)

    def _tick(self, ctx: TickContext) -> NodeStatus:
        for child in self.children:
            status = child.tick(ctx)
            if status != NodeStatus.FAILURE:
                return status
        return NodeStatus.FAILURE


class Chooser(BTNode):
    """Selector that locks onto a RUNNING child: subsequent ticks go
    straight to it until it returns a terminal status, so higher-priority
    siblings cannot preempt it. SUCCESS of the locked child becomes the
    chooser's status for that tick (no sibling may react to the fresh
    effect within the same tick); FAILURE releases the lock and the
    remaining children are scanned as usual."""

    kind = "chooser"

    def __init__(self, children: Seq[BTNode], name: str = "chooser"):
        super().__init__(name, children)
        self.locked: Optional[BTNode] = None

    def _tick(self, ctx: TickContext) -> NodeStatus:
        skip = None
        if self.locked is not None:
            status = self.locked.tick(ctx)
            if status == NodeStatus.RUNNING:
                return status
            skip, self.locked = self.locked, None
            if status == NodeStatus.SUCCESS:
                return status
        for child in self.children:
            if child is skip:
                continue
            status = child.tick(ctx)
            if status == NodeStatus.RUNNING:
                self.locked = child
                return status
            if status == NodeStatus.SUCCESS:
                return status
        return NodeStatus.FAILURE


def tick(root: BTNode, ctx: TickContext) -> NodeStatus:
    """One traversal; epochs distinguish freshly ticked nodes from stale
    (INVALID) ones in exports."""
    ctx.epoch += 1
    return root.tick(ctx)


# -- plan compilation -----------------------------------------------------


@dataclass(frozen=True)
class ActionTuple:
    action: object
    c_pre: FrozenSet[str]
    c_post: FrozenSet[str]
    c_run: FrozenSet[str]
    source: SymbolicState
    target: SymbolicState


def _running_atoms(a, source: SymbolicState) -> FrozenSet[str]:
    """Atoms that hold mid-execution: the moved object is in the hand
    while everything untouched keeps its placement; a tray in motion
    keeps its source dock until the move completes."""
    if isinstance(a, MoveObject):
        atoms = {f"{a.obj}{RHAND}"}
        atoms |= {f"{o}{r}" for o, r in source.assignment if o != a.obj}
        atoms |= {f"{t}{d}" for t, d in source.tray_docks}
        return frozenset(atoms)
    return state_atoms(source)


def plan_to_action_tuples(p: Plan) -> List[ActionTuple]:
    tuples = []
    for step in p.steps:
        src, dst = step.source.state, step.target.state
        tuples.append(
            ActionTuple(
                action=step.action,
                c_pre=state_atoms(src),
                c_post=state_atoms(dst),
                c_run=_running_atoms(step.action, src),
                source=src,
                target=dst,
            )
        )
    return tuples


def action_condition_atoms(t: ActionTuple) -> FrozenSet[str]:
    """Restriction of C_pre to atoms about the moved entity, its source,
    and its destination; unrelated placements are ignored."""
    a, src = t.action, t.source
    if isinstance(a, MoveRegion):
        return frozenset({f"{a.tray}{src.dock(a.tray)}"})
    atoms = {f"{a.obj}{src.region(a.obj)}"}
    for rid in (src.region(a.obj), a.dest):
        if rid in src.dock_map:
            atoms.add(f"{rid}{src.dock(rid)}")
    return frozenset(atoms)


def _action_running_atoms(t: ActionTuple) -> FrozenSet[str]:
    a = t.action
    if isinstance(a, MoveRegion):
        return action_condition_atoms(t)
    atoms = {x for x in action_condition_atoms(t) if not x.startswith(a.obj)}
    atoms.add(f"{a.obj}{RHAND}")
    return frozenset(atoms)


@dataclass
class Subtree:
    index: int
    style: str  # 'state' | 'action'
    tup: ActionTuple
    root: BTNode
    action_node: ActionNode
    cond_run: Condition
    cond_pre: Condition
    completed: bool = False
    pending_removal: bool = False

    @property
    def running(self) -> bool:
        return self.action_node.dispatched

    def pre_atoms(self) -> FrozenSet[str]:
        return self.cond_pre.atoms

    def apply_tuple(self, t: ActionTuple) -> bool:
        """Refresh condition sets for an updated but same-action tuple;
        True if any condition atoms actually changed."""
        self.tup = t
        pre = (
            state_atoms(t.source) if self.style == "state" else action_condition_atoms(t)
        )
        run = t.c_run if self.style == "state" else _action_running_atoms(t)
        changed = pre != self.cond_pre.atoms or run != self.cond_run.atoms
        self.cond_pre.atoms = pre
        self.cond_run.atoms = run
        return changed


def build_subtree(t: ActionTuple, style: str, index: int = 0) -> Subtree:
    """Chooser-rooted subtree sharing one Action leaf across two guarded
    branches: the running-condition branch (first, so a mid-flight action
    resumes even after its precondition lapses) and the precondition
    branch. The state-update decorator records the expected post state."""
    if style not in ("state", "action"):
        raise ValueError(f"unknown condition style {style!r}")
    if style == "state":
        pre = state_atoms(t.source)
        run = t.c_run
    else:
        pre = action_condition_atoms(t)
        run = _action_running_atoms(t)
    action_node = ActionNode(t.action)
    cond_run = Condition(f"run_{t.action.key}", run)
    cond_pre = Condition(f"pre_{t.action.key}", pre)
    subtree = None

    def mark_done():
        subtree.completed = True

    branch_run = Sequence(
        [cond_run, StateUpdateDecorator(action_node, t.target, mark_done)],
        name=f"resume_{t.action.key}",
        memory=True,
    )
    branch_pre = Sequence(
        [cond_pre, StateUpdateDecorator(action_node, t.target, mark_done)],
        name=f"exec_{t.action.key}",
        memory=True,
    )
    chooser = Chooser([branch_run, branch_pre], name=f"subtree_{t.action.key}")
    root = GuardDecorator(chooser, lambda: subtree.completed)
    subtree = Subtree(index, style, t, root, action_node, cond_run, cond_pre)
    return subtree


def build_state_condition_subtree(t: ActionTuple, index: int = 0) -> Subtree:
    return build_subtree(t, "state", index)


def build_action_condition_subtree(t: ActionTuple, index: int = 0) -> Subtree:
    return build_subtree(t, "action", index)


def build_task_root(
    subtrees: Seq[Subtree],
    goal_predicate: Callable[[TickContext], bool],
) -> Chooser:
    """Task-level chooser: action subtrees in plan order, then the goal
    sentinel; SUCCESS of the sentinel means the task is complete, FAILURE
    of every child means no subtree applies and a replan is needed."""
    sentinel = Condition("goal", predicate=goal_predicate)
    return Chooser(
        [ContinueDecorator(st.root) for st in subtrees] + [sentinel], name="task"
    )


def find_recovery_subtree(
    snapshot: SymbolicState, subtrees: Seq[Subtree]
) -> Optional[int]:
    """Smallest incomplete subtree index whose precondition atoms all
    hold in the snapshot; the earliest match re-executes the longest
    remaining plan suffix. None means no subtree can absorb the change."""
    atoms = state_atoms(snapshot)
    for i, st in enumerate(subtrees):
        if not st.completed and not st.pending_removal and st.pre_atoms() <= atoms:
            return i
    return None


@dataclass
class ReconfigResult:
    subtrees: List[Subtree]
    kept: int
    inserted: int
    removed: int
    updated: int
    deferred: List[Subtree]

    @property
    def changes(self) -> int:
        """BT changes: subtree insertions, removals (immediate or
        deferred), and kept subtrees whose condition atoms were edited."""
        return self.inserted + self.removed + self.updated + len(self.deferred)

    def action_keys(self) -> List[str]:
        return [st.tup.action.key for st in self.subtrees if not st.pending_removal]


def reconfigure(current: Seq[Subtree], p_new: Plan, style: str) -> ReconfigResult:
    """Share subtrees between the old list and the new plan by matching
    action names from the back (suffixes survive interventions best),
    inserting fresh subtrees elsewhere. A subtree whose action is
    mid-flight is never removed in place; it stays flagged for removal
    until it reaches a terminal status."""
    new_tuples = plan_to_action_tuples(p_new)
    n_new, n_old = len(new_tuples), len(current)
    out: List[Optional[Subtree]] = [None] * n_new
    kept = inserted = removed = updated = 0
    deferred: List[Subtree] = []

    def drop(st: Subtree):
        nonlocal removed
        if st.running:
            st.pending_removal = True
            deferred.append(st)
        else:
            removed += 1

    for i in range(1, n_new + 1):
        nt = new_tuples[-i]
        old = current[-i] if i <= n_old else None
        if old is not None and not old.pending_removal and old.tup.action.key == nt.action.key:
            if old.apply_tuple(nt):
                updated += 1
            old.completed = False
            out[-i] = old
            kept += 1
        else:
            if old is not None and not old.pending_removal:
                drop(old)
            fresh = build_subtree(nt, style)
            inserted += 1
            out[-i] = fresh
    if n_old > n_new:
        for old in current[: n_old - n_new]:
            if not old.pending_removal:
                drop(old)

    subtrees = deferred + [st for st in out if st is not None]
    for i, st in enumerate(subtrees):
        st.index = i
    return ReconfigResult(subtrees, kept, inserted, removed, updated, deferred)


def offline_rebuild(p_new: Plan, style: str) -> List[Subtree]:
    """Baseline: discard everything (aborting running actions is the
    caller's job) and compile the new plan from scratch."""
    return [
        build_subtree(t, style, i) for i, t in enumerate(plan_to_action_tuples(p_new))
    ]


# -- structural export ----------------------------------------------------

_STATUS_COLORS = {
    NodeStatus.SUCCESS: "palegreen",
    NodeStatus.RUNNING: "khaki",
    NodeStatus.FAILURE: "lightcoral",
    NodeStatus.INVALID: "lightgray",
}


def _walk(node: BTNode, seen: set):
    if node.id in seen:
        return
    seen.add(node.id)
    yield node
    for child in node.children:
        yield from _walk(child, seen)


def tree_to_dot(root: BTNode, epoch: int) -> str:
    lines = ["digraph bt {", "  node [style=filled];"]
    seen: set = set()
    for node in _walk(root, seen):
        color = _STATUS_COLORS[node.status_at(epoch)]
        shape = {"condition": "ellipse", "action": "box"}.get(node.kind, "diamond")
        lines.append(
            f'  n{node.id} [label="{node.name}\\n{node.kind}", '
            f"fillcolor={color}, shape={shape}];"
        )
    seen.clear()
    for node in _walk(root, seen):
        for child in node.children:
            lines.append(f"  n{node.id} -> n{child.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_to_json(root: BTNode, epoch: int) -> Dict:
    def encode(node: BTNode) -> Dict:
        doc = {
            "id": node.id,
            "kind": node.kind,
            "name": node.name,
            "status": node.status_at(epoch).value,
            "children": [encode(c) for c in node.children],
        }
        if isinstance(node, Condition) and node.atoms is not None:
            doc["atoms"] = sorted(node.atoms)
        if isinstance(node, ActionNode):
            doc["action"] = node.action.key
        return doc

    return encode(root)
