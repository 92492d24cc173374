"""Tests for behavior-tree compilation, tick semantics, and reconfiguration."""
import random

import pytest

from ltlbt.bt import (
    ActionNode,
    ActionTuple,
    Chooser,
    Condition,
    Executor,
    NodeStatus,
    Selector,
    Sequence,
    StateUpdateDecorator,
    Subtree,
    TickContext,
    action_condition_atoms,
    build_action_condition_subtree,
    build_state_condition_subtree,
    build_task_root,
    find_recovery_subtree,
    offline_rebuild,
    plan_to_action_tuples,
    reconfigure,
    state_atoms,
    tick,
    tree_to_dot,
    tree_to_json,
)
from ltlbt.costs import ExperienceCache, GeometricCostProvider
from ltlbt.search import Plan, PlannerStats, PlanStep, ProductState, plan_astar
from ltlbt.world import (
    FixedRegion,
    MoveObject,
    MoveRegion,
    SymbolicState,
    TrayGeom,
    WorldGeometry,
    apply_action,
    enumerate_actions,
    ts_from_geometry,
)


class FakeExecutor(Executor):
    """Scripted executor: each dispatched action runs for a fixed number
    of polls before succeeding (or failing, if so scripted)."""

    def __init__(self, durations=None, failures=()):
        self.durations = dict(durations or {})
        self.failures = set(failures)
        self.dispatched = []
        self.recorded = []
        self._remaining = {}

    def dispatch(self, action):
        self.dispatched.append(action.key)
        self._remaining[action.key] = self.durations.get(action.key, 0)

    def poll(self, action):
        if action.key in self.failures:
            return NodeStatus.FAILURE
        left = self._remaining.get(action.key, 0)
        if left <= 0:
            return NodeStatus.SUCCESS
        self._remaining[action.key] = left - 1
        return NodeStatus.RUNNING

    def record_state(self, state):
        self.recorded.append(state)


def ctx_for(state, executor=None):
    return TickContext.of(state, executor or FakeExecutor())


def make_plan(ts, steps):
    """Wrap a chained (state, action, state, ...) walk as a Plan."""
    plan_steps = []
    for src, action, dst in steps:
        plan_steps.append(
            PlanStep(ProductState(src, "q0"), action, ProductState(dst, "q0"), 1.0)
        )
    return Plan(tuple(plan_steps), float(len(plan_steps)), PlannerStats())


def two_object_world():
    geo = WorldGeometry(home=(0.0, 0.0, 0.3))
    geo.regions["r1"] = FixedRegion("r1", (0.3, 0.0, 0.0))
    geo.regions["r2"] = FixedRegion("r2", (-0.3, 0.0, 0.0))
    geo.regions["r3"] = FixedRegion("r3", (0.0, 0.3, 0.0))
    s0 = SymbolicState.of({"o1": "r1", "o2": "r1"})
    geo.objects["o1"] = geo.region_center("r1")
    geo.objects["o2"] = geo.region_center("r1")
    return geo, ts_from_geometry(geo, s0), s0


class TestStateAtoms:
    def test_objects_and_docks(self):
        s = SymbolicState.of({"o1": "r1", "o2": "rhand"}, {"r3": "d2"})
        assert state_atoms(s) == {"o1r1", "o2rhand", "r3d2"}


class TestComposites:
    def test_sequence_first_non_success(self):
        s = SymbolicState.of({"o1": "r1"})
        seq = Sequence([Condition("a", frozenset({"o1r1"})),
                        Condition("b", frozenset({"o1r2"}))])
        assert tick(seq, ctx_for(s)) == NodeStatus.FAILURE

    def test_sequence_all_success(self):
        s = SymbolicState.of({"o1": "r1"})
        seq = Sequence([Condition("a", frozenset({"o1r1"})), Condition("b", frozenset())])
        assert tick(seq, ctx_for(s)) == NodeStatus.SUCCESS

    def test_selector_first_non_failure(self):
        s = SymbolicState.of({"o1": "r1"})
        sel = Selector([Condition("a", frozenset({"o1r2"})),
                        Condition("b", frozenset({"o1r1"}))])
        assert tick(sel, ctx_for(s)) == NodeStatus.SUCCESS

    def test_selector_all_fail(self):
        s = SymbolicState.of({"o1": "r1"})
        sel = Selector([Condition("a", frozenset({"o1r2"})),
                        Condition("b", frozenset({"o1r3"}))])
        assert tick(sel, ctx_for(s)) == NodeStatus.FAILURE

    def test_condition_predicate_exception_is_failure(self):
        s = SymbolicState.of({"o1": "r1"})
        boom = Condition("boom", predicate=lambda ctx: 1 / 0)
        assert tick(boom, ctx_for(s)) == NodeStatus.FAILURE

    def test_chooser_non_preemption(self):
        # child2 locked while RUNNING; child1 becoming satisfiable must not preempt
        s1 = SymbolicState.of({"o1": "r2"})
        s2 = SymbolicState.of({"o1": "r1"})
        executor = FakeExecutor({"move_o1_r3": 3})
        gate = Condition("gate", frozenset({"o1r1"}))
        runner = Sequence([Condition("go", frozenset()), ActionNode(MoveObject("o1", "r3"))])
        chooser = Chooser([gate, runner])
        ctx = TickContext.of(s1, executor)
        assert tick(chooser, ctx) == NodeStatus.RUNNING
        # gate is now satisfiable, but the chooser stays on the runner
        ctx2 = TickContext.of(s2, executor)
        ctx2.epoch = ctx.epoch
        assert tick(chooser, ctx2) == NodeStatus.RUNNING
        assert gate.status_at(ctx2.epoch) == NodeStatus.INVALID

    def test_chooser_unlocks_on_terminal(self):
        s = SymbolicState.of({"o1": "r1"})
        executor = FakeExecutor({"move_o1_r3": 1})
        runner = ActionNode(MoveObject("o1", "r3"))
        chooser = Chooser([runner, Condition("fallback", frozenset())])
        ctx = TickContext.of(s, executor)
        assert tick(chooser, ctx) == NodeStatus.RUNNING
        assert tick(chooser, ctx) == NodeStatus.SUCCESS
        assert chooser.locked is None


class TestActionLeaf:
    def test_single_dispatch_until_terminal(self):
        s = SymbolicState.of({"o1": "r1"})
        executor = FakeExecutor({"move_o1_r2": 2})
        node = ActionNode(MoveObject("o1", "r2"))
        ctx = TickContext.of(s, executor)
        assert tick(node, ctx) == NodeStatus.RUNNING
        assert tick(node, ctx) == NodeStatus.RUNNING
        assert tick(node, ctx) == NodeStatus.SUCCESS
        assert executor.dispatched == ["move_o1_r2"]

    def test_rearm_after_terminal(self):
        s = SymbolicState.of({"o1": "r1"})
        executor = FakeExecutor()
        node = ActionNode(MoveObject("o1", "r2"))
        ctx = TickContext.of(s, executor)
        tick(node, ctx)
        tick(node, ctx)
        assert executor.dispatched == ["move_o1_r2", "move_o1_r2"]

    def test_state_update_records_on_success(self):
        s = SymbolicState.of({"o1": "r1"})
        s_after = SymbolicState.of({"o1": "r2"})
        executor = FakeExecutor()
        node = StateUpdateDecorator(ActionNode(MoveObject("o1", "r2")), s_after)
        assert tick(node, TickContext.of(s, executor)) == NodeStatus.SUCCESS
        assert executor.recorded == [s_after]


class TestActionTuples:
    def test_two_object_example(self):
        geo, ts, s0 = two_object_world()
        s1 = apply_action(ts, s0, MoveObject("o1", "r2"))
        plan = make_plan(ts, [(s0, MoveObject("o1", "r2"), s1)])
        (t,) = plan_to_action_tuples(plan)
        assert t.c_pre == {"o1r1", "o2r1"}
        assert t.c_post == {"o1r2", "o2r1"}
        assert t.c_run == {"o1rhand", "o2r1"}

    def test_chaining_invariant(self):
        geo, ts, s0 = two_object_world()
        ba_plan = plan_astar(
            ts,
            __import__("ltlbt.ltl", fromlist=["build_buchi"]).build_buchi(
                __import__("ltlbt.ltl", fromlist=["to_nnf"]).to_nnf(
                    __import__("ltlbt.ltl", fromlist=["parse_formula"]).parse_formula(
                        "F (o1r2 & o2r2)"
                    )
                )
            ),
            geo,
            GeometricCostProvider("home"),
            ExperienceCache(),
        )
        tuples = plan_to_action_tuples(ba_plan)
        assert len(tuples) >= 2
        for a, b in zip(tuples, tuples[1:]):
            assert a.c_post == b.c_pre

    def test_empty_plan(self):
        assert plan_to_action_tuples(Plan((), 0.0, PlannerStats())) == []

    def test_action_condition_restriction(self):
        geo, ts, s0 = two_object_world()
        s1 = apply_action(ts, s0, MoveObject("o1", "r2"))
        plan = make_plan(ts, [(s0, MoveObject("o1", "r2"), s1)])
        (t,) = plan_to_action_tuples(plan)
        assert action_condition_atoms(t) == {"o1r1"}

    def test_action_condition_includes_tray_docks(self):
        geo = WorldGeometry()
        geo.regions["r1"] = FixedRegion("r1", (0.3, 0.0, 0.0))
        geo.trays["r9"] = TrayGeom("r9", {"d1": (0.0, 0.3, 0.0), "d2": (0.0, -0.3, 0.0)}, "d1")
        s0 = SymbolicState.of({"o1": "r1"}, {"r9": "d1"})
        geo.objects["o1"] = geo.region_center("r1")
        ts = ts_from_geometry(geo, s0)
        s1 = apply_action(ts, s0, MoveObject("o1", "r9"))
        plan = make_plan(ts, [(s0, MoveObject("o1", "r9"), s1)])
        (t,) = plan_to_action_tuples(plan)
        assert action_condition_atoms(t) == {"o1r1", "r9d1"}
        s2 = apply_action(ts, s1, MoveRegion("r9", "d2"))
        plan2 = make_plan(ts, [(s1, MoveRegion("r9", "d2"), s2)])
        (t2,) = plan_to_action_tuples(plan2)
        assert action_condition_atoms(t2) == {"r9d1"}


class TestSubtrees:
    def build_tuple(self):
        geo, ts, s0 = two_object_world()
        s1 = apply_action(ts, s0, MoveObject("o1", "r2"))
        plan = make_plan(ts, [(s0, MoveObject("o1", "r2"), s1)])
        return plan_to_action_tuples(plan)[0], s0, s1

    def test_state_style_falsified_by_unrelated_change(self):
        t, s0, s1 = self.build_tuple()
        st = build_state_condition_subtree(t)
        moved_other = SymbolicState.of({"o1": "r1", "o2": "r2"})
        assert tick(st.root, ctx_for(moved_other)) == NodeStatus.FAILURE

    def test_action_style_survives_unrelated_change(self):
        t, s0, s1 = self.build_tuple()
        st = build_action_condition_subtree(t)
        moved_other = SymbolicState.of({"o1": "r1", "o2": "r2"})
        assert tick(st.root, ctx_for(moved_other)) == NodeStatus.SUCCESS
        assert st.completed

    def test_running_branch_resumes_mid_action(self):
        t, s0, s1 = self.build_tuple()
        st = build_state_condition_subtree(t)
        executor = FakeExecutor({"move_o1_r2": 2})
        ctx = TickContext.of(s0, executor)
        assert tick(st.root, ctx) == NodeStatus.RUNNING
        # mid-action snapshot: o1 held, precondition atoms no longer full
        held = SymbolicState.of({"o1": "rhand", "o2": "r1"})
        ctx2 = TickContext.of(held, executor)
        ctx2.epoch = ctx.epoch
        assert tick(st.root, ctx2) == NodeStatus.RUNNING
        assert tick(st.root, TickContext.of(held, executor)) == NodeStatus.SUCCESS
        assert executor.dispatched == ["move_o1_r2"]  # never re-dispatched

    def test_precondition_held_at_dispatch(self):
        t, s0, s1 = self.build_tuple()
        st = build_state_condition_subtree(t)
        executor = FakeExecutor()
        tick(st.root, TickContext.of(s0, executor))
        assert state_atoms(s0) >= st.pre_atoms()
        assert executor.dispatched == ["move_o1_r2"]


class TestTaskRoot:
    def make_session(self, style):
        geo, ts, s0 = two_object_world()
        from ltlbt.ltl import build_buchi, parse_formula, to_nnf

        ba = build_buchi(to_nnf(parse_formula("F (o1r2 & o2r2)")))
        plan = plan_astar(ts, ba, geo, GeometricCostProvider("home"), ExperienceCache())
        builder = (
            build_state_condition_subtree if style == "state"
            else build_action_condition_subtree
        )
        subtrees = [builder(t, i) for i, t in enumerate(plan_to_action_tuples(plan))]
        goal_atoms = frozenset({"o1r2", "o2r2"})
        root = build_task_root(subtrees, lambda ctx: goal_atoms <= ctx.atoms)
        return ts, plan, subtrees, root

    def test_executes_plan_in_order_to_success(self):
        ts, plan, subtrees, root = self.make_session("action")
        executor = FakeExecutor()
        state = plan.states()[0]
        for _ in range(20):
            status = tick(root, TickContext.of(state, executor))
            if executor.recorded:
                state = executor.recorded[-1]
            if status == NodeStatus.SUCCESS:
                break
        assert status == NodeStatus.SUCCESS
        assert executor.dispatched == plan.action_keys

    def test_failure_when_no_subtree_applies(self):
        ts, plan, subtrees, root = self.make_session("state")
        # a state matching no precondition and not the goal
        lost = SymbolicState.of({"o1": "r3", "o2": "r3"})
        assert tick(root, ctx_for(lost)) == NodeStatus.FAILURE

    def test_tick_determinism(self):
        runs = []
        for _ in range(2):
            ts, plan, subtrees, root = self.make_session("action")
            executor = FakeExecutor({k: 1 for k in plan.action_keys})
            state = plan.states()[0]
            statuses = []
            for _ in range(12):
                statuses.append(tick(root, TickContext.of(state, executor)).value)
                if executor.recorded:
                    state = executor.recorded[-1]
            runs.append(statuses)
        assert runs[0] == runs[1]


class TestRecovery:
    def make_subtrees(self):
        geo, ts, s0 = two_object_world()
        from ltlbt.ltl import build_buchi, parse_formula, to_nnf

        ba = build_buchi(to_nnf(parse_formula("F (o1r2 & o2r2)")))
        plan = plan_astar(ts, ba, geo, GeometricCostProvider("home"), ExperienceCache())
        subtrees = [
            build_action_condition_subtree(t, i)
            for i, t in enumerate(plan_to_action_tuples(plan))
        ]
        return plan, subtrees

    def test_exact_precondition_match(self):
        plan, subtrees = self.make_subtrees()
        snap = plan.states()[1]
        assert find_recovery_subtree(snap, subtrees) == 1

    def test_knocked_back_object_matches_earlier_subtree(self):
        plan, subtrees = self.make_subtrees()
        subtrees[0].completed = True
        # o1 knocked back to its source after its move completed
        assert find_recovery_subtree(plan.states()[0], subtrees) is not None
        subtrees[0].completed = False
        assert find_recovery_subtree(plan.states()[0], subtrees) == 0

    def test_no_match_returns_none(self):
        plan, subtrees = self.make_subtrees()
        lost = SymbolicState.of({"o1": "r3", "o2": "r3"})
        assert find_recovery_subtree(lost, subtrees) is None

    def test_completed_subtrees_skipped(self):
        plan, subtrees = self.make_subtrees()
        for st in subtrees:
            st.completed = True
        assert find_recovery_subtree(plan.states()[0], subtrees) is None


class TestReconfigure:
    @staticmethod
    def random_plan(ts, rng, length):
        s = ts.init
        steps = []
        for _ in range(length):
            actions = enumerate_actions(ts, s)
            a = rng.choice(actions)
            s2 = apply_action(ts, s, a)
            steps.append((s, a, s2))
            s = s2
        return make_plan(ts, steps)

    def test_identical_plan_zero_changes(self):
        geo, ts, s0 = two_object_world()
        plan = self.random_plan(ts, random.Random(1), 4)
        current = offline_rebuild(plan, "action")
        res = reconfigure(current, plan, "action")
        assert res.changes == 0
        assert res.kept == 4
        assert [st is old for st, old in zip(res.subtrees, current)] == [True] * 4

    def test_shared_suffix_counts(self):
        geo, ts, s0 = two_object_world()
        rng = random.Random(2)
        p_old = self.random_plan(ts, rng, 5)
        # new plan: fresh 2-step head, then p_old's last 3 steps re-rooted
        shared = p_old.steps[-3:]
        head = self.random_plan(ts, rng, 2).steps
        p_new = Plan(tuple(head) + tuple(shared), 5.0, PlannerStats())
        current = offline_rebuild(p_old, "action")
        res = reconfigure(current, p_new, "action")
        assert res.kept == 3
        assert res.inserted == 2
        assert res.removed == 2

    def test_empty_new_plan_removes_all(self):
        geo, ts, s0 = two_object_world()
        plan = self.random_plan(ts, random.Random(3), 3)
        current = offline_rebuild(plan, "action")
        res = reconfigure(current, Plan((), 0.0, PlannerStats()), "action")
        assert res.subtrees == []
        assert res.removed == 3

    def test_running_subtree_removal_deferred(self):
        geo, ts, s0 = two_object_world()
        plan = self.random_plan(ts, random.Random(4), 3)
        current = offline_rebuild(plan, "action")
        current[0].action_node.dispatched = True  # mid-flight
        res = reconfigure(current, Plan((), 0.0, PlannerStats()), "action")
        assert len(res.deferred) == 1
        assert res.deferred[0] is current[0]
        assert current[0].pending_removal
        assert res.action_keys() == []

    def test_equivalence_with_offline_rebuild_random_pairs(self):
        geo, ts, s0 = two_object_world()
        rng = random.Random(5)
        for _ in range(200):
            p_old = self.random_plan(ts, rng, rng.randint(0, 5))
            p_new = self.random_plan(ts, rng, rng.randint(0, 5))
            current = offline_rebuild(p_old, "action")
            res = reconfigure(current, p_new, "action")
            fresh = offline_rebuild(p_new, "action")
            assert res.action_keys() == [st.tup.action.key for st in fresh]


class TestExport:
    def test_dot_and_json(self):
        geo, ts, s0 = two_object_world()
        s1 = apply_action(ts, s0, MoveObject("o1", "r2"))
        plan = make_plan(ts, [(s0, MoveObject("o1", "r2"), s1)])
        st = build_action_condition_subtree(plan_to_action_tuples(plan)[0])
        ctx = ctx_for(s0)
        tick(st.root, ctx)
        dot = tree_to_dot(st.root, ctx.epoch)
        assert dot.startswith("digraph bt {")
        assert "move_o1_r2" in dot
        doc = tree_to_json(st.root, ctx.epoch)
        assert doc["kind"] == "guard"
        chooser = doc["children"][0]
        assert chooser["kind"] == "chooser"
        kinds = {c["kind"] for c in chooser["children"]}
        assert kinds == {"sequence"}
        conds = [c["children"][0] for c in chooser["children"]]
        assert all("atoms" in c for c in conds)

    def test_untouched_nodes_export_invalid(self):
        s = SymbolicState.of({"o1": "r1"})
        sel = Selector([Condition("hit", frozenset({"o1r1"})),
                        Condition("never", frozenset({"o1r2"}))])
        ctx = ctx_for(s)
        tick(sel, ctx)
        doc = tree_to_json(sel, ctx.epoch)
        assert doc["children"][0]["status"] == "success"
        assert doc["children"][1]["status"] == "invalid"
