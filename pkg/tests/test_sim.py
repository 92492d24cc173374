"""Tests for the execution simulator: world stepping, perception,
interventions, and the outer perceive/recover/replan/tick loop."""
import json

import pytest

from ltlbt.scenario import scenario_from_dict
from ltlbt.sim import (
    ActiveAction,
    HeldObjectConflict,
    InterventionEvent,
    PerceptionGap,
    RunConfig,
    Session,
    SimWorld,
    UnresolvableEvent,
    inject,
    intervention_from_dict,
    load_script,
    perceive,
    run_session,
    step,
)
from ltlbt.world import MoveObject, RHAND


def three_block_doc(**extra):
    doc = {
        "schema": "v1",
        "name": "three-block",
        "regions": [
            {"id": "r1", "center": [0.0, 0.0, 0.0]},
            {"id": "r2", "center": [0.6, 0.0, 0.0]},
        ],
        "objects": [
            {"id": "o1", "region": "r1"},
            {"id": "o2", "region": "r1"},
            {"id": "o3", "region": "r1"},
        ],
        "formula": "F (o1r2 & o2r2 & o3r2)",
        "cost": {"approach": "chain", "speed": 0.25},
    }
    doc.update(extra)
    return doc


def make_world(doc=None, seed=0):
    sc = scenario_from_dict(doc or three_block_doc())
    return sc, SimWorld(sc.build_geometry(), seed=seed)


def events(session, *kinds):
    return [e for e in session.trace if e["event"] in kinds]


class TestStep:
    def test_exact_completion(self):
        _, world = make_world()
        action = MoveObject("o1", "r2")
        world.gripper = "o1"
        world.active = ActiveAction(action, 4.0, 4.0, "r1", 0.0)
        step(world, 4.0)
        assert world.active is None
        assert world.last_completed == action.key
        assert world.gripper is None
        assert perceive(world).region("o1") == "r2"

    def test_partial_progress(self):
        _, world = make_world()
        world.gripper = "o1"
        world.active = ActiveAction(MoveObject("o1", "r2"), 4.0, 4.0, "r1", 0.0)
        step(world, 2.0)
        assert world.active is not None
        assert world.active.remaining == pytest.approx(2.0)
        assert world.clock == pytest.approx(2.0)

    def test_idle_clock_advance(self):
        _, world = make_world()
        step(world, 1.5)
        assert world.clock == pytest.approx(1.5)
        assert world.active is None

    def test_nonpositive_dt_rejected(self):
        _, world = make_world()
        with pytest.raises(ValueError):
            step(world, 0.0)


class TestPerceive:
    def test_objects_at_centers(self):
        _, world = make_world()
        s = perceive(world)
        assert s.assignment_map == {"o1": "r1", "o2": "r1", "o3": "r1"}

    def test_held_object_reports_rhand(self):
        _, world = make_world()
        world.gripper = "o2"
        s = perceive(world)
        assert s.region("o2") == RHAND
        assert s.held == "o2"

    def test_position_outside_radii_raises(self):
        _, world = make_world()
        world.geometry.objects["o1"] = (0.3, 0.0, 0.0)  # between r1 and r2
        with pytest.raises(PerceptionGap):
            perceive(world)

    def test_tray_dock_read_through(self):
        doc = three_block_doc()
        doc["trays"] = [
            {"id": "r3", "docks": {"d1": [0.1, 0.3, 0], "d2": [0.5, 0.3, 0]},
             "dock": "d2"}
        ]
        _, world = make_world(doc)
        assert perceive(world).dock("r3") == "d2"


class TestIntervention:
    def test_unknown_kind_rejected_at_construction(self):
        with pytest.raises(ValueError):
            InterventionEvent.of(1.0, "teleport_robot", obj="o1")

    def test_dict_roundtrip_and_script_loading(self, tmp_path):
        e = InterventionEvent.of(2.5, "relocate_object", obj="o1", region="r2")
        assert intervention_from_dict(e.to_dict()) == e
        path = tmp_path / "script.json"
        path.write_text(json.dumps([e.to_dict()]))
        assert load_script(str(path)) == [e]

    def test_relocate_sets_change_flag(self):
        _, world = make_world()
        inject(world, InterventionEvent.of(0, "relocate_object", obj="o1", region="r2"))
        assert world.change_flag
        assert perceive(world).region("o1") == "r2"

    def test_relocate_unknown_targets(self):
        _, world = make_world()
        with pytest.raises(UnresolvableEvent):
            inject(world, InterventionEvent.of(0, "relocate_object", obj="ox", region="r2"))
        with pytest.raises(UnresolvableEvent):
            inject(world, InterventionEvent.of(0, "relocate_object", obj="o1", region="r9"))

    def test_held_object_conflicts(self):
        _, world = make_world()
        world.gripper = "o1"
        with pytest.raises(HeldObjectConflict):
            inject(world, InterventionEvent.of(0, "relocate_object", obj="o1", region="r2"))
        with pytest.raises(HeldObjectConflict):
            inject(world, InterventionEvent.of(0, "remove_object", obj="o1"))

    def test_add_and_remove_object(self):
        _, world = make_world()
        inject(world, InterventionEvent.of(0, "add_object", obj="o4", region="r2"))
        assert perceive(world).region("o4") == "r2"
        with pytest.raises(UnresolvableEvent):
            inject(world, InterventionEvent.of(0, "add_object", obj="o4", region="r2"))
        inject(world, InterventionEvent.of(0, "remove_object", obj="o4"))
        assert "o4" not in world.geometry.objects

    def test_add_tray_and_remove_region(self):
        _, world = make_world()
        inject(world, InterventionEvent.of(
            0, "add_tray", tray="r3",
            docks={"d1": (0.1, 0.3, 0.0), "d2": (0.5, 0.3, 0.0)}, dock="d1"))
        assert "r3" in world.geometry.trays
        inject(world, InterventionEvent.of(0, "remove_region", region="r3"))
        assert "r3" not in world.geometry.trays

    def test_remove_occupied_region_rejected(self):
        _, world = make_world()
        with pytest.raises(UnresolvableEvent):
            inject(world, InterventionEvent.of(0, "remove_region", region="r1"))


class TestRunSession:
    def test_clean_run_no_replans(self):
        s = run_session(scenario_from_dict(three_block_doc()), RunConfig(seed=0))
        m = s.metrics
        assert m.success and m.reason == "goal"
        assert m.replan_count == 0
        assert m.recovery_count == 0
        dispatched = events(s, "action_dispatched")
        assert len(dispatched) == 3
        assert {e["action"] for e in dispatched} == {
            "move_o1_r2", "move_o2_r2", "move_o3_r2"
        }

    def test_goal_already_satisfied(self):
        doc = three_block_doc(formula="F o1r1")
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0))
        assert s.metrics.success
        assert events(s, "action_dispatched") == []

    def test_infeasible_goal_reported(self):
        doc = three_block_doc(formula="F (o1r1 & o1r2)")
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0))
        assert not s.metrics.success
        assert s.metrics.reason == "infeasible"

    def test_timeout_reported(self):
        doc = three_block_doc(timeout_s=1.0)
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0))
        assert not s.metrics.success
        assert s.metrics.reason == "timeout"

    def test_relocation_recovered_without_replanning(self):
        sc = scenario_from_dict(three_block_doc())
        dry = run_session(sc, RunConfig(seed=0))
        first_done = events(dry, "action_completed")[0]
        obj = first_done["action"].split("_")[1]
        script = [InterventionEvent.of(
            first_done["t"] + 0.2, "relocate_object", obj=obj, region="r1")]
        s = run_session(scenario_from_dict(three_block_doc()), RunConfig(seed=0), script)
        m = s.metrics
        assert m.success
        assert m.recovery_count >= 1
        assert m.replan_count == 0
        # loop ordering: the change is handled by recovery, never a replan
        kinds = [e["event"] for e in events(s, "change_detected", "recovery",
                                            "replan_started")]
        assert kinds == ["change_detected", "recovery"]
        # the knocked-back object is re-picked: one extra dispatch
        assert len(events(s, "action_dispatched")) == 4

    def test_add_object_one_reconstruction_one_replan(self):
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        script = [InterventionEvent.of(0.5, "add_object", obj="o4", region="r2")]
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0), script)
        m = s.metrics
        assert m.success
        assert m.replan_count == 1
        assert len(events(s, "ts_reconstructed")) == 1
        assert m.ts_reconstruct_time_s > 0

    def test_remove_object_one_replan(self):
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        script = [InterventionEvent.of(0.5, "remove_object", obj="o3")]
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0), script)
        m = s.metrics
        assert m.success
        assert m.replan_count == 1
        assert len(events(s, "ts_reconstructed")) == 1

    def test_set_change_ordering_reconstruct_before_replan(self):
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        script = [InterventionEvent.of(0.5, "add_object", obj="o4", region="r2")]
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0), script)
        kinds = [e["event"] for e in events(
            s, "change_detected", "ts_reconstructed", "replan_started")]
        i_change = kinds.index("change_detected")
        i_recon = kinds.index("ts_reconstructed")
        i_replan = kinds.index("replan_started")
        assert i_change < i_recon < i_replan

    def test_replan_deferred_while_action_active(self):
        # the change lands mid-motion; the loop keeps ticking the running
        # subtree and replans at the next boundary
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        sc = scenario_from_dict(doc)
        dry = run_session(sc, RunConfig(seed=0))
        t_first = events(dry, "action_dispatched")[0]["t"]
        script = [InterventionEvent.of(t_first + 0.3, "add_object",
                                       obj="o4", region="r2")]
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0), script)
        assert s.metrics.success
        deferrals = events(s, "replan_deferred")
        assert deferrals, "expected the replan to wait for the action boundary"
        t_defer = deferrals[0]["t"]
        t_replan = events(s, "replan_started")[0]["t"]
        assert t_replan > t_defer

    def test_intervention_deferred_while_object_held(self):
        sc = scenario_from_dict(three_block_doc())
        dry = run_session(sc, RunConfig(seed=0))
        first = events(dry, "action_dispatched")[0]
        obj = first["action"].split("_")[1]
        script = [InterventionEvent.of(
            first["t"] + 0.3, "relocate_object", obj=obj, region="r1")]
        s = run_session(scenario_from_dict(three_block_doc()), RunConfig(seed=0), script)
        assert s.metrics.success
        deferred = events(s, "intervention_deferred")
        applied = events(s, "intervention_applied")
        assert deferred and applied
        assert applied[0]["t"] > deferred[0]["t"]

    def test_unresolvable_intervention_rejected_and_run_continues(self):
        script = [InterventionEvent.of(0.5, "relocate_object", obj="ox", region="r1")]
        s = run_session(scenario_from_dict(three_block_doc()), RunConfig(seed=0), script)
        assert s.metrics.success
        assert events(s, "intervention_rejected")

    def test_fault_injection_reactivates_subtree(self):
        doc = three_block_doc(formula="F o1r2", timeout_s=120.0)
        doc["objects"] = [{"id": "o1", "region": "r1"}]
        # the first grasp fails deterministically at fault_prob=1 … and every
        # later one too, so the session must time out with repeated faults
        s = run_session(scenario_from_dict(doc), RunConfig(seed=0, fault_prob=1.0))
        assert not s.metrics.success
        assert len(events(s, "fault_injected")) >= 2
        # a mild fault rate recovers: the object is re-picked and placed
        s2 = run_session(scenario_from_dict(doc), RunConfig(seed=3, fault_prob=0.5))
        assert s2.metrics.ticks > 0
        if events(s2, "fault_injected"):
            assert len(events(s2, "action_dispatched")) > 1

    def test_offline_variant_rebuilds_and_completes(self):
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        script = [InterventionEvent.of(0.5, "add_object", obj="o4", region="r2")]
        s = run_session(scenario_from_dict(doc),
                        RunConfig(seed=0, bt="offline_action"), script)
        assert s.metrics.success
        assert events(s, "rebuilt")
        assert not events(s, "reconfigured")

    def test_state_style_variant_completes(self):
        script = [InterventionEvent.of(0.5, "add_object", obj="o4", region="r2")]
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        s = run_session(scenario_from_dict(doc),
                        RunConfig(seed=0, bt="online_state"), script)
        assert s.metrics.success
        assert s.metrics.replan_count == 1

    def test_determinism_same_seed_same_trace(self):
        script = [
            InterventionEvent.of(0.5, "add_object", obj="o4", region="r2"),
            InterventionEvent.of(3.0, "relocate_object", obj="o4", region="r1"),
        ]
        doc = three_block_doc(formula="F (o1r2 & o2r2)")
        wall_keys = ("wall_time_s", "stats")
        wall_metrics = ("init_plan_time_s", "total_replan_time_s",
                        "ts_reconstruct_time_s")

        def normalize(sess):
            trace = [
                {k: v for k, v in e.items()
                 if k not in wall_keys and k not in wall_metrics}
                for e in sess.trace
            ]
            metrics = {k: v for k, v in sess.metrics.to_dict().items()
                       if k not in wall_metrics}
            return trace, metrics

        a = normalize(run_session(scenario_from_dict(doc), RunConfig(seed=7), script))
        b = normalize(run_session(scenario_from_dict(doc), RunConfig(seed=7), script))
        assert a == b

    def test_different_seed_changes_jitter_not_outcome(self):
        for seed in (1, 2):
            s = run_session(scenario_from_dict(three_block_doc()), RunConfig(seed=seed))
            assert s.metrics.success
            assert s.metrics.replan_count == 0

    def test_metrics_trace_ends_with_summary(self):
        s = run_session(scenario_from_dict(three_block_doc()), RunConfig(seed=0))
        assert s.trace[-1]["event"] == "metrics"
        assert s.trace[0]["event"] == "scenario_loaded"

    def test_full_graph_config_matches_partial_cost(self):
        # full construction needs path-independent costs: home approach
        doc = three_block_doc(cost={"approach": "home", "speed": 0.25})
        p = run_session(scenario_from_dict(doc), RunConfig(seed=0))
        f = run_session(scenario_from_dict(doc),
                        RunConfig(seed=0, planner="dijkstra", graph="full"))
        assert f.metrics.success
        pc = [e for e in p.trace if e["event"] == "initial_plan_done"][0]["cost"]
        fc = [e for e in f.trace if e["event"] == "initial_plan_done"][0]["cost"]
        assert pc == pytest.approx(fc)

    def test_session_object_exposes_bt_snapshot(self):
        sc = scenario_from_dict(three_block_doc())
        sess = Session(sc, RunConfig(seed=0))
        assert sess.bt_snapshot() is None
        assert sess.initial_plan()
        snap = sess.bt_snapshot()
        assert snap["kind"] == "chooser"
        assert len(snap["children"]) == 4  # 3 subtrees + goal sentinel
