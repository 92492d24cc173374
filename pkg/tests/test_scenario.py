"""Tests for scenario document validation and world construction."""
import json

import pytest

from ltlbt.scenario import (
    CostConfig,
    Scenario,
    ScenarioError,
    load_scenario,
    scenario_from_dict,
)


def minimal_doc():
    return {
        "schema": "v1",
        "name": "minimal",
        "regions": [
            {"id": "r1", "center": [0.3, 0.0, 0.0]},
            {"id": "r2", "center": [-0.3, 0.0, 0.0]},
        ],
        "objects": [{"id": "o1", "region": "r1"}],
        "formula": "F o1r2",
    }


class TestValidation:
    def test_minimal_document(self):
        sc = scenario_from_dict(minimal_doc())
        assert sc.name == "minimal"
        assert sc.objects == {"o1": "r1"}
        assert sc.cost.approach == "chain"

    def test_unknown_schema_rejected(self):
        doc = minimal_doc()
        doc["schema"] = "v0"
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)

    def test_problems_carry_field_paths(self):
        doc = minimal_doc()
        doc["regions"][1] = {"id": "r1", "center": [0, 0, 0]}  # duplicate id
        doc["objects"].append({"id": "o2", "region": "r9"})  # unknown region
        doc["formula"] = "F (o1r2"  # unbalanced paren
        with pytest.raises(ScenarioError) as exc:
            scenario_from_dict(doc)
        paths = {p for p, _ in exc.value.problems}
        assert "regions[1].id" in paths
        assert "objects[1].region" in paths
        assert "formula" in paths

    def test_bad_vector_shape(self):
        doc = minimal_doc()
        doc["regions"][0]["center"] = [1, 2]
        with pytest.raises(ScenarioError) as exc:
            scenario_from_dict(doc)
        assert any(p == "regions[0].center" for p, _ in exc.value.problems)

    def test_tray_dock_must_exist(self):
        doc = minimal_doc()
        doc["trays"] = [
            {"id": "r3", "docks": {"d1": [0, 0.3, 0]}, "dock": "d9"}
        ]
        with pytest.raises(ScenarioError) as exc:
            scenario_from_dict(doc)
        assert any(p == "trays[0].dock" for p, _ in exc.value.problems)

    def test_bad_cost_config(self):
        doc = minimal_doc()
        doc["cost"] = {"approach": "teleport", "speed": 0}
        with pytest.raises(ScenarioError) as exc:
            scenario_from_dict(doc)
        paths = {p for p, _ in exc.value.problems}
        assert {"cost.approach", "cost.speed"} <= paths


class TestConstruction:
    def test_build_ts_checks_formula_atoms(self):
        doc = minimal_doc()
        doc["formula"] = "F o1r9"  # parses, but no such atom in the world
        sc = scenario_from_dict(doc)
        with pytest.raises(Exception):
            sc.build_ts()

    def test_initial_state_and_geometry(self):
        doc = minimal_doc()
        doc["trays"] = [
            {"id": "r3", "docks": {"d1": [0, 0.3, 0], "d2": [0, -0.3, 0]}, "dock": "d1"}
        ]
        sc = scenario_from_dict(doc)
        s0 = sc.initial_state()
        assert s0.region("o1") == "r1"
        assert s0.dock("r3") == "d1"
        geo = sc.build_geometry()
        assert geo.region_center("r3") == (0, 0.3, 0)

    def test_roundtrip_through_dict(self):
        doc = minimal_doc()
        sc = scenario_from_dict(doc)
        sc2 = scenario_from_dict(sc.to_dict())
        assert sc2.to_dict() == sc.to_dict()

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(minimal_doc()))
        sc = load_scenario(str(path))
        assert sc.name == "minimal"
        plan_ts = sc.build_ts()
        assert plan_ts.state_space_size() == 2
