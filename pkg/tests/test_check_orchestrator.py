"""Gradient-check units and the plan orchestrator."""

import json

import pytest

from checks.block_gradient_check import BlockGradientCheck
from checks.head_gradient_check import HeadGradientCheck
from checks.tensor_ops_check import TensorOpsCheck
from model.params import VARIANTS, init_params, named_parameters
from runner.check_orchestrator import CheckOrchestrator
from runner.config_loader import CheckSpec, GradcheckSection


def test_tensor_ops_pass():
    result = TensorOpsCheck("unit", CheckSpec("tensor_ops")).execute()
    assert result["status"] == "PASS", result["errors"]
    assert result["component"] == "tensor_core"


def test_blocks_pass():
    result = BlockGradientCheck("unit", CheckSpec("blocks", seed=1)).execute()
    assert result["status"] == "PASS", result["errors"]
    assert {"linear", "layer_norm", "cross_attention_block"} <= {name.split(".")[0] for name in result["errors"]}


@pytest.mark.parametrize("variant", VARIANTS)
def test_head_checks_every_parameter_once(variant):
    unit = HeadGradientCheck("unit", CheckSpec("head", seed=2, variants=(variant,)))
    result = unit.execute()
    assert result["status"] == "PASS", result["errors"]
    names = [name for name, _ in named_parameters(init_params(unit.mini_dims(variant), 2))]
    assert sorted(result["errors"]) == sorted(f"{variant}.{n}" for n in names)


def test_tolerance_below_rounding_fails_with_a_reason():
    result = TensorOpsCheck("unit", CheckSpec("tensor_ops", tolerance=1e-30, linear_tolerance=1e-30)).execute()
    assert result["status"] == "FAIL"
    assert "failure_reason" in result
    assert "recommended_action" in result


def test_orchestrator_writes_passing_plan(tmp_path):
    plan = GradcheckSection(checks=(CheckSpec("tensor_ops"), CheckSpec("head", variants=("baseline",))))
    results = CheckOrchestrator("quick", plan, tmp_path).run()
    assert results["overall_status"] == "PASS"
    assert [c["name"] for c in results["checks"]] == ["tensor_ops", "head"]
    written = list(tmp_path.glob("quick_*_gradcheck.json"))
    assert len(written) == 1
    assert json.loads(written[0].read_text())["overall_status"] == "PASS"


def test_unknown_check_is_recorded_as_error():
    plan = GradcheckSection(checks=(CheckSpec("optimizer"), CheckSpec("tensor_ops")))
    results = CheckOrchestrator("broken", plan).run()
    assert results["overall_status"] == "FAIL"
    assert [c["status"] for c in results["checks"]] == ["ERROR", "PASS"]
    assert "Unknown check" in results["failure_summary"]["root_cause"]
