"""Shared plumbing for gradient-check units."""

import logging
from typing import Any, Dict

import numpy as np

from runner.config_loader import CheckSpec


class GradientCheckUnit:
    """One family of differentiable components checked against central differences."""

    name = "unit"
    component = "unknown"

    def __init__(self, plan_name: str, spec: CheckSpec, eps: float = 1e-5):
        self.plan_name = plan_name
        self.spec = spec
        self.eps = eps
        self.rng = np.random.default_rng(spec.seed)
        self.logger = logging.getLogger(f"check.{self.name}.{plan_name}")

    def measure(self) -> Dict[str, Dict[str, float]]:
        """Max relative error per checked tensor, grouped by linear / non-linear."""
        raise NotImplementedError

    def execute(self) -> Dict[str, Any]:
        measured = self.measure()
        errors = {**measured["linear"], **measured["nonlinear"]}
        self.logger.info(f"{len(errors)} gradients checked, eps {self.eps}")
        failures = [
            (name, err, self.spec.linear_tolerance) for name, err in measured["linear"].items()
            if not err < self.spec.linear_tolerance
        ] + [
            (name, err, self.spec.tolerance) for name, err in measured["nonlinear"].items()
            if not err < self.spec.tolerance
        ]
        result: Dict[str, Any] = {
            "name": self.name,
            "component": self.component,
            "status": "PASS" if not failures else "FAIL",
            "max_error": max(errors.values(), default=0.0),
            "tolerance": self.spec.tolerance,
            "linear_tolerance": self.spec.linear_tolerance,
            "errors": errors,
        }
        if failures:
            worst = max(failures, key=lambda f: f[1] / f[2])
            for name, err, tol in failures:
                self.logger.error(f"{name}: relative error {err:.3e} exceeds {tol:.0e}")
            result["failure_reason"] = f"{worst[0]} gradient off by {worst[1]:.3e} (tolerance {worst[2]:.0e})"
            result["recommended_action"] = f"Inspect the backward rule behind {worst[0]}"
        return result

    def randn(self, *shape: int) -> np.ndarray:
        return self.rng.normal(size=shape)
