"""Gradient-check suite orchestration and result reporting."""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from checks.block_gradient_check import BlockGradientCheck
from checks.head_gradient_check import HeadGradientCheck
from checks.tensor_ops_check import TensorOpsCheck
from core.errors import ConfigurationError
from runner.config_loader import CheckSpec, GradcheckSection


class CheckOrchestrator:
    """Runs the checks a plan lists, in order, and collects PASS/FAIL results."""

    CHECK_REGISTRY = {
        'tensor_ops': TensorOpsCheck,
        'blocks': BlockGradientCheck,
        'head': HeadGradientCheck,
    }

    def __init__(self, plan_name: str, plan: GradcheckSection, output_dir: Optional[Path] = None):
        self.plan_name = plan_name
        self.plan = plan
        self.output_dir = output_dir
        self.logger = logging.getLogger(f"orchestrator.{plan_name}")

        self.results: Dict[str, Any] = {
            'plan': plan_name,
            'timestamp': datetime.now().isoformat(),
            'eps': plan.eps,
            'checks': [],
            'overall_status': 'PASS'
        }

    def run(self) -> Dict[str, Any]:
        self.logger.info(f"Executing check plan: {self.plan_name}")

        for spec in self.plan.checks:
            self.logger.info(f"Running check: {spec.name}")
            try:
                result = self._run_check(spec)
                self.results['checks'].append(result)

                if result['status'] == 'FAIL':
                    self.results['overall_status'] = 'FAIL'
                    self._build_failure_summary(result)

            except Exception as e:
                self.logger.exception(f"Check {spec.name} raised exception: {e}")
                result = {
                    'name': spec.name,
                    'status': 'ERROR',
                    'error': str(e),
                    'component': getattr(self.CHECK_REGISTRY.get(spec.name), 'component', 'unknown'),
                    'failure_reason': f"{type(e).__name__}: {e}",
                    'recommended_action': 'Fix the check plan or the component that raised',
                }
                self.results['checks'].append(result)
                self.results['overall_status'] = 'FAIL'
                self._build_failure_summary(result)

        if self.output_dir is not None:
            self._write_results()
        return self.results

    def _run_check(self, spec: CheckSpec) -> Dict[str, Any]:
        if spec.name not in self.CHECK_REGISTRY:
            raise ConfigurationError(f"Unknown check: {spec.name}")

        check = self.CHECK_REGISTRY[spec.name](self.plan_name, spec, self.plan.eps)

        start_time = datetime.now()
        result = check.execute()
        duration = (datetime.now() - start_time).total_seconds()

        result['duration_sec'] = round(duration, 2)
        return result

    def _build_failure_summary(self, failed: Dict[str, Any]) -> None:
        # first failure wins
        if 'failure_summary' in self.results:
            return
        self.results['failure_summary'] = {
            'component': failed.get('component', 'unknown'),
            'root_cause': failed.get('failure_reason', 'unknown'),
            'action': failed.get('recommended_action', 'Manual investigation required')
        }

    def _write_results(self) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        output_file = self.output_dir / f"{self.plan_name}_{timestamp}_gradcheck.json"

        with open(output_file, 'w') as f:
            json.dump(self.results, f, indent=2)

        self.logger.info(f"Results written to {output_file}")
        return output_file
