import logging
from typing import Any, Dict, List, Optional

from TrajCert.application.interfaces.observability_interface import ObservabilityInterface
from TrajCert.application.models.domain import SuiteResult
from TrajCert.application.models.model_configs import Condition
from TrajCert.application.services.experiment_service import (
    label_conditions,
    neighbor_conditions,
    optimizer_conditions,
    step_size_conditions,
)
from TrajCert.business.interfaces.workflow_interface import WorkflowInterface
from TrajCert.orchestration.coordinators.suite_coordinator import SuiteCoordinator, SuiteRequest
from diagnostics.business_logic.format_response import emit_plot_series, render_tables, specs_for
from diagnostics.business_logic.table_specs import TABLES_BY_WORKFLOW
from diagnostics.config.config import SuiteConfig

# Configure logging
logger = logging.getLogger(__name__)


class SuiteWorkflow(WorkflowInterface[Any, SuiteResult]):
    """
    Runs a set of conditions through the suite coordinator, then renders the tables
    and plot series the subcommand owns.
    """

    workflow_id = "run"

    def __init__(self, config: SuiteConfig, observability: Optional[ObservabilityInterface] = None):
        self.config = config
        self.observability = observability
        self.coordinator: Optional[SuiteCoordinator] = None
        self.status: Dict[str, Any] = {"state": "idle"}

    def build_conditions(self) -> List[Condition]:
        """The union of the sweep, the optimizer comparison and both ablations."""
        base = self.config.base_condition()
        conditions = step_size_conditions(self.config.suite.etas, base)
        conditions += optimizer_conditions(base, self.config.optimizer_specs())
        conditions += neighbor_conditions(base)
        conditions += label_conditions(base)
        return conditions

    async def execute(self, input_data: Any) -> SuiteResult:
        """
        Execute the suite.

        Args:
            input_data: The CLI command; output_dir receives every artifact

        Returns:
            The suite result
        """
        self.status = {"state": "processing"}
        try:
            conditions = self.build_conditions()
            self.coordinator = SuiteCoordinator(self.config.suite.workers, self.observability)
            suite = await self.coordinator.coordinate(SuiteRequest(conditions, input_data.output_dir, name=f"tcert-{self.workflow_id}"))
            render_tables(suite, specs_for(TABLES_BY_WORKFLOW[self.workflow_id]), input_data.output_dir)
            emit_plot_series(suite, input_data.output_dir)
        except Exception as e:
            self.status = {"state": "failed", "error": str(e)}
            logger.error(f"Workflow {self.workflow_id} failed: {e}")
            raise
        self.status = {"state": "completed", "failures": len(suite.failures)}
        return suite

    async def get_status(self) -> Dict[str, Any]:
        if self.coordinator is not None and self.status["state"] == "processing":
            return {**self.status, "cells": self.coordinator.status}
        return self.status

    async def cancel(self) -> bool:
        # cells already submitted to the pool run to completion
        return False


class SweepWorkflow(SuiteWorkflow):
    workflow_id = "sweep"

    def build_conditions(self) -> List[Condition]:
        return step_size_conditions(self.config.suite.etas, self.config.base_condition())


class CompareOptimizersWorkflow(SuiteWorkflow):
    workflow_id = "compare-optimizers"

    def build_conditions(self) -> List[Condition]:
        return optimizer_conditions(self.config.base_condition(), self.config.optimizer_specs())


class AblateNeighborWorkflow(SuiteWorkflow):
    workflow_id = "ablate-neighbor"

    def build_conditions(self) -> List[Condition]:
        return neighbor_conditions(self.config.base_condition())


class AblateLabelsWorkflow(SuiteWorkflow):
    workflow_id = "ablate-labels"

    def build_conditions(self) -> List[Condition]:
        return label_conditions(self.config.base_condition())
