import logging
from pathlib import Path
from typing import Any, Dict, Optional

from TrajCert.application.interfaces.observability_interface import ObservabilityInterface
from TrajCert.application.models.domain import DemoReport, SuiteResult
from TrajCert.application.models.errors import InvalidInputError
from TrajCert.business.interfaces.business_logic_interface import BusinessLogicInterface
from TrajCert.infrastructure.data.csv_store import format_number
from TrajCert.infrastructure.observability.factory import create_observability
from diagnostics.business_logic.format_response import format_suite
from diagnostics.business_logic.report_service import ReportOutcome
from diagnostics.config.config import SuiteConfig, load_suite_config
from diagnostics.workflows.gen_workflow import GenWorkflow
from diagnostics.workflows.necessity_demo_workflow import NecessityDemoWorkflow
from diagnostics.workflows.report_workflow import ReportWorkflow
from diagnostics.workflows.suite_workflow import (
    AblateLabelsWorkflow,
    AblateNeighborWorkflow,
    CompareOptimizersWorkflow,
    SuiteWorkflow,
    SweepWorkflow,
)

# Configure logging
logger = logging.getLogger(__name__)

SUITE_WORKFLOWS = {
    "run": SuiteWorkflow,
    "sweep": SweepWorkflow,
    "compare-optimizers": CompareOptimizersWorkflow,
    "ablate-neighbor": AblateNeighborWorkflow,
    "ablate-labels": AblateLabelsWorkflow,
}
WORKFLOW_IDS = ("gen", *SUITE_WORKFLOWS, "necessity-demo", "report")


class BusinessLogicManager(BusinessLogicInterface):
    """Certificate-suite implementation of business logic operations."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize business logic components.

        Args:
            config: Optional settings; "environ" replaces os.environ when resolving configuration
        """
        self.config = config or {}
        self.workflows: Dict[str, Any] = {}

    def load_config(self, command: Any) -> SuiteConfig:
        overrides: Dict[str, Any] = {}
        if getattr(command, "seeds", None) is not None:
            overrides["seeds"] = {"count": command.seeds}
        if getattr(command, "workers", None) is not None:
            overrides["suite"] = {"workers": command.workers}
        return load_suite_config(
            command.config_path,
            profile=getattr(command, "profile", None),
            environ=self.config.get("environ"),
            overrides=overrides,
        )

    def determine_workflow(self, command: Any) -> str:
        workflow_id = str(getattr(command.subcommand, "value", command.subcommand))
        if workflow_id not in WORKFLOW_IDS:
            raise InvalidInputError(f"unknown subcommand {workflow_id!r}")
        return workflow_id

    def get_workflow(self, workflow_id: str, config: SuiteConfig) -> Any:
        """
        Get a workflow instance by ID.

        Args:
            workflow_id: The subcommand name
            config: The resolved suite configuration

        Returns:
            The workflow instance
        """
        if workflow_id in SUITE_WORKFLOWS:
            workflow = SUITE_WORKFLOWS[workflow_id](config, self.get_observability(config))
        elif workflow_id == "gen":
            workflow = GenWorkflow(config)
        elif workflow_id == "necessity-demo":
            workflow = NecessityDemoWorkflow(config)
        elif workflow_id == "report":
            workflow = ReportWorkflow()
        else:
            raise InvalidInputError(f"Unknown workflow: {workflow_id}")
        self.workflows[workflow_id] = workflow
        return workflow

    def get_observability(self, config: SuiteConfig) -> Optional[ObservabilityInterface]:
        return create_observability(config.observability.model_dump())

    def prepare_output(self, command: Any, config: SuiteConfig) -> None:
        if self.determine_workflow(command) == "report":
            return
        out_dir = Path(command.output_dir)
        if out_dir.exists() and not out_dir.is_dir():
            raise InvalidInputError(f"{out_dir} exists and is not a directory")
        if out_dir.is_dir() and any(out_dir.iterdir()) and not getattr(command, "force", False):
            raise InvalidInputError(f"{out_dir} already holds outputs; pass --force to overwrite them")
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.resolved").write_text(config.resolved_json(), encoding="utf-8")

    def process_response(self, response: Any) -> Dict[str, Any]:
        """
        Process a response from a workflow.

        Returns:
            status, exit_code and the console message
        """
        if isinstance(response, SuiteResult):
            return {
                "status": "completed" if response.ok else "failed",
                "exit_code": 0 if response.ok else 1,
                "message": format_suite(response),
            }
        if isinstance(response, DemoReport):
            message = (
                f"necessity demo: fraction={format_number(response.fraction)} over {response.counted_trials} "
                f"interpolating trials (risk_max={format_number(response.risk_max)}, "
                f"delta_min={format_number(response.delta_min)}, calibrated={response.calibrated}), "
                f"dropped={response.dropped}, interpolation ok={response.interpolation_ok}"
            )
            return {"status": "completed", "exit_code": 0, "message": message}
        if isinstance(response, ReportOutcome):
            return {
                "status": "completed" if response.exit_code == 0 else "failed",
                "exit_code": response.exit_code,
                "message": response.text().rstrip("\n"),
            }
        if isinstance(response, list):
            return {"status": "completed", "exit_code": 0, "message": "\n".join(f"wrote {p}" for p in response)}
        return {"status": "completed", "exit_code": 0, "message": str(response)}
