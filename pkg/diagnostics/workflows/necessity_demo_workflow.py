import asyncio
import logging
from typing import Any, Dict

from TrajCert.application.models.domain import DemoReport
from TrajCert.application.services.experiment_service import necessity_demo
from TrajCert.business.interfaces.workflow_interface import WorkflowInterface
from TrajCert.infrastructure.data.artifact_store import write_demo
from diagnostics.config.config import SuiteConfig

# Configure logging
logger = logging.getLogger(__name__)


class NecessityDemoWorkflow(WorkflowInterface[Any, DemoReport]):
    """Minimum-norm interpolation trials on the spiked design; writes demo.csv and demo_summary.csv."""

    workflow_id = "necessity-demo"

    def __init__(self, config: SuiteConfig):
        self.config = config
        self.status: Dict[str, Any] = {"state": "idle"}

    async def execute(self, input_data: Any) -> DemoReport:
        self.status = {"state": "processing"}
        settings = self.config.demo_settings()
        trials = getattr(input_data, "trials", None)
        try:
            loop = asyncio.get_running_loop()
            report = await loop.run_in_executor(None, necessity_demo, settings, None, trials)
            write_demo(input_data.output_dir, report)
        except Exception as e:
            self.status = {"state": "failed", "error": str(e)}
            raise
        self.status = {"state": "completed", "fraction": report.fraction}
        return report

    async def get_status(self) -> Dict[str, Any]:
        return self.status

    async def cancel(self) -> bool:
        return False
