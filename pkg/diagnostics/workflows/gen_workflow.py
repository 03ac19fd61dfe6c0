import logging
from pathlib import Path
from typing import Any, Dict, List

from TrajCert.application.services.experiment_service import ExperimentService
from TrajCert.business.interfaces.workflow_interface import WorkflowInterface
from TrajCert.infrastructure.data.dataset_store import save_dataset
from diagnostics.config.config import SuiteConfig

# Configure logging
logger = logging.getLogger(__name__)


class GenWorkflow(WorkflowInterface[Any, List[Path]]):
    """Writes the base dataset of every configured seed as data/<seed>.tcds."""

    workflow_id = "gen"

    def __init__(self, config: SuiteConfig):
        self.config = config
        self.service = ExperimentService()
        self.status: Dict[str, Any] = {"state": "idle"}

    async def execute(self, input_data: Any) -> List[Path]:
        self.status = {"state": "processing"}
        condition = self.config.base_condition()
        written = []
        try:
            for seed in condition.seeds:
                dataset, _ = self.service.build_data(condition, seed)
                path = Path(input_data.output_dir) / "data" / f"{seed}.tcds"
                save_dataset(dataset, path)
                written.append(path)
        except Exception as e:
            self.status = {"state": "failed", "error": str(e)}
            raise
        self.status = {"state": "completed", "files": len(written)}
        return written

    async def get_status(self) -> Dict[str, Any]:
        return self.status

    async def cancel(self) -> bool:
        return False
