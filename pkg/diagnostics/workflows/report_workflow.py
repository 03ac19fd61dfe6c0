from typing import Any, Dict

from TrajCert.business.interfaces.workflow_interface import WorkflowInterface
from diagnostics.business_logic.report_service import ReportOutcome, report


class ReportWorkflow(WorkflowInterface[Any, ReportOutcome]):
    """Re-verifies an existing output directory from its CSV files."""

    workflow_id = "report"

    def __init__(self):
        self.status: Dict[str, Any] = {"state": "idle"}

    async def execute(self, input_data: Any) -> ReportOutcome:
        self.status = {"state": "processing"}
        try:
            outcome = report(input_data.output_dir, input_data.reference_dir)
        except Exception as e:
            self.status = {"state": "failed", "error": str(e)}
            raise
        self.status = {"state": "completed", "exit_code": outcome.exit_code}
        return outcome

    async def get_status(self) -> Dict[str, Any]:
        return self.status

    async def cancel(self) -> bool:
        return False
