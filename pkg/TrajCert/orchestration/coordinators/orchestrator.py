import asyncio
import logging
import uuid
from typing import Any, Dict, Optional

from TrajCert.application.models.errors import (
    ArtifactError,
    ConfigError,
    InvalidInputError,
    TCertError,
)
from TrajCert.business.interfaces.business_logic_interface import BusinessLogicInterface

# Configure logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_ARTIFACT = 3


def exit_code_for(error: Exception) -> int:
    """Map an exception raised by a workflow to the CLI exit code."""
    if isinstance(error, (ConfigError, InvalidInputError)):
        return EXIT_USAGE
    if isinstance(error, ArtifactError):
        return EXIT_ARTIFACT
    return EXIT_CHECK_FAILED


class Orchestrator:
    """Main orchestrator: resolves configuration, routes a command to its workflow and maps the outcome."""

    def __init__(self, business_logic: BusinessLogicInterface, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the orchestrator.

        Args:
            business_logic: Business logic implementation
            config: Orchestrator options
        """
        self.config = config or {}
        self.business_logic = business_logic
        # Request tracking
        self.requests: Dict[str, Dict[str, Any]] = {}

    async def process_command(self, command: Any) -> Dict[str, Any]:
        """
        Process a CLI command through the orchestration pipeline.

        Returns:
            Dictionary with the request ID, workflow, status, exit_code and the processed response
        """
        request_id = str(uuid.uuid4())
        self.requests[request_id] = {"command": getattr(command, "subcommand", None), "status": "processing"}
        workflow_id = None
        try:
            # Step 1: Resolve configuration (profile, file, env, flags)
            config = self.business_logic.load_config(command)

            # Step 2: Determine and build the workflow
            workflow_id = self.business_logic.determine_workflow(command)
            self.requests[request_id]["workflow"] = workflow_id
            workflow = self.business_logic.get_workflow(workflow_id, config)

            # Step 3: Prepare the output directory and execute
            self.business_logic.prepare_output(command, config)
            if asyncio.iscoroutinefunction(workflow.execute):
                response = await workflow.execute(command)
            else:
                response = workflow.execute(command)

            # Step 4: Post-process
            result = self.business_logic.process_response(response)
        except TCertError as e:
            code = exit_code_for(e)
            logger.error(f"{workflow_id or 'command'} failed: {e}")
            self.requests[request_id].update({"status": "failed", "error": str(e)})
            return {"request_id": request_id, "workflow": workflow_id, "status": "failed", "exit_code": code, "error": str(e)}

        self.requests[request_id]["status"] = result.get("status", "completed")
        return {"request_id": request_id, "workflow": workflow_id, **result}

    def get_request_status(self, request_id: str) -> Dict[str, Any]:
        if request_id in self.requests:
            return self.requests[request_id]
        else:
            return {"status": "not_found"}
