from abc import ABC, abstractmethod
from typing import Any, Dict, Generic, TypeVar

Cmd = TypeVar("Cmd")
Out = TypeVar("Out")


class WorkflowInterface(Generic[Cmd, Out], ABC):
    """One CLI subcommand: runs against a resolved suite configuration and writes into the output directory."""

    @abstractmethod
    async def execute(self, input_data: Cmd) -> Out:
        """
        Run the subcommand.

        Raises:
            TCertError: Subclasses map to the CLI exit codes
        """

    @abstractmethod
    async def get_status(self) -> Dict[str, Any]:
        """{"state": idle|processing|completed|failed} plus workflow-specific progress keys."""

    @abstractmethod
    async def cancel(self) -> bool:
        """Request a stop; returns False when the workflow cannot be interrupted."""
