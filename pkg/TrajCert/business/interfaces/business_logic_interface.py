from abc import ABC, abstractmethod
from typing import Any, Dict, Optional


class BusinessLogicInterface(ABC):
    """Interface for the concrete experiment suite behind the CLI."""

    @abstractmethod
    def determine_workflow(self, command: Any) -> str:
        """
        Determine which workflow handles a command.

        Args:
            command: The parsed CLI command

        Returns:
            The workflow ID to use
        """
        pass

    @abstractmethod
    def get_workflow(self, workflow_id: str, config: Any) -> Any:
        """
        Get a workflow instance by ID.

        Args:
            workflow_id: The workflow ID
            config: The resolved suite configuration

        Returns:
            The workflow instance
        """
        pass

    @abstractmethod
    def process_response(self, response: Any) -> Dict[str, Any]:
        """
        Turn a workflow result into a response dict with at least "status" and "exit_code".
        """
        pass

    @abstractmethod
    def load_config(self, command: Any) -> Any:
        """Resolve the layered configuration for a command."""
        pass

    @abstractmethod
    def prepare_output(self, command: Any, config: Any) -> None:
        """
        Create the output directory and echo the effective configuration into it.

        Raises:
            InvalidInputError: If the directory already holds outputs and the command does not force
        """
        pass

    @abstractmethod
    def get_observability(self, config: Any) -> Optional[Any]:
        """Create the observability backend the configuration asks for, or None."""
        pass
