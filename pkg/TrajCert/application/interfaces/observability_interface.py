from abc import ABC, abstractmethod
from typing import Any, Dict, Optional


class ObservabilityInterface(ABC):
    """Interface for suite tracing backends."""

    @abstractmethod
    def create_handler(self, context: Optional[Dict[str, Any]] = None) -> Any:
        """
        Create the backend client.

        Returns:
            A client object, or None when the backend is unavailable
        """
        pass

    @abstractmethod
    def log_event(self, event_type: str, data: Dict[str, Any], context: Optional[Dict[str, Any]] = None) -> None:
        """
        Log an event.

        Args:
            event_type: Type of event, e.g. "cell"
            data: Event payload
            context: Additional context; context["trace"] attaches the event to a trace
        """
        pass

    @abstractmethod
    def start_trace(self, name: str, context: Optional[Dict[str, Any]] = None) -> Any:
        """Start a trace and return its handle."""
        pass

    @abstractmethod
    def end_trace(self, trace: Any, status: str = "success", context: Optional[Dict[str, Any]] = None) -> None:
        pass
