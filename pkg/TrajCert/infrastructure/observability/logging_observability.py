import logging
import uuid
from typing import Any, Dict, Optional

from TrajCert.application.interfaces.observability_interface import ObservabilityInterface

# Configure logging
logger = logging.getLogger(__name__)


class LoggingObservability(ObservabilityInterface):
    """Writes traces and events as structured log lines."""

    def __init__(self, level: int = logging.INFO):
        self.level = level
        self.active_traces: Dict[str, Dict[str, Any]] = {}

    def create_handler(self, context: Optional[Dict[str, Any]] = None) -> Any:
        return logger

    def log_event(self, event_type: str, data: Dict[str, Any], context: Optional[Dict[str, Any]] = None) -> None:
        context = context or {}
        trace = context.get("trace")
        fields = " ".join(f"{key}={value}" for key, value in sorted(data.items()))
        logger.log(self.level, f"event={event_type} trace={trace} {fields}")

    def start_trace(self, name: str, context: Optional[Dict[str, Any]] = None) -> Any:
        trace_id = f"{name}-{uuid.uuid4().hex[:8]}"
        self.active_traces[trace_id] = {"name": name, "context": context or {}}
        logger.log(self.level, f"trace_start trace={trace_id} name={name}")
        return trace_id

    def end_trace(self, trace: Any, status: str = "success", context: Optional[Dict[str, Any]] = None) -> None:
        if trace in self.active_traces:
            del self.active_traces[trace]
        logger.log(self.level, f"trace_end trace={trace} status={status}")
