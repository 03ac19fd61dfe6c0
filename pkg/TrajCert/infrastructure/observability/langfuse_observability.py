import logging
import os
import warnings
from typing import Any, Dict, Mapping, Optional

from langfuse import Langfuse

from TrajCert.application.interfaces.observability_interface import ObservabilityInterface

# Configure logging
logger = logging.getLogger(__name__)


class LangfuseObservability(ObservabilityInterface):
    """Langfuse tracing: one trace per suite run, one event and one final_cert score per cell."""

    def __init__(self, environ: Optional[Mapping[str, str]] = None, project_name: str = "tcert"):
        """
        Initialize the Langfuse observability.

        Args:
            environ: Source of the LANGFUSE_* credentials, os.environ by default
            project_name: Stored in the trace metadata
        """
        self.environ = os.environ if environ is None else environ
        self.project_name = project_name
        self.client = None
        self.active_traces: Dict[str, Any] = {}

    def create_handler(self, context: Optional[Dict[str, Any]] = None) -> Any:
        """
        Create the Langfuse client once.

        Returns:
            The client, or None if credentials are missing
        """
        if self.client is not None:
            return self.client
        public_key = self.environ.get("LANGFUSE_PUBLIC_KEY")
        secret_key = self.environ.get("LANGFUSE_SECRET_KEY")
        host = self.environ.get("LANGFUSE_HOST")
        if not (public_key and secret_key and host):
            warnings.warn("Skipping Langfuse logging, credentials not found")
            return None
        try:
            self.client = Langfuse(public_key=public_key, secret_key=secret_key, host=host)
        except Exception as e:
            warnings.warn(f"Error creating Langfuse client: {str(e)}")
            return None
        return self.client

    def log_event(self, event_type: str, data: Dict[str, Any], context: Optional[Dict[str, Any]] = None) -> None:
        context = context or {}
        trace = self.active_traces.get(context.get("trace"))
        if trace is None:
            return
        try:
            trace.event(name=event_type, input=data, metadata={"project_name": self.project_name})
            if "final_cert" in data:
                trace.score(name="final_cert", value=float(data["final_cert"]), comment=data.get("cell"))
        except Exception as e:
            logger.warning(f"Langfuse event failed: {e}")

    def start_trace(self, name: str, context: Optional[Dict[str, Any]] = None) -> Any:
        context = context or {}
        client = self.create_handler(context)
        if client is None:
            return None
        trace = client.trace(
            name=name,
            session_id=context.get("session_id"),
            metadata={"project_name": self.project_name, **context.get("metadata", {})},
        )
        self.active_traces[trace.id] = trace
        return trace.id

    def end_trace(self, trace: Any, status: str = "success", context: Optional[Dict[str, Any]] = None) -> None:
        handle = self.active_traces.pop(trace, None)
        if handle is None:
            return
        try:
            handle.update(output={"status": status, **(context or {})})
            self.client.flush()
        except Exception as e:
            logger.warning(f"Langfuse flush failed: {e}")
