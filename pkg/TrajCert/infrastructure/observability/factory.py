from typing import Any, Dict, Optional

from TrajCert.application.interfaces.observability_interface import ObservabilityInterface
from TrajCert.application.models.errors import ConfigError
from TrajCert.infrastructure.observability.langfuse_observability import LangfuseObservability
from TrajCert.infrastructure.observability.logging_observability import LoggingObservability


class ObservabilityFactory:
    """Factory for creating observability backends."""

    @staticmethod
    def create_observability(config: Optional[Dict[str, Any]] = None) -> Optional[ObservabilityInterface]:
        """
        Create the backend named by config["type"].

        Args:
            config: The [observability] section: type (logging | langfuse) and enabled

        Returns:
            A backend, or None when observability is disabled

        Raises:
            ConfigError: If the type is not supported
        """
        config = config or {}
        if not config.get("enabled", True):
            return None
        kind = config.get("type", "logging")
        if kind == "logging":
            return LoggingObservability()
        elif kind == "langfuse":
            return LangfuseObservability(project_name=config.get("project_name", "tcert"))
        else:
            raise ConfigError(f"Unsupported observability type: {kind}")


def create_observability(config: Optional[Dict[str, Any]] = None) -> Optional[ObservabilityInterface]:
    return ObservabilityFactory.create_observability(config)
