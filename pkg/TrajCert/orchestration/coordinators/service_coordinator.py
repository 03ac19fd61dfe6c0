from typing import Any, Dict, Generic, TypeVar

from TrajCert.orchestration.interfaces.coordinator_interface import CoordinatorInterface

Req = TypeVar("Req")
Out = TypeVar("Out")


class ServiceCoordinator(CoordinatorInterface[Req, Out], Generic[Req, Out]):
    """Coordinator base with a registry of named services (experiment runners, stores)."""

    def __init__(self):
        self.services: Dict[str, Any] = {}

    def register_service(self, service_name: str, service: Any) -> None:
        if service_name in self.services:
            raise KeyError(f"service {service_name!r} is already registered")
        self.services[service_name] = service

    def get_service(self, service_name: str) -> Any:
        if service_name not in self.services:
            raise KeyError(f"service {service_name!r} is not registered")
        return self.services[service_name]
