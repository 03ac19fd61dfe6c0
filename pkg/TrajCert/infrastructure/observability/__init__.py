from TrajCert.infrastructure.observability.factory import ObservabilityFactory, create_observability

__all__ = ["ObservabilityFactory", "create_observability"]
