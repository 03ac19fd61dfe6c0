from abc import ABC, abstractmethod
from typing import Generic, TypeVar

Req = TypeVar("Req")
Out = TypeVar("Out")


class CoordinatorInterface(Generic[Req, Out], ABC):
    """Runs a batch of independent work items and assembles one result."""

    @abstractmethod
    async def coordinate(self, input_data: Req) -> Out: ...
