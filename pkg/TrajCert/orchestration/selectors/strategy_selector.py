import logging
from dataclasses import dataclass
from typing import Callable, Generic, List, Optional, TypeVar

Req = TypeVar("Req")
Out = TypeVar("Out")

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Strategy(Generic[Req, Out]):
    """A named construction and the predicate on requests it is sound for."""

    name: str
    description: str
    applies: Callable[[Req], bool]
    build: Callable[[Req], Out]


class StrategySelector(Generic[Req, Out]):
    """First-match dispatch over registered strategies, in registration order."""

    def __init__(self):
        self.strategies: List[Strategy[Req, Out]] = []

    def register_strategy(self, strategy: Strategy[Req, Out]) -> None:
        if any(existing.name == strategy.name for existing in self.strategies):
            raise ValueError(f"strategy {strategy.name!r} is already registered")
        self.strategies.append(strategy)

    def select_strategy(self, request: Req) -> Optional[Strategy[Req, Out]]:
        return next((s for s in self.strategies if s.applies(request)), None)

    def execute_strategy(self, request: Req) -> Optional[Out]:
        """
        Build the result with the first applicable strategy.

        Returns:
            The built result, or None when no strategy applies
        """
        strategy = self.select_strategy(request)
        if strategy is None:
            return None
        logger.debug(f"Selected strategy {strategy.name}: {strategy.description}")
        return strategy.build(request)
