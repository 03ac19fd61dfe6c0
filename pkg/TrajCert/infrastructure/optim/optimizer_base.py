import abc
from typing import Any, Optional

import numpy as np

from TrajCert.application.models.model_configs import OptimizerSpec


class OptimizerBase(abc.ABC):
    """
    A first-order optimizer on the least-squares loss.

    Each coupled run holds its own state object; the optimizer itself is stateless
    so one instance can drive both runs of a pair.
    """

    def __init__(self, spec: OptimizerSpec) -> None:
        super().__init__()
        self.spec = spec

    @property
    def uses_minibatches(self) -> bool:
        return False

    @abc.abstractmethod
    def init_state(self, w0: np.ndarray) -> Any:
        """
        Create the per-run optimizer state.

        Args:
            w0: The shared initial weights

        Returns:
            The state passed to the first call of step
        """
        pass

    @abc.abstractmethod
    def step(
        self,
        w: np.ndarray,
        state: Any,
        X: np.ndarray,
        y: np.ndarray,
        batch: Optional[np.ndarray] = None,
    ) -> tuple[np.ndarray, Any]:
        """
        Apply one update.

        Args:
            w: Current weights
            state: State returned by init_state or the previous step
            X: Training design
            y: Training labels
            batch: Shared minibatch indices, for minibatch optimizers

        Returns:
            The new weights and state
        """
        pass
