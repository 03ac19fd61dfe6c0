from typing import Any, Optional

import numpy as np

from TrajCert.application.models.errors import InvalidInputError
from TrajCert.infrastructure.optim.optimizer_base import OptimizerBase
from TrajCert.infrastructure.optim.steps import AdamMoments, adam_step, full_gradient, gd_step, sgd_step


class GradientDescent(OptimizerBase):
    """Full-batch gradient descent; deterministic given the dataset."""

    def init_state(self, w0: np.ndarray) -> Any:
        return None

    def step(self, w, state, X, y, batch: Optional[np.ndarray] = None):
        return gd_step(w, X, y, self.spec.eta), state


class StochasticGradientDescent(OptimizerBase):
    """Minibatch SGD driven by an externally drawn, shared index sequence."""

    @property
    def uses_minibatches(self) -> bool:
        return True

    def init_state(self, w0: np.ndarray) -> Any:
        return None

    def step(self, w, state, X, y, batch: Optional[np.ndarray] = None):
        if batch is None:
            raise InvalidInputError("SGD needs a minibatch at every step")
        return sgd_step(w, X, y, self.spec.eta, batch), state


class Adam(OptimizerBase):
    """Adam on the full-batch gradient; each coupled run carries its own moments."""

    def init_state(self, w0: np.ndarray) -> AdamMoments:
        return AdamMoments.zeros(w0.shape[0])

    def step(self, w, state, X, y, batch: Optional[np.ndarray] = None):
        spec = self.spec
        return adam_step(w, state, full_gradient(w, X, y), spec.eta, spec.beta1, spec.beta2, spec.eps)
