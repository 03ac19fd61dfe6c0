from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import OptimizerKind, OptimizerSpec
from TrajCert.infrastructure.optim.optimizer_base import OptimizerBase
from TrajCert.infrastructure.optim.optimizers import Adam, GradientDescent, StochasticGradientDescent


class OptimizerFactory:
    """Factory for creating optimizer instances."""

    @staticmethod
    def create_optimizer(spec: OptimizerSpec) -> OptimizerBase:
        """
        Create an optimizer for the given spec.

        Args:
            spec: Optimizer kind and hyperparameters

        Returns:
            An optimizer instance

        Raises:
            InvalidInputError: If the kind is not supported
        """
        if spec.kind == OptimizerKind.GD:
            return GradientDescent(spec)
        elif spec.kind == OptimizerKind.SGD:
            return StochasticGradientDescent(spec)
        elif spec.kind == OptimizerKind.ADAM:
            return Adam(spec)
        else:
            raise InvalidInputError(f"Unsupported optimizer: {spec.kind}")
