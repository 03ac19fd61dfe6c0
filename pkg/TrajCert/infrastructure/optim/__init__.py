from .factory import OptimizerFactory
from .optimizer_base import OptimizerBase
from .steps import AdamMoments, adam_step, full_gradient, gd_step, sgd_step

__all__ = ["AdamMoments", "OptimizerBase", "OptimizerFactory", "adam_step", "full_gradient", "gd_step", "sgd_step"]
