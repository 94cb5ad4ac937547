"""Manifold-guided conditional tabular diffusion.

Train one unconditional denoising diffusion model on a mixed-type table,
then steer it at inference time toward arbitrary differentiable constraints
(imputation, range/equality conditions, boolean combinations) without
retraining.
"""

__version__ = "0.1.0"

from .constraints import (CategoricalCE, Conjunction, Disjunction, Equality,
                          Imputation, Inequality, eval_loss)
from .errors import TabguideError
from .estimator import TabularDiffusionModel
from .guidance import GuidanceConfig, ddpm_sample, guided_sample
from .schema import Column, TabularSchema, infer_schema

__all__ = [
    "CategoricalCE",
    "Column",
    "Conjunction",
    "Disjunction",
    "Equality",
    "GuidanceConfig",
    "Imputation",
    "Inequality",
    "TabguideError",
    "TabularDiffusionModel",
    "TabularSchema",
    "__version__",
    "ddpm_sample",
    "eval_loss",
    "guided_sample",
    "infer_schema",
]
