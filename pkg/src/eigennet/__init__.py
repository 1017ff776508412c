"""EigenNet: eigenspace-guided sparse Bayesian logistic classification."""

from .linalg_eigen import Dataset, EigenBasis, eigendecompose, project_to_eigen, to_weight_space
from .model_core import HyperParams, ModelState, error_rate, log_posterior, predict
from .sampler import SamplerConfig, run_chain, posterior_mean_classifier

__version__ = "0.1.0"
