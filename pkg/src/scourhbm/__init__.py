"""Scour detection for monopile wind turbines via hierarchical Bayesian soil-stiffness inference."""
from .config import RunConfig, default_config, load_config
from .fem import TurbineModel, first_bending_frequency, modal_analysis

__all__ = ["RunConfig", "TurbineModel", "default_config", "first_bending_frequency",
           "load_config", "modal_analysis"]
__version__ = "0.1.0"
