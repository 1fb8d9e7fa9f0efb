"""Breadth versus depth budget allocation for sampled reasoning rollouts."""
from ._backend import BACKEND
from .errors import BreadthDepthError, ParameterError, ValidationError

__version__ = "0.1.0"

__all__ = ["BACKEND", "BreadthDepthError", "ParameterError", "ValidationError", "__version__"]
