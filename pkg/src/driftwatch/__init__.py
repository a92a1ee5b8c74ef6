"""Ground-truth-free monitoring of deployed classification models."""
from driftwatch.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
