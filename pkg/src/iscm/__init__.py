"""Internally standardized structural causal models: generation, analysis, discovery."""
from .errors import IscmError
from .graphs import Cpdag, Dag

__version__ = "0.1.0"

__all__ = ["Cpdag", "Dag", "IscmError", "__version__"]
