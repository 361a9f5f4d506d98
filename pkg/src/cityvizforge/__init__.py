"""Linked-data driven 3D city visualisation: CityGML and tabular data in, X3D out."""

from .errors import CvfError, InvariantViolation
from .pipeline import load_config, run_pipeline

__version__ = "0.1.0"
__all__ = ["CvfError", "InvariantViolation", "load_config", "run_pipeline", "__version__"]
