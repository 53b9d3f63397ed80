"""Statistics of repeated measurements on probes scattered off a small quantum system."""

__version__ = "0.1.0"

from .errors import NumericalPreconditionError, QMSError
from .models import JaynesCummings, Model, jc_model, random_model, spin_direction_measurement
from .standard_rep import QuantumSystem, build_standard_form
from .transfer import MeasurementOperator, TransferFamily, spectral_analysis

__all__ = [
    "JaynesCummings",
    "MeasurementOperator",
    "Model",
    "NumericalPreconditionError",
    "QMSError",
    "QuantumSystem",
    "TransferFamily",
    "build_standard_form",
    "jc_model",
    "random_model",
    "spectral_analysis",
    "spin_direction_measurement",
]
