"""Coherent extinction and phase shift of a laser beam by a single two-level emitter."""
from .core import (
    ComplexTransmission,
    DriveField,
    EmitterParams,
    EmptyGrid,
    MolphaseError,
    OutOfRange,
    drive_from_power,
    validate,
)
from .steadystate import spectrum, transmission, weak_field_extrema

__version__ = "0.1.0"
