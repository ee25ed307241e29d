"""Finite-sample information-spectrum tools for compound channels with additive noise."""
from .alphabet import Alphabet, IsiMap, SeqM, add_mod, isi_invert, isi_map, sub_mod
from .errors import (CapacityExceeded, CompoundLabError, InfeasibleSample, InsufficientData,
                     InvalidArgument, InvalidState, NotApplicable)

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "IsiMap", "SeqM", "add_mod", "sub_mod", "isi_map", "isi_invert",
    "CompoundLabError", "InvalidArgument", "InvalidState", "InfeasibleSample",
    "InsufficientData", "CapacityExceeded", "NotApplicable",
]
