"""Transition probabilities for a driven, frequency-modulated oscillator
with weak cubic-quartic anharmonicity, plus an independent grid propagator
used as ground truth."""

__version__ = "0.1.0"

from . import basis, classical, firstorder, oracle, profiles, smatrix
from .errors import OscatterError

__all__ = ["basis", "classical", "firstorder", "oracle", "profiles", "smatrix",
           "OscatterError", "__version__"]
