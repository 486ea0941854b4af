"""Breathing modes and resonant systems: polynomial algebra, resonant reduction,
coupling tensors, slow-time evolution, the ansatz family and a 1D NLS bench."""

from .couplings import (BreathingVector, CouplingTensor, check_C_identity, find_G, gen_conformal,
                        gen_nls1d)
from .errors import ResonantError
from .evolution import ModeState, evolve
from .polyspace import PhasePoly, poisson_bracket
from .reduction import FrequencyLadder, time_average

__version__ = "0.1.0"

__all__ = [
    "BreathingVector", "CouplingTensor", "FrequencyLadder", "ModeState", "PhasePoly",
    "ResonantError", "check_C_identity", "evolve", "find_G", "gen_conformal", "gen_nls1d",
    "poisson_bracket", "time_average",
]
