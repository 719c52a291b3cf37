"""Reduced-precision fixed-point arithmetic with configurable rounding,
plus fixed-timestep neuron-model solvers that run the same unrolled
step program in double, single, 32-bit and 16-bit fixed-point backends.
"""

from .backends import Backend, BackendKind
from .bed import BedResult, run_bed
from .esr import SolverKind, build_program
from .formats import (FixedFormat, FixedValue, S0_15, S0_31, S8_7, S16_15,
                      U0_16, U0_32, convert, from_real, to_real)
from .multiply import MUL_CASES, MacAccumulator, MulCase, mac, mul
from .neuron import (DEFAULT_DC_NA, InputSource, NeuronParams, NeuronState,
                     dc, dithered_dc, exponential)
from .rng import GeneratorKind, RandomStream, seed
from .rounding import RD, RN, SR, RoundingMode, RoundingSpec, round_raw, sr
from .simulate import SimulationResult, simulate

__version__ = "0.1.0"

__all__ = [
    "Backend", "BackendKind", "BedResult", "run_bed", "SolverKind",
    "build_program", "FixedFormat", "FixedValue", "S0_15", "S0_31", "S8_7",
    "S16_15", "U0_16", "U0_32", "convert", "from_real", "to_real",
    "MUL_CASES", "MacAccumulator", "MulCase", "mac", "mul", "DEFAULT_DC_NA",
    "InputSource", "NeuronParams", "NeuronState", "dc", "dithered_dc",
    "exponential", "GeneratorKind", "RandomStream", "seed", "RD", "RN", "SR",
    "RoundingMode", "RoundingSpec", "round_raw", "sr", "SimulationResult",
    "simulate",
]
