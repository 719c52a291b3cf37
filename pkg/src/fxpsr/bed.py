"""Bit-error-distribution harness for the multiply cases.

Draws operand pairs uniformly on each format's grid over a case-
specific real range, multiplies with the rounding mode under test, and
measures the signed error against the exact rational product in units
of the output LSB.  Expected shapes: round-down errors are uniform on
[-1, 0] with mean -1/2; round-to-nearest on [-1/2, 1/2] with mean 0;
stochastic rounding is triangular on (-1, 1) with mean 0 and variance
1/6 (full-width residual comparison).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .multiply import MUL_CASES, MulCase
from .rng import GeneratorKind, RandomStream, seed as seed_stream
from .rounding import RoundingSpec, round_raw

N_SAMPLES_DEFAULT = 50_000

# Operand real ranges per case; unlisted cases use each format's full
# range.  The wide-format squares are restricted so typical products
# stay clear of the output range.
_CASE_RANGES: dict[str, tuple[float, float]] = {
    "s16.15xs16.15": (-256.0, 256.0),
    "s8.7xs8.7": (-16.0, 16.0),
}


@dataclass(frozen=True)
class BedResult:
    case: str
    mode: str
    errors_lsb: np.ndarray   # float64, length n
    redraws: int             # pairs rejected for overflowing the output

    @property
    def n(self) -> int:
        return self.errors_lsb.size

    @property
    def mean(self) -> float:
        return float(self.errors_lsb.mean())

    @property
    def sd(self) -> float:
        return float(self.errors_lsb.std(ddof=1))

    @property
    def min(self) -> float:
        return float(self.errors_lsb.min())

    @property
    def max(self) -> float:
        return float(self.errors_lsb.max())


def _raw_bounds(case: MulCase, side: str) -> tuple[int, int]:
    fmt = case.lhs if side == "lhs" else case.rhs
    rng = _CASE_RANGES.get(case.name)
    if rng is None:
        return fmt.raw_min, fmt.raw_max
    lo = max(fmt.raw_min, math.ceil(rng[0] * (1 << fmt.frac_bits)))
    hi = min(fmt.raw_max, math.floor(rng[1] * (1 << fmt.frac_bits)))
    return lo, hi


def _draw_raw(stream: RandomStream, lo: int, hi: int) -> int:
    # Lemire-style scaled draw: uniform on [lo, hi] up to O(2^-32) bias.
    span = hi - lo + 1
    return lo + ((stream.next_u32() * span) >> 32)


def run_bed(case: str | MulCase,
            spec: RoundingSpec,
            n: int = N_SAMPLES_DEFAULT,
            *,
            rng_kind: GeneratorKind = GeneratorKind.KISS99,
            seed: int = 1) -> BedResult:
    """Sample n rounding errors (in output LSBs) for one multiply case.

    Pairs whose exact product falls outside the output range are
    redrawn, so every recorded error is a pure rounding error with no
    saturation clipping mixed in.
    """
    if isinstance(case, str):
        case = MUL_CASES[case]
    stream = seed_stream(rng_kind, seed)
    d = case.discard_bits
    lo_a, hi_a = _raw_bounds(case, "lhs")
    lo_b, hi_b = _raw_bounds(case, "rhs")
    out_lo = case.out.raw_min << d
    out_hi = (case.out.raw_max << d) + ((1 << d) - 1)
    errors = np.empty(n, dtype=np.float64)
    redraws = 0
    scale = float(1 << d)
    i = 0
    while i < n:
        a = _draw_raw(stream, lo_a, hi_a)
        b = _draw_raw(stream, lo_b, hi_b)
        product = a * b
        if product < out_lo or product > out_hi:
            redraws += 1
            continue
        r = round_raw(product, d, spec, stream)
        r = case.out.saturate(r)
        errors[i] = (r * (1 << d) - product) / scale
        i += 1
    return BedResult(case=case.name, mode=_mode_label(spec),
                     errors_lsb=errors, redraws=redraws)


def _mode_label(spec: RoundingSpec) -> str:
    from .rounding import RoundingMode
    if spec.mode is RoundingMode.SR and spec.sr_bits != 32:
        return f"sr{spec.sr_bits}"
    return spec.mode.value
