"""Fixed-point formats and values.

A format <s, i, p> has an optional sign bit, i integer bits and p
fraction bits; word length w = i + p (+1 if signed).  A value is a raw
two's-complement integer scaled by 2^-p.  Conversions from reals go
through exact rational arithmetic so the rounding decision is never
contaminated by an intermediate float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .rng import RandomStream
from .rounding import RoundingMode, RoundingSpec

Real = Union[int, float, Fraction]


@dataclass(frozen=True)
class FixedFormat:
    signed: bool
    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 0 or self.frac_bits < 0:
            raise ValueError("bit counts must be non-negative")

    @property
    def word_len(self) -> int:
        return self.int_bits + self.frac_bits + (1 if self.signed else 0)

    @property
    def epsilon(self) -> Fraction:
        """Machine epsilon 2^-p, the gap between neighbouring values."""
        return Fraction(1, 1 << self.frac_bits)

    @property
    def raw_min(self) -> int:
        return -(1 << (self.int_bits + self.frac_bits)) if self.signed else 0

    @property
    def raw_max(self) -> int:
        return (1 << (self.int_bits + self.frac_bits)) - 1

    def value_range(self) -> tuple[Fraction, Fraction]:
        """Exact [min, max] of representable values."""
        return (
            Fraction(self.raw_min, 1 << self.frac_bits),
            Fraction(self.raw_max, 1 << self.frac_bits),
        )

    def saturate(self, raw: int) -> int:
        return min(max(raw, self.raw_min), self.raw_max)

    def __str__(self) -> str:
        return f"{'s' if self.signed else 'u'}{self.int_bits}.{self.frac_bits}"


S16_15 = FixedFormat(True, 16, 15)
U0_32 = FixedFormat(False, 0, 32)
S0_31 = FixedFormat(True, 0, 31)
S8_7 = FixedFormat(True, 8, 7)
U0_16 = FixedFormat(False, 0, 16)
S0_15 = FixedFormat(True, 0, 15)

FORMATS_BY_NAME = {
    "s16.15": S16_15,
    "u0.32": U0_32,
    "s0.31": S0_31,
    "s8.7": S8_7,
    "u0.16": U0_16,
    "s0.15": S0_15,
}


@dataclass(frozen=True)
class FixedValue:
    raw: int
    fmt: FixedFormat

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(f"raw {self.raw} does not fit {self.fmt}")

    def to_real(self) -> float:
        """Exact real value; lossless in a double for word lengths <= 32."""
        return self.raw / (1 << self.fmt.frac_bits)

    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.fmt.frac_bits)

    def __str__(self) -> str:
        return f"{self.to_real()!r} [{self.fmt}]"


def format_epsilon(fmt: FixedFormat) -> Fraction:
    return fmt.epsilon


def format_range(fmt: FixedFormat) -> tuple[Fraction, Fraction]:
    return fmt.value_range()


def from_real(
    x: Real,
    fmt: FixedFormat,
    spec: RoundingSpec,
    rng: Optional[RandomStream] = None,
) -> FixedValue:
    """Round a real onto the format's grid; saturates at the range ends."""
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"cannot convert {x} to fixed point")
    scaled = Fraction(x) * (1 << fmt.frac_bits)
    floor = scaled.numerator // scaled.denominator
    residual = scaled - floor  # in [0, 1)
    mode = spec.mode
    if mode is RoundingMode.RD or residual == 0:
        raw = floor
    elif mode is RoundingMode.RN:
        raw = floor + (1 if residual * 2 >= 1 else 0)
    else:
        if rng is None:
            raise ValueError("SR conversion requires a RandomStream")
        k = spec.sr_bits
        r_top = (residual * (1 << k)).numerator // (residual * (1 << k)).denominator
        raw = floor + (1 if rng.next_bits(k) < r_top else 0)
    return FixedValue(fmt.saturate(raw), fmt)


def to_real(v: FixedValue) -> float:
    return v.to_real()


def convert(
    v: FixedValue,
    target: FixedFormat,
    spec: RoundingSpec,
    rng: Optional[RandomStream] = None,
) -> FixedValue:
    """Re-grid a value; widening is exact, narrowing rounds then saturates."""
    from .rounding import round_raw

    shift = v.fmt.frac_bits - target.frac_bits
    if shift <= 0:
        raw = v.raw << (-shift)
    else:
        raw = round_raw(v.raw, shift, spec, rng)
    return FixedValue(target.saturate(raw), target)
