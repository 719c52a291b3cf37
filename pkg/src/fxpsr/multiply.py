"""Mixed-format saturating multiplication with rounding control.

Products are formed exactly at full width (p_a + p_b fraction bits),
then d = p_a + p_b - p_out bottom bits are discarded through the
configured rounding kernel and the result saturates into the output
format.  Five 32-bit operand pairings and their five 16-bit analogues
are supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .formats import (
    S0_15,
    S0_31,
    S8_7,
    S16_15,
    U0_16,
    U0_32,
    FixedFormat,
    FixedValue,
)
from .rng import RandomStream
from .rounding import RoundingSpec, round_raw

_INT64_MAX = (1 << 63) - 1
_INT64_MIN = -(1 << 63)


@dataclass(frozen=True)
class MulCase:
    lhs: FixedFormat
    rhs: FixedFormat
    out: FixedFormat

    @property
    def discard_bits(self) -> int:
        return self.lhs.frac_bits + self.rhs.frac_bits - self.out.frac_bits

    @property
    def name(self) -> str:
        return f"{self.lhs}x{self.rhs}"


MUL_CASES = {
    "s16.15xs16.15": MulCase(S16_15, S16_15, S16_15),
    "s16.15xs0.31": MulCase(S16_15, S0_31, S16_15),
    "s16.15xu0.32": MulCase(S16_15, U0_32, S16_15),
    "u0.32xu0.32": MulCase(U0_32, U0_32, S0_31),
    "u0.32xs0.31": MulCase(U0_32, S0_31, S0_31),
    "s8.7xs8.7": MulCase(S8_7, S8_7, S8_7),
    "s8.7xs0.15": MulCase(S8_7, S0_15, S8_7),
    "s8.7xu0.16": MulCase(S8_7, U0_16, S8_7),
    "u0.16xu0.16": MulCase(U0_16, U0_16, S0_15),
    "u0.16xs0.15": MulCase(U0_16, S0_15, S0_15),
}


def mul(
    a: FixedValue,
    b: FixedValue,
    case: MulCase,
    spec: RoundingSpec,
    rng: Optional[RandomStream] = None,
) -> FixedValue:
    if a.fmt != case.lhs or b.fmt != case.rhs:
        raise ValueError(
            f"operand formats ({a.fmt}, {b.fmt}) do not match case "
            f"({case.lhs}, {case.rhs})"
        )
    product = a.raw * b.raw
    q = round_raw(product, case.discard_bits, spec, rng)
    return FixedValue(case.out.saturate(q), case.out)


@dataclass
class MacAccumulator:
    """Full-precision multiply-accumulate; one rounding at the end.

    The accumulator holds an exact sum of raw products whose combined
    fraction width is ``frac_bits``.  Accumulation is checked against
    the 64-bit intermediate budget used by the solver kernels.
    """

    raw: int = 0
    frac_bits: int = -1  # set by the first product

    def add_product(self, a: FixedValue, b: FixedValue) -> "MacAccumulator":
        pf = a.fmt.frac_bits + b.fmt.frac_bits
        if self.frac_bits < 0:
            self.frac_bits = pf
        elif self.frac_bits != pf:
            raise ValueError(
                f"product fraction width {pf} does not match accumulator "
                f"alignment {self.frac_bits}"
            )
        self.raw += a.raw * b.raw
        if not _INT64_MIN <= self.raw <= _INT64_MAX:
            raise OverflowError("64-bit intermediate accumulator overflow")
        return self

    def round_to(
        self,
        out: FixedFormat,
        spec: RoundingSpec,
        rng: Optional[RandomStream] = None,
    ) -> FixedValue:
        if self.frac_bits < 0:
            return FixedValue(0, out)
        d = self.frac_bits - out.frac_bits
        q = round_raw(self.raw, d, spec, rng)
        return FixedValue(out.saturate(q), out)


def mac(acc: MacAccumulator, a: FixedValue, b: FixedValue) -> MacAccumulator:
    return acc.add_product(a, b)
