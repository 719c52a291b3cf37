"""Rounding kernels for two's-complement fixed-point intermediates.

All three kernels operate on a full-precision integer whose bottom
``discard_bits`` must be dropped:

* RD  - arithmetic right shift (rounds toward -inf).
* RN  - round to nearest, ties up (add half-LSB, then shift).
* SR  - stochastic rounding: round up with probability equal to the
        discarded residual fraction, using a k-bit uniform draw.

For SR with k smaller than the discard width, the residual is truncated
to its top k bits before the comparison (no rounding of the residual
itself).  A truncated residual of zero therefore always rounds down,
even if lower discarded bits are nonzero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .rng import RandomStream


class RoundingMode(enum.Enum):
    RD = "rd"
    RN = "rn"
    SR = "sr"


@dataclass(frozen=True)
class RoundingSpec:
    """Rounding mode plus, for SR, the comparison width in bits."""

    mode: RoundingMode
    sr_bits: int = 32

    def __post_init__(self):
        if self.mode is RoundingMode.SR and not 1 <= self.sr_bits <= 32:
            raise ValueError(f"sr_bits must be in [1, 32], got {self.sr_bits}")

    @property
    def stochastic(self) -> bool:
        return self.mode is RoundingMode.SR

    def label(self) -> str:
        if self.mode is RoundingMode.SR and self.sr_bits != 32:
            return f"sr{self.sr_bits}"
        return self.mode.value


RD = RoundingSpec(RoundingMode.RD)
RN = RoundingSpec(RoundingMode.RN)
SR = RoundingSpec(RoundingMode.SR)


def sr(bits: int = 32) -> RoundingSpec:
    return RoundingSpec(RoundingMode.SR, bits)


def round_raw(
    extended: int,
    discard_bits: int,
    spec: RoundingSpec,
    rng: Optional[RandomStream] = None,
) -> int:
    """Drop the bottom ``discard_bits`` of ``extended`` with rounding.

    ``extended`` is an arbitrary-precision Python int holding the
    two's-complement full-width intermediate.  Returns the rounded
    quotient before any saturation.
    """
    if discard_bits < 0:
        raise ValueError("discard_bits must be >= 0")
    if discard_bits == 0:
        return extended
    mode = spec.mode
    if mode is RoundingMode.RD:
        return extended >> discard_bits
    if mode is RoundingMode.RN:
        return (extended + (1 << (discard_bits - 1))) >> discard_bits
    if rng is None:
        raise ValueError("SR rounding requires a RandomStream")
    k = min(spec.sr_bits, discard_bits)
    draw = rng.next_bits(k)
    return sr_round_comparator(extended, discard_bits, k, draw)


def sr_round_comparator(extended: int, discard_bits: int, k: int, draw: int) -> int:
    """SR, comparator form: round up iff draw < top-k bits of the residual."""
    residual = extended & ((1 << discard_bits) - 1)
    r_top = residual >> (discard_bits - k)
    q = extended >> discard_bits
    return q + 1 if draw < r_top else q


def sr_round_add(extended: int, discard_bits: int, k: int, draw: int) -> int:
    """SR, add-then-truncate form, bit-identical to the comparator form.

    The hardware-style formulation adds a random word to the input and
    truncates; a carry out of the discarded field is the round-up.  To
    make it agree with the comparator pairwise (not just in
    distribution), the added word is the one's complement of ``draw``:
    carry occurs iff r_top + (2^k - 1 - draw) >= 2^k, i.e. draw < r_top.
    """
    mask_low = (1 << (discard_bits - k)) - 1
    truncated = extended & ~mask_low  # residual truncated to its top k bits
    addend = ((1 << k) - 1 - draw) << (discard_bits - k)
    return (truncated + addend) >> discard_bits
