"""Deterministic, seedable uniform generators of three quality tiers.

* KISS99  - Marsaglia's 1999 KISS combining an MWC pair, a 3-shift
            register and a congruential generator; period ~2^123.
* LFSR33  - 33-bit maximal-length Fibonacci LFSR, taps at bits 33 and
            20; 32 single-bit steps per output word.
* RANQD1  - the "quick and dirty" 32-bit LCG x' = 1664525*x + 1013904223
            (low bits are weak, so k-bit draws take the high bits).

All state updates are plain 32/64-bit integer arithmetic, so the output
sequence for a given (kind, seed) is identical on every platform.
"""

from __future__ import annotations

import enum

_M32 = 0xFFFFFFFF
_M33 = 0x1FFFFFFFF

# KISS99 default state, used when seeding from a single integer.
_KISS_DEFAULT = (362436069, 521288629, 123456789, 380116160)


class GeneratorKind(enum.Enum):
    KISS99 = "kiss99"
    LFSR33 = "lfsr33"
    RANQD1 = "ranqd1"


class RandomStream:
    """Single-owner stream of 32-bit words; not safe to share across threads."""

    __slots__ = ("kind", "_state", "draws_made")

    def __init__(self, kind: GeneratorKind, state: tuple[int, ...]):
        self.kind = kind
        self._state = list(state)
        self.draws_made = 0

    @property
    def state(self) -> tuple[int, ...]:
        return tuple(self._state)

    def next_u32(self) -> int:
        self.draws_made += 1
        s = self._state
        if self.kind is GeneratorKind.KISS99:
            z, w, jsr, jcong = s
            z = (36969 * (z & 0xFFFF) + (z >> 16)) & _M32
            w = (18000 * (w & 0xFFFF) + (w >> 16)) & _M32
            mwc = ((z << 16) + w) & _M32
            jsr ^= (jsr << 17) & _M32
            jsr ^= jsr >> 13
            jsr ^= (jsr << 5) & _M32
            jcong = (69069 * jcong + 1234567) & _M32
            s[0], s[1], s[2], s[3] = z, w, jsr, jcong
            return ((mwc ^ jcong) + jsr) & _M32
        if self.kind is GeneratorKind.LFSR33:
            reg = s[0]
            out = 0
            for _ in range(32):
                bit = ((reg >> 32) ^ (reg >> 19)) & 1
                reg = ((reg << 1) | bit) & _M33
                out = ((out << 1) | bit) & _M32
            s[0] = reg
            return out
        # RANQD1
        x = (1664525 * s[0] + 1013904223) & _M32
        s[0] = x
        return x

    def next_bits(self, k: int) -> int:
        """Top k bits of the next word (the high bits for LCG quality)."""
        if not 1 <= k <= 32:
            raise ValueError(f"k must be in [1, 32], got {k}")
        return self.next_u32() >> (32 - k)

    def spawn_label(self) -> str:
        return self.kind.value


def seed(kind: GeneratorKind, seed_words) -> RandomStream:
    """Build a stream from an integer seed or an explicit state vector.

    An integer seed is expanded deterministically (LCG mixing) into the
    generator's state words; a sequence is taken as the raw state.
    An all-zero LFSR33 state is rejected (absorbing state).
    """
    if isinstance(seed_words, int):
        state = _expand_seed(kind, seed_words)
    else:
        state = tuple(int(w) for w in seed_words)
    if kind is GeneratorKind.KISS99:
        if len(state) != 4:
            raise ValueError("KISS99 state needs 4 words")
        state = tuple(w & _M32 for w in state)
    elif kind is GeneratorKind.LFSR33:
        if len(state) != 1:
            raise ValueError("LFSR33 state needs 1 word")
        state = (state[0] & _M33,)
        if state[0] == 0:
            raise ValueError("LFSR33 seed must be nonzero")
    else:
        if len(state) != 1:
            raise ValueError("RANQD1 state needs 1 word")
        state = (state[0] & _M32,)
    return RandomStream(kind, state)


def _expand_seed(kind: GeneratorKind, value: int) -> tuple[int, ...]:
    if kind is GeneratorKind.LFSR33:
        return (value & _M33,)
    if kind is GeneratorKind.RANQD1:
        return (value & _M32,)
    # KISS99: mix the seed into the documented defaults; keep jsr nonzero.
    x = value & 0xFFFFFFFFFFFFFFFF
    words = []
    for _ in range(4):
        x = (6364136223846793005 * x + 1442695040888963407) & 0xFFFFFFFFFFFFFFFF
        words.append((x >> 32) & _M32)
    st = [d ^ w for d, w in zip(_KISS_DEFAULT, words)]
    if st[2] == 0:
        st[2] = _KISS_DEFAULT[2]
    return tuple(st)
