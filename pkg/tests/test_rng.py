import numpy as np
import pytest

from fxpsr import _kernels
from fxpsr.rng import GeneratorKind, seed

M32 = 0xFFFFFFFF


# --- independent oracles -----------------------------------------------------

class Kiss99Oracle:
    """Straightforward transcription of the classic KISS99 recipe."""

    def __init__(self, z, w, jsr, jcong):
        self.z, self.w, self.jsr, self.jcong = z, w, jsr, jcong

    def znew(self):
        self.z = (36969 * (self.z & 65535) + (self.z >> 16)) & M32
        return self.z

    def wnew(self):
        self.w = (18000 * (self.w & 65535) + (self.w >> 16)) & M32
        return self.w

    def mwc(self):
        return ((self.znew() << 16) + self.wnew()) & M32

    def shr3(self):
        j = self.jsr
        j = (j ^ (j << 17)) & M32
        j = (j ^ (j >> 13)) & M32
        j = (j ^ (j << 5)) & M32
        self.jsr = j
        return j

    def cong(self):
        self.jcong = (69069 * self.jcong + 1234567) & M32
        return self.jcong

    def next(self):
        return ((self.mwc() ^ self.cong()) + self.shr3()) & M32


def fib_lfsr_bit(state, width, tap):
    """One Galois-free Fibonacci step: feedback = bit[width] ^ bit[tap]."""
    bit = ((state >> (width - 1)) ^ (state >> (tap - 1))) & 1
    return ((state << 1) | bit) & ((1 << width) - 1), bit


def fib_lfsr_word(state, width, tap, nbits=32):
    out = 0
    for _ in range(nbits):
        state, bit = fib_lfsr_bit(state, width, tap)
        out = ((out << 1) | bit) & M32
    return state, out


# --- KISS99 ------------------------------------------------------------------

def test_kiss99_matches_oracle_from_state_vector():
    state = (362436069, 521288629, 123456789, 380116160)
    stream = seed(GeneratorKind.KISS99, state)
    oracle = Kiss99Oracle(*state)
    for _ in range(1000):
        assert stream.next_u32() == oracle.next()


def test_kiss99_integer_seed_deterministic_and_mixed():
    a = seed(GeneratorKind.KISS99, 42)
    b = seed(GeneratorKind.KISS99, 42)
    c = seed(GeneratorKind.KISS99, 43)
    seq_a = [a.next_u32() for _ in range(16)]
    assert seq_a == [b.next_u32() for _ in range(16)]
    assert seq_a != [c.next_u32() for _ in range(16)]


def test_kiss99_state_needs_four_words():
    with pytest.raises(ValueError):
        seed(GeneratorKind.KISS99, (1, 2, 3))


# --- LFSR33 ------------------------------------------------------------------

def test_lfsr33_matches_generic_fibonacci_oracle():
    state = 0x123456789 & ((1 << 33) - 1)
    stream = seed(GeneratorKind.LFSR33, state)
    s = state
    for _ in range(200):
        s, word = fib_lfsr_word(s, 33, 20)
        assert stream.next_u32() == word


def test_lfsr33_zero_seed_rejected():
    with pytest.raises(ValueError):
        seed(GeneratorKind.LFSR33, 0)


def test_lfsr33_state_never_zero():
    stream = seed(GeneratorKind.LFSR33, 1)
    for _ in range(500):
        stream.next_u32()
        assert stream.state[0] != 0


def test_fibonacci_construction_is_maximal_at_width_9():
    # The 33/20 register is too long to cycle in a test; the same
    # construction with the primitive pair (9, 5) must hit the full
    # period 2^9 - 1, which validates the feedback wiring.
    s0 = 1
    s = s0
    period = 0
    while True:
        s, _ = fib_lfsr_bit(s, 9, 5)
        period += 1
        if s == s0:
            break
    assert period == 2**9 - 1


# --- RANQD1 ------------------------------------------------------------------

def test_ranqd1_is_the_documented_lcg():
    stream = seed(GeneratorKind.RANQD1, 12345)
    x = 12345
    for _ in range(1000):
        x = (1664525 * x + 1013904223) & M32
        assert stream.next_u32() == x


def _serial_pair_chi2(values, shift, bits=4):
    vals = [(v >> shift) & ((1 << bits) - 1) for v in values]
    cells = (1 << bits) ** 2
    counts = np.zeros(cells)
    for a, b in zip(vals, vals[1:]):
        counts[(a << bits) | b] += 1
    n = len(vals) - 1
    expected = n / cells
    return float(((counts - expected) ** 2 / expected).sum()), cells - 1


def test_ranqd1_top_bits_pass_serial_test_low_bits_fail():
    stream = seed(GeneratorKind.RANQD1, 987654321)
    values = [stream.next_u32() for _ in range(60000)]
    chi_top, df = _serial_pair_chi2(values, shift=28)
    chi_low, _ = _serial_pair_chi2(values, shift=0)
    # df = 255: a healthy generator sits within a few sigma of df.
    assert chi_top < df + 6 * (2 * df) ** 0.5
    # The low 4 bits of an LCG have period 16: successor pairs are a
    # deterministic function, so the serial statistic explodes.
    assert chi_low > 100 * df


# --- shared stream behaviour -------------------------------------------------

def test_next_bits_takes_top_bits():
    for kind in GeneratorKind:
        a = seed(kind, 5)
        b = seed(kind, 5)
        for _ in range(100):
            word = a.next_u32()
            for_k = b.next_bits(7)
            assert for_k == word >> 25


def test_next_bits_validates_k():
    stream = seed(GeneratorKind.KISS99, 1)
    for bad in (0, 33):
        with pytest.raises(ValueError):
            stream.next_bits(bad)


def test_draws_made_counts():
    stream = seed(GeneratorKind.RANQD1, 9)
    for _ in range(17):
        stream.next_u32()
    stream.next_bits(3)
    assert stream.draws_made == 18


@pytest.mark.parametrize("kind,code", [
    (GeneratorKind.KISS99, _kernels.KIND_KISS99),
    (GeneratorKind.LFSR33, _kernels.KIND_LFSR33),
    (GeneratorKind.RANQD1, _kernels.KIND_RANQD1),
])
def test_compiled_generator_matches_pure_python(kind, code):
    stream = seed(kind, 2024)
    st = np.zeros(_kernels.STATE_LEN, dtype=np.uint64)
    for i, w in enumerate(stream.state):
        st[i] = w
    words = _kernels.generate_u32(code, st, 2000)
    assert [stream.next_u32() for _ in range(2000)] == list(map(int, words))
    assert int(st[4]) == stream.draws_made
