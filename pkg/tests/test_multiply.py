import random
from fractions import Fraction

import pytest

from fxpsr.formats import FixedValue, S8_7, S16_15, U0_32
from fxpsr.multiply import MUL_CASES, MacAccumulator, mac, mul
from fxpsr.rng import GeneratorKind, seed
from fxpsr.rounding import RD, RN, sr


def _rand_value(fmt, rng):
    return FixedValue(rng.randint(fmt.raw_min, fmt.raw_max), fmt)


def _oracle(a, b, case, how):
    """Exact-rational reference for the deterministic modes."""
    exact = a.to_fraction() * b.to_fraction()
    scaled = exact * (1 << case.out.frac_bits)
    floor = scaled.numerator // scaled.denominator
    if how == "rd":
        raw = floor
    else:
        raw = floor + (1 if (scaled - floor) * 2 >= 1 else 0)
    return case.out.saturate(raw)


def test_case_table_shape():
    assert len(MUL_CASES) == 10
    for name, case in MUL_CASES.items():
        assert case.name == name
        assert case.discard_bits >= 7


def test_discard_widths():
    assert MUL_CASES["s16.15xs16.15"].discard_bits == 15
    assert MUL_CASES["s16.15xu0.32"].discard_bits == 32
    assert MUL_CASES["u0.32xu0.32"].discard_bits == 33
    assert MUL_CASES["s8.7xs8.7"].discard_bits == 7
    assert MUL_CASES["u0.16xu0.16"].discard_bits == 17


@pytest.mark.parametrize("name", sorted(MUL_CASES))
@pytest.mark.parametrize("how", ["rd", "rn"])
def test_deterministic_mul_matches_rational_oracle(name, how):
    case = MUL_CASES[name]
    spec = RD if how == "rd" else RN
    rng = random.Random(f"{name}:{how}")
    for _ in range(3000):
        a = _rand_value(case.lhs, rng)
        b = _rand_value(case.rhs, rng)
        assert mul(a, b, case, spec).raw == _oracle(a, b, case, how)


def test_known_product():
    case = MUL_CASES["s16.15xs16.15"]
    a = FixedValue(3 << 15, S16_15)   # 3.0
    b = FixedValue(5 << 14, S16_15)   # 2.5
    assert mul(a, b, case, RN).to_real() == 7.5


def test_mul_saturates():
    case = MUL_CASES["s16.15xs16.15"]
    big = FixedValue(S16_15.raw_max, S16_15)
    assert mul(big, big, case, RD).raw == S16_15.raw_max
    neg = FixedValue(S16_15.raw_min, S16_15)
    assert mul(big, neg, case, RD).raw == S16_15.raw_min


def test_mul_format_mismatch_rejected():
    case = MUL_CASES["s16.15xs16.15"]
    with pytest.raises(ValueError):
        mul(FixedValue(1, S8_7), FixedValue(1, S16_15), case, RD)


def test_sr_mul_brackets_exact_product():
    case = MUL_CASES["s16.15xu0.32"]
    stream = seed(GeneratorKind.KISS99, 77)
    rng = random.Random(77)
    for _ in range(500):
        a = _rand_value(case.lhs, rng)
        b = _rand_value(case.rhs, rng)
        exact = a.to_fraction() * b.to_fraction()
        got = mul(a, b, case, sr(), stream).to_fraction()
        assert abs(got - exact) < case.out.epsilon \
            or got in (case.out.value_range())


def test_mac_single_rounding_matches_oracle():
    rng = random.Random(42)
    stream = None
    for _ in range(500):
        terms = [( _rand_value(S16_15, rng), _rand_value(S16_15, rng))
                 for _ in range(4)]
        acc = MacAccumulator()
        exact = Fraction(0)
        ok = True
        try:
            for a, b in terms:
                mac(acc, a, b)
                exact += a.to_fraction() * b.to_fraction()
        except OverflowError:
            ok = False
        if not ok:
            continue
        got = acc.round_to(S16_15, RD, stream)
        scaled = exact * (1 << 15)
        assert got.raw == S16_15.saturate(scaled.numerator // scaled.denominator)


def test_mac_alignment_enforced():
    acc = MacAccumulator()
    mac(acc, FixedValue(100, S16_15), FixedValue(100, S16_15))
    with pytest.raises(ValueError):
        mac(acc, FixedValue(100, S16_15), FixedValue(100, U0_32))


def test_mac_overflow_detected():
    acc = MacAccumulator()
    big = FixedValue(S16_15.raw_max, S16_15)
    with pytest.raises(OverflowError):
        for _ in range(3):
            mac(acc, big, big)


def test_empty_mac_rounds_to_zero():
    assert MacAccumulator().round_to(S16_15, RN).raw == 0
