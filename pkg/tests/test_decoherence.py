import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwlab.decoherence import (
    PointerModel,
    decoherence_rate,
    env_size_for_overlap,
    interference_visibility,
    pointer_overlap,
)
from oracles import ln_one_minus

gammas = st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100), max_denominator=100)


def test_overlap_examples():
    assert pointer_overlap(PointerModel(10, Fraction(1, 2))) == Fraction(1, 1024)
    assert pointer_overlap(PointerModel(12345, Fraction(1))) == 1
    # ln(9/10) = ln(1 - 1/10) by series, to far below float resolution
    ln_09 = float(ln_one_minus(Fraction(1, 10), terms=60))
    got = pointer_overlap(PointerModel(1000, Fraction(9, 10)), log=True)
    assert got.ln_magnitude == pytest.approx(1000 * ln_09, rel=1e-13)
    assert got.ln_magnitude == pytest.approx(-105.36, abs=0.005)


def test_overlap_rejects_bad_gamma():
    with pytest.raises(ValueError):
        PointerModel(5, Fraction(3, 2))
    with pytest.raises(ValueError):
        PointerModel(0, Fraction(1, 2))


def test_zero_gamma_in_log_mode():
    assert pointer_overlap(PointerModel(3, Fraction(0)), log=True).is_zero()


def test_visibility_examples():
    assert interference_visibility(Fraction(1), PointerModel(5, Fraction(1, 2))).sign == 0
    v = interference_visibility(Fraction(1, 2), PointerModel(77, Fraction(1)))
    assert v.to_float() == pytest.approx(0.5, rel=1e-15)
    v = interference_visibility(Fraction(1, 2), PointerModel(20, Fraction(1, 2)))
    assert v.ln_magnitude == pytest.approx(-21 * math.log(2), rel=1e-14)


@given(st.fractions(min_value=0, max_value=1, max_denominator=50), st.integers(1, 500), gammas)
def test_visibility_branch_exchange_symmetry(x, n, g):
    m = PointerModel(n, g)
    a, b = interference_visibility(x, m), interference_visibility(1 - x, m)
    assert a.sign == b.sign
    if a.sign:
        assert a.ln_magnitude == pytest.approx(b.ln_magnitude, rel=1e-12, abs=1e-12)


def test_rate_examples():
    assert decoherence_rate(PointerModel(1, 1 / math.e)) == pytest.approx(1.0, rel=1e-15)
    assert decoherence_rate(PointerModel(1, Fraction(1, 2))) == pytest.approx(math.log(2), rel=1e-15)
    for g in (Fraction(0), Fraction(1)):
        with pytest.raises(ValueError, match="degenerate"):
            decoherence_rate(PointerModel(1, g))


def test_halving_rate_doubles_environment():
    rate = decoherence_rate(PointerModel(1, Fraction(1, 2)))
    n1 = env_size_for_overlap(1e-30, rate)
    n2 = env_size_for_overlap(1e-30, rate / 2)
    assert n2 == pytest.approx(2 * n1, rel=1e-14)
    assert math.exp(-rate * n1) == pytest.approx(1e-30, rel=1e-12)


@given(st.integers(1, 300), st.integers(1, 300), gammas)
def test_composition_exact(n1, n2, g):
    assert pointer_overlap(PointerModel(n1 + n2, g)) == pointer_overlap(PointerModel(n1, g)) * pointer_overlap(PointerModel(n2, g))


@given(st.integers(1, 10**6), gammas)
def test_log_linearity(n, g):
    got = pointer_overlap(PointerModel(n, g), log=True).ln_magnitude
    assert got == pytest.approx(n * math.log(g), rel=1e-9)


@given(st.integers(1, 200), gammas)
def test_monotonicity(n, g):
    assert pointer_overlap(PointerModel(n + 1, g)) < pointer_overlap(PointerModel(n, g))
    assert pointer_overlap(PointerModel(n, g)) < pointer_overlap(PointerModel(n, g + Fraction(1, 1000)))
