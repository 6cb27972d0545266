import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwlab.branching import QubitPrep, build_ensemble
from mwlab.measures import (
    ASYMPTOTIC,
    ExactCapError,
    MaverickRule,
    MeasureSpec,
    born_rate,
    born_rate_empirical,
    counting_rate,
    counting_rate_empirical,
    hoeffding_bound,
    measure_mass,
    sweep,
)
from oracles import deviates, maverick_by_enumeration

# frozen from a 40-digit mpmath evaluation
KL_07_09 = 0.1536635868037986
H2_07_MINUS_1 = -0.1187091007693074
TWO_EXP_MINUS_8 = 6.709252558050237e-4

probs = st.fractions(min_value=0, max_value=1, max_denominator=40)
eps_st = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(49, 50), max_denominator=50)


def mass(n, p, alpha, eps, comparison="strict", mode="exact"):
    return measure_mass(build_ensemble(n, QubitPrep(p)), MeasureSpec(alpha), MaverickRule(eps, comparison), mode)


def test_measure_mass_examples():
    assert mass(3, Fraction(9, 10), 0, Fraction(1, 4)).maverick_mass == Fraction(1, 2)
    assert mass(3, Fraction(9, 10), 1, Fraction(1, 4)).maverick_mass == Fraction(7, 250)
    assert mass(1, Fraction(1, 2), 0, Fraction(3, 4)).maverick_mass == 0
    # the same three against enumeration of every outcome string
    assert maverick_by_enumeration(3, Fraction(9, 10), Fraction(1, 4)) == (Fraction(1, 2), Fraction(7, 250))
    assert maverick_by_enumeration(1, Fraction(1, 2), Fraction(3, 4)) == (0, 0)


def test_measure_family_endpoints():
    ens = build_ensemble(6, QubitPrep(Fraction(1, 3)))
    rule = MaverickRule(Fraction(1, 10))
    counting = measure_mass(ens, MeasureSpec.counting(), rule)
    born = measure_mass(ens, MeasureSpec.born(), rule)
    assert counting.maverick_mass == Fraction(sum(c for k, c in enumerate(ens.counts) if rule.is_maverick(k, 6, ens.p)), 64)
    assert born.maverick_mass == sum(w for k, w in enumerate(ens.born_weights()) if rule.is_maverick(k, 6, ens.p))


def test_fractional_alpha_exact_when_roots_are_rational():
    # p = 1/4, alpha = 1/2: weights C(n,k) (1/2)^k (sqrt(3)/2)^(n-k) are irrational
    with pytest.raises(ValueError, match="irrational"):
        mass(4, Fraction(1, 4), Fraction(1, 2), Fraction(1, 10))
    # 9/25 and 16/25 are both squares, so alpha = 1/2 stays rational
    m = mass(4, Fraction(9, 25), Fraction(1, 2), Fraction(1, 10))
    n = 4
    w = [math.comb(n, k) * 3**k * 4 ** (n - k) for k in range(n + 1)]
    expected = Fraction(sum(x for k, x in enumerate(w) if deviates(k, n, Fraction(9, 25), Fraction(1, 10))), 7**n)
    assert m.maverick_mass == expected


@pytest.mark.parametrize("n", range(1, 13))
@pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(2, 3), Fraction(9, 10)])
@pytest.mark.parametrize("eps,comparison", [(Fraction(1, 10), "strict"), (Fraction(1, 4), "inclusive"), (Fraction(1, 6), "strict")])
def test_maverick_mass_equals_enumeration(n, p, eps, comparison):
    strict = comparison == "strict"
    count, born = maverick_by_enumeration(n, p, eps, strict)
    assert mass(n, p, 0, eps, comparison).maverick_mass == count
    assert mass(n, p, 1, eps, comparison).maverick_mass == born


def test_strict_and_inclusive_differ_on_boundary():
    # n = 10, p = 9/10, eps = 1/5: k = 7 sits exactly on the threshold
    strict = mass(10, Fraction(9, 10), 0, Fraction(1, 5), "strict").maverick_mass
    incl = mass(10, Fraction(9, 10), 0, Fraction(1, 5), "inclusive").maverick_mass
    assert incl - strict == Fraction(math.comb(10, 7), 2**10)


@given(st.integers(1, 60), probs, eps_st, st.sampled_from([0, 1, 2, 3]))
def test_masses_sum_to_one(n, p, eps, alpha):
    r = mass(n, p, alpha, eps)
    assert r.maverick_mass + r.nonmaverick_mass == 1


@given(st.integers(1, 60), probs, eps_st, st.sampled_from([0, 1, 2]))
def test_relabeling_symmetry(n, p, eps, alpha):
    assert mass(n, p, alpha, eps).maverick_mass == mass(n, 1 - p, alpha, eps).maverick_mass


@given(st.integers(1, 200), st.sampled_from([Fraction(1, 2), Fraction(3, 4), Fraction(9, 10), Fraction(1, 3)]), eps_st)
def test_born_mass_below_hoeffding(n, p, eps):
    if eps > min(p, 1 - p):
        eps = min(p, 1 - p)
    r = mass(n, p, 1, eps, "inclusive")
    assert float(r.maverick_mass) <= hoeffding_bound(n, eps).to_float() * (1 + 1e-12)


@pytest.mark.parametrize("n", [10, 50, 200, 1000, 2000])
@pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(3, 4), Fraction(9, 10)])
def test_born_mass_below_hoeffding_grid(n, p):
    eps = Fraction(1, 20)
    r = mass(n, p, 1, eps)
    assert r.ln_maverick_mass.ln_magnitude <= hoeffding_bound(n, eps).ln_magnitude


def test_measure_divergence():
    p, eps = Fraction(9, 10), Fraction(1, 5)
    counting = [mass(n, p, 0, eps).maverick_mass for n in (10, 20, 50, 100)]
    born = [mass(n, p, 1, eps).maverick_mass for n in (10, 20, 50, 100)]
    assert counting == sorted(counting) and counting[-1] > Fraction(999, 1000)
    assert born == sorted(born, reverse=True) and born[-1] < Fraction(1, 10**8)


def test_hoeffding_examples():
    assert hoeffding_bound(100, Fraction(1, 5)).to_float() == pytest.approx(TWO_EXP_MINUS_8, rel=1e-12)
    assert hoeffding_bound(1, 1).to_float() == pytest.approx(2 * math.exp(-2), rel=1e-14)
    with pytest.raises(ValueError):
        hoeffding_bound(5, 0)


def test_counting_rate():
    assert counting_rate(Fraction(7, 10)) == pytest.approx(H2_07_MINUS_1, abs=1e-14)
    assert counting_rate(0.5 + 1e-9) == pytest.approx(0, abs=1e-12)
    assert counting_rate(1 - 1e-15) == pytest.approx(-1, abs=1e-12)
    for bad in (Fraction(1, 2), Fraction(1), Fraction(1, 3)):
        with pytest.raises(ValueError):
            counting_rate(bad)


def test_counting_rate_against_exact_tail():
    assert counting_rate_empirical(2000, Fraction(7, 10)) == pytest.approx(counting_rate(Fraction(7, 10)), abs=0.01)


def test_born_rate():
    assert born_rate(Fraction(9, 10), Fraction(9, 10)) == 0
    assert born_rate(Fraction(7, 10), Fraction(9, 10)) == pytest.approx(KL_07_09, abs=1e-14)
    assert born_rate_empirical(2000, Fraction(7, 10), Fraction(9, 10)) == pytest.approx(KL_07_09, abs=0.02)
    for a, p in ((0, Fraction(1, 2)), (Fraction(1, 2), 1)):
        with pytest.raises(ValueError):
            born_rate(a, p)


def test_exact_cap():
    ens = build_ensemble(30, QubitPrep(Fraction(1, 2)))
    with pytest.raises(ExactCapError, match="asymptotic"):
        measure_mass(ens, MeasureSpec.born(), MaverickRule(), exact_cap=20)
    # default cap is 20000 and asymptotic mode ignores it
    r = measure_mass(build_ensemble(50000, QubitPrep(Fraction(1, 2))), MeasureSpec.born(), MaverickRule(), ASYMPTOTIC)
    assert r.mode == ASYMPTOTIC


@pytest.mark.parametrize("alpha", [0, Fraction(1, 2), 1, 2])
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(9, 10)])
def test_asymptotic_matches_exact(alpha, p):
    n, eps = 300, Fraction(1, 10)
    rule = MaverickRule(eps)
    ens = build_ensemble(n, QubitPrep(p))
    asym = measure_mass(ens, MeasureSpec(alpha), rule, ASYMPTOTIC)
    assert asym.maverick_float() + asym.nonmaverick_mass.to_float() == pytest.approx(1, abs=1e-9)
    try:
        exact = measure_mass(ens, MeasureSpec(alpha), rule)
    except ValueError:
        return
    assert asym.ln_maverick_mass.ln_magnitude == pytest.approx(exact.ln_maverick_mass.ln_magnitude, rel=1e-9)


def test_asymptotic_million_spins():
    rule = MaverickRule(Fraction(1, 100))
    r = measure_mass(build_ensemble(10**6, Fraction(9, 10)), MeasureSpec.born(), rule, ASYMPTOTIC)
    assert r.ln_maverick_mass.ln_magnitude < hoeffding_bound(10**6, Fraction(1, 100)).ln_magnitude
    c = measure_mass(build_ensemble(10**6, Fraction(9, 10)), MeasureSpec.counting(), rule, ASYMPTOTIC)
    assert c.maverick_float() == pytest.approx(1.0, abs=1e-12)


def test_sweep_examples():
    rows = sweep([1], Fraction(1, 2), Fraction(3, 4), [0, 1])
    assert [r.report.maverick_mass for r in rows] == [0, 0]
    rows = sweep([3], Fraction(9, 10), Fraction(1, 4), [1, 0])
    assert [(r.alpha, r.report.maverick_mass) for r in rows] == [(0, Fraction(1, 2)), (1, Fraction(7, 250))]
    rows = sweep([20, 10], Fraction(9, 10), Fraction(1, 5), [0])
    assert [r.n for r in rows] == [10, 20]
    assert rows[0].report.maverick_mass < rows[1].report.maverick_mass


def test_sweep_flags_failed_cells():
    rows = sweep([5, 40], Fraction(9, 10), Fraction(1, 5), [0, Fraction(1, 2)], exact_cap=30)
    errors = {(r.n, r.alpha): r.error for r in rows}
    assert errors[(5, 0)] is None
    assert "irrational" in errors[(5, Fraction(1, 2))]
    assert "cap" in errors[(40, 0)]
    assert [(r.n, r.alpha) for r in rows] == sorted(errors)


def test_sweep_parallel_matches_serial():
    args = ([5, 10, 15], Fraction(2, 3), Fraction(1, 10), [0, 1, 2])
    assert sweep(*args) == sweep(*args, jobs=3)
