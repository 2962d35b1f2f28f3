from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitgen.density import (
    DensityError,
    DensityProfile,
    density_profile,
    extreme_ratio,
    hit_series,
    language_profile,
    ordered_density,
    prefix_density,
    profile_csv_text,
    tail_extrema,
)
from limitgen.families import load_family

from . import oracles


@pytest.fixture(scope="module")
def demo():
    return load_family("naturals-evens-demo")  # 1 = ℕ₊, 2 = evens, 3 = multiples of 4


@pytest.fixture(scope="module")
def pm():
    return load_family("prefix-multiples(period=100)")


def _interval_union(x):
    k = 0
    while 3 ** (k + 1) <= x:
        k += 1
    return 3**k <= x <= 2 * 3**k


def test_evens_density_exact(demo):
    assert prefix_density(set(range(2, 21, 2)), demo, 1, 10) == Fraction(1, 2)
    for m in (5, 50, 500):
        assert prefix_density(lambda x: x % 2 == 0, demo, 1, 2 * m) == Fraction(1, 2)


def test_interval_union_count(demo):
    assert prefix_density(_interval_union, demo, 1, 54) == Fraction(44, 54)
    direct = sum(1 for x in range(1, 55) if _interval_union(x))
    assert direct == 44


def test_first_prefix_multiples_language_in_naturals(pm):
    L1 = {x for x in range(1, 1001) if pm.member(1, x)}
    assert prefix_density(L1, pm, 0, 1000) == Fraction(11, 1000)


def test_profile_examples(demo):
    prof = density_profile(lambda x: x % 2 == 0, demo, 1, 100, stride=50)
    assert prof.ratios == (Fraction(1, 2), Fraction(1, 2))
    assert all(r == 0 for r in density_profile(set(), demo, 1, 60, stride=20).ratios)
    prof = density_profile(_interval_union, demo, 1, 80, stride=26)
    assert Fraction(44, 78) in prof.ratios


def test_interval_union_tail_extrema(demo):
    n_max = 2 * 3**8
    series = hit_series(_interval_union, demo, 1, n_max)
    hz = sorted({2 * 3**k for k in range(1, 9)} | {3 ** (k + 1) - 1 for k in range(1, 8)})
    prof = DensityProfile(tuple(hz), tuple(int(series[n - 1]) for n in hz))
    est = tail_extrema(prof, 54)  # from the k = 3 block end on
    assert 0.74 <= est.upper_est <= 0.82
    assert 0.50 <= est.lower_est <= 0.56


def test_tail_extrema_trivial_cases():
    flat = DensityProfile((10, 20, 30), (5, 10, 15))
    e = tail_extrema(flat, 1)
    assert e.upper_est == e.lower_est == Fraction(1, 2)
    one = DensityProfile((7,), (3,))
    assert tail_extrema(one, 1).upper_est == tail_extrema(one, 1).lower_est == Fraction(3, 7)
    with pytest.raises(DensityError):
        tail_extrema(flat, 31)


def test_ordered_density(demo, pm):
    assert ordered_density({2, 4}, demo, 1) == Fraction(1, 2)
    assert ordered_density({100, 200}, pm, 1) == Fraction(2, 3)
    with pytest.raises(DensityError):
        ordered_density({9}, demo, 2)


def test_language_profile_matches_oracle(pm):
    prof = language_profile(pm, 3, 0, 1000, stride=100)
    K = list(range(1, 1001))
    L3 = oracles.prefix_multiples(3, 100, 1000)
    assert prof.ratios == tuple(oracles.prefix_density(L3, K, N) for N in range(100, 1001, 100))


def test_csv_uses_nine_significant_digits():
    text = profile_csv_text(DensityProfile((3,), (1,)))
    assert text.splitlines()[0].startswith("N")
    assert "0.333333333" in text and "0.3333333333" not in text


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(1, 400), max_size=60), st.integers(1, 300))
def test_prefix_density_matches_direct_count(A, N):
    fam = load_family("naturals-evens-demo")
    A = set(A)
    evens = [2 * k for k in range(1, N + 1)]
    assert prefix_density(A, fam, 2, N) == oracles.prefix_density(A, evens, N)
    series = hit_series(A, fam, 2, N)
    assert all(series[n - 1] == sum(1 for x in evens[:n] if x in A) for n in (1, N))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(1, 1000)), min_size=1, max_size=40))
def test_extreme_ratio_is_exact(pairs):
    h, n = zip(*pairs)
    fr = [Fraction(a, b) for a, b in pairs]
    assert extreme_ratio(h, n) == max(fr)
    assert extreme_ratio(h, n, low=True) == min(fr)
