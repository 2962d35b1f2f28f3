from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitgen.families import SUB, load_family
from limitgen.topology import (
    FeasibilityError,
    Restriction,
    TopologyError,
    cb_levels,
    estimate_truth_index,
    extract_tower,
    in_basic_open,
    inclusion_matrix,
    linear_extension,
    verify_tower,
)

from . import oracles

CASES = [
    ("prefix-multiples(period=100)", Restriction(40, 200), lambda f, i, X: oracles.prefix_multiples(i, 100, X)),
    ("prefix-multiples(period=10)", Restriction(60, 20), lambda f, i, X: oracles.prefix_multiples(i, 10, X)),
    ("marker-intervals(base=3)", Restriction(51, 64), lambda f, i, X: oracles.marker_intervals(i, 3, 0, X)),
    ("marker-intervals(base=2,marker_start=1)", Restriction(30, 40), lambda f, i, X: oracles.marker_intervals(i, 2, 1, X)),
    ("cofinite-gaps", Restriction(30, 64), lambda f, i, X: oracles.cofinite_gaps(i, X)),
    ("divisibility", Restriction(30, 64), lambda f, i, X: oracles.divisibility(i, X)),
    ("recursive-tree(depth=2)", Restriction(200, 4), lambda f, i, X: oracles.tree_language(f.path(i), 4, X)),
]


def _oracle_levels(f, R, orc):
    idx = R.indices(f)
    tests = {i: {x for x in oracles_range(f, R.horizon) if f.member(i, x)} | set(f.separator(i)) for i in idx}
    X = max(2000, 3 * R.horizon, 1 + max((max(t) for t in tests.values() if t), default=0))
    langs = {i: frozenset(orc(f, i, X)) for i in idx}
    return oracles.derived_levels(langs, tests)


def oracles_range(f, H):
    return range(f.universe_min, H + 1)


@pytest.mark.parametrize("spec,R,orc", CASES, ids=[c[0] + f"-{c[1].n}-{c[1].horizon}" for c in CASES])
def test_cb_levels_match_derived_set_oracle(spec, R, orc):
    f = load_family(spec)
    lm = cb_levels(f, R)
    want, rank = _oracle_levels(f, R, orc)
    assert lm.levels == want
    assert lm.rank == rank
    assert not lm.kernel


def test_marker_levels():
    f = load_family("marker-intervals(base=3)")
    lm = cb_levels(f, Restriction(51, 64))
    assert lm.rank == 2 and lm.levels[0] == 1
    assert all(lm.levels[i] == 0 for i in range(1, 51))


def test_tree_levels_agree_with_declared_depth():
    f = load_family("recursive-tree(depth=2)")
    lm = cb_levels(f, Restriction(200, 4))
    assert lm.rank == 3
    assert all(lm.levels[i] == f.declared_level(i) for i in range(200))


def test_level_map_ell_increases_along_inclusion():
    f = load_family("recursive-tree(depth=2)")
    R = Restriction(120, 4)
    lm = cb_levels(f, R)
    idx = R.indices(f)
    for i in idx:
        for j in idx:
            if f.compare_code(i, j) == SUB:
                assert lm.ell[i] < lm.ell[j]
                assert lm.levels[i] <= lm.levels[j]


@pytest.mark.parametrize("spec", ["prefix-multiples(period=10)", "divisibility", "recursive-tree(depth=3,period=3)"])
def test_linear_extension_is_consecutive_and_monotone(spec):
    f = load_family(spec)
    R = Restriction(60, 50)
    ext = linear_extension(f, R)
    idx = R.indices(f)
    assert sorted(ext.values()) == [Fraction(k) for k in range(len(idx))]
    for i in idx:
        for j in idx:
            if f.compare_code(i, j) == SUB:
                assert ext[i] < ext[j]


def test_inclusion_matrix_matches_oracle():
    f = load_family("recursive-tree(depth=2)")
    idx = list(range(50))
    m = inclusion_matrix(f, idx)
    sets = [frozenset(oracles.tree_language(f.path(i), 4, 3000)) for i in idx]
    for a in range(50):
        for b in range(50):
            assert m[a, b] == (sets[a] <= sets[b])


def test_in_basic_open_examples():
    pm = load_family("prefix-multiples(period=100)")
    assert in_basic_open(pm, 5, 0, [1, 2, 100])
    assert not in_basic_open(pm, 5, 0, [6])
    assert not in_basic_open(pm, 0, 5, [])
    assert in_basic_open(pm, 3, 3, [])


def test_restriction_validation():
    with pytest.raises(TopologyError):
        Restriction(0, 10)
    f = load_family("naturals-evens-demo")
    assert Restriction(10, 10, extra=(2,)).indices(f) == [1, 2, 3]


# --- towers ---------------------------------------------------------------------


def _brute_B(seq_sets, X):
    """B_k = ⋂_{i >= k} Λ_i minus ⋂_{i >= k-1} Λ_i, on [1, X]."""
    out = {}
    prev = set()
    for k in range(len(seq_sets)):
        cur = set.intersection(*[set(s) for s in seq_sets[k:]])
        out[k + 1] = sorted(cur - prev)
        prev = cur
    return out


def test_B_sets_match_brute_force_for_undeclared_sequence():
    f = load_family("prefix-multiples(period=100)")
    seq = [2, 5, 9, 30]  # not the declared prefix, so tail intersections are used
    rep = verify_tower(f, seq, 0, 10_000)
    want = _brute_B([oracles.prefix_multiples(k, 100, 10_000) for k in seq], 10_000)
    assert rep.B_sets == want
    assert rep.verdict == "verified-at-horizon"


def test_B_sets_for_declared_tower():
    f = load_family("prefix-multiples(period=100)")
    rep = verify_tower(f, [1, 2, 3, 4], 0, 10_000)
    want = _brute_B([oracles.prefix_multiples(k, 100, 10_000) for k in (1, 2, 3, 4)], 10_000)
    assert rep.B_sets == want
    assert rep.beyond == 10_000 - 104  # B_1 holds 1 and 100 strings of 100ℕ


def test_marker_tower_density():
    f = load_family("marker-intervals(base=3)")
    rep = verify_tower(f, [1, 2, 3, 4, 5], 0, 10_000)
    assert rep.verdict == "verified-at-horizon"
    assert rep.max_upper_density_estimate == Fraction(9, 1000)
    js = rep.to_json()
    assert js["format"] == "limitgen-tower-report" and js["verdict"] == rep.verdict


def test_tower_refutations():
    f = load_family("divisibility")
    assert verify_tower(f, [2, 4], 1, 1000).verdict == "refuted"
    pm = load_family("prefix-multiples(period=100)")
    assert verify_tower(pm, [3, 2], 0, 1000).verdict == "refuted"
    with pytest.raises(TopologyError):
        verify_tower(pm, [3], 0, 1000)


def test_truth_estimates():
    d = estimate_truth_index(load_family("divisibility"), 1)
    assert d.value == 1 and not d.inconclusive and d.witness
    r = estimate_truth_index(load_family("rationals-truth(tau=1/2)"), 0)
    assert abs(float(r) - 0.5) < 0.02
    p = estimate_truth_index(load_family("prefix-multiples(period=100)"), 0)
    assert float(p) < 0.02


def test_extract_tower_from_chain_like_sequence():
    f = load_family("prefix-multiples(period=100)")
    seq = [(t, t) for t in range(1, 9)]
    assert extract_tower(f, seq, 0, 2000) == list(range(1, 9))


def test_extract_tower_drops_repeated_languages():
    f = load_family("prefix-multiples(period=100)")
    seq = [(3 * (t - 1) + k + 1, 3 * t) for t in range(1, 30) for k in range(3)]
    assert extract_tower(f, seq, 0, 2000) == list(range(3, 88, 3))


def test_extract_tower_merges_languages_equal_at_the_horizon():
    f = load_family("marker-intervals(base=3)")
    seq = [(3 * (t - 1) + k + 1, 3 * t) for t in range(1, 20) for k in range(3)]
    out = extract_tower(f, seq, 0, 1000)
    assert out == [3, 9, 21, 51]
    # on [0, 1000] each kept language gains strings over the previous one
    sets = [oracles.marker_intervals(n, 3, 0, 1000) for n in out]
    assert all(a < b for a, b in zip(sets, sets[1:]))
    assert extract_tower(f, [(t, t) for t in range(1, 30)], 0, 1000) == [1, 3, 8, 19]


def test_extract_tower_rejects_infeasible_input():
    f = load_family("prefix-multiples(period=100)")
    with pytest.raises(FeasibilityError):
        extract_tower(f, [(1, 1), (2, 0)], 0, 100)  # the terminal itself
    with pytest.raises(FeasibilityError):
        extract_tower(f, [(2, 1), (2, 2)], 0, 100)
    with pytest.raises(FeasibilityError):
        extract_tower(f, [(5, 1)], 0, 100)  # L_1 misses 2


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 80), min_size=2, max_size=6, unique=True))
def test_verified_towers_have_nonempty_disjoint_B(ks):
    f = load_family("prefix-multiples(period=10)")
    seq = sorted(ks)
    rep = verify_tower(f, seq, 0, 3000)
    sets = [oracles.prefix_multiples(k, 10, 3000) for k in seq]
    if any(a == b for a, b in zip(sets, sets[1:])):
        assert rep.verdict == "refuted"
        return
    assert rep.verdict == "verified-at-horizon"
    parts = [set(v) for v in rep.B_sets.values()]
    assert all(parts)
    assert sum(map(len, parts)) == len(set().union(*parts))
