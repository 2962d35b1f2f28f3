import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitgen.families import (
    EQ,
    INC,
    SUB,
    SUP,
    FamilyError,
    FamilySpec,
    Relation,
    compare,
    iter_members,
    load_family,
    member,
    nth_string,
    rank_in,
    succ_in,
)

from . import oracles

PM = "prefix-multiples(period=100)"


@pytest.fixture(scope="module")
def pm():
    return load_family(PM)


@pytest.fixture(scope="module")
def demo():
    return load_family("naturals-evens-demo")


def test_spec_parsing_round_trip():
    s = FamilySpec.parse("prefix-multiples(period=100)")
    assert s.kind == "prefix-multiples" and s.get("period") == 100
    assert FamilySpec.parse(str(s)) == s
    assert FamilySpec.parse("prefix-multiples(100)") == s
    assert FamilySpec.parse("rationals-truth(1/2)").get("tau") == Fraction(1, 2)


@pytest.mark.parametrize(
    "bad",
    ["prefix-multiples(period=1)", "nonsense", "marker-intervals(base=3,colour=2)", "rationals-truth(tau=3/2)", "divisibility(7)"],
)
def test_bad_specs_rejected(bad):
    with pytest.raises(FamilyError):
        load_family(bad)


def test_prefix_multiples_examples(pm):
    assert member(pm, 120, 117)
    assert not member(pm, 1, 50)
    assert nth_string(pm, 1, 2) == 100
    assert rank_in(pm, 1, 200) == 3
    assert succ_in(pm, 1, 100) == 200
    assert compare(pm, 1, 120) is Relation.PROPER_SUBSET
    assert compare(pm, 120, 1) is Relation.PROPER_SUPERSET
    assert compare(pm, 7, 7) is Relation.EQUAL


def test_equal_languages_detected(pm):
    # {1..99} ∪ 100ℕ equals {1..100} ∪ 100ℕ
    assert pm.compare_code(99, 100) == EQ
    assert pm.compare_code(100, 101) == SUB


def test_marker_examples():
    for start in (0, 1):
        f = load_family(f"marker-intervals(base=3,marker_start={start})")
        assert nth_string(f, 1, 5) == 9
        assert rank_in(f, 1, 9) == 5
    assert succ_in(load_family("marker-intervals(base=3,marker_start=0)"), 1, 1) == 3
    assert succ_in(load_family("marker-intervals(base=3,marker_start=1)"), 1, 1) == 2


def test_divisibility_examples():
    f = load_family("divisibility")
    assert member(f, 3, 9)
    assert compare(f, 2, 3) is Relation.INCOMPARABLE
    assert compare(f, 2, 4) is Relation.PROPER_SUPERSET
    with pytest.raises(FamilyError):
        f.check_index(0)


def test_naturals_listing(demo):
    assert nth_string(demo, 1, 7) == 7
    assert rank_in(demo, 1, 7) == 7
    assert succ_in(demo, 1, 5) == 6
    assert demo.compare_code(3, 2) == SUB


def test_rank_in_rejects_non_member(pm):
    with pytest.raises(FamilyError):
        rank_in(pm, 1, 50)


def test_iter_members(pm):
    it = iter_members(pm, 3, start=2)
    assert [next(it) for _ in range(4)] == [2, 3, 100, 200]


# --- brute-force oracle agreement -------------------------------------------

X = 3000


def _members(f, i, X):
    return {x for x in range(f.universe_min, X + 1) if f.member(i, x)}


@pytest.mark.parametrize("k", [0, 1, 2, 50, 99, 100, 101, 250])
def test_prefix_multiples_matches_definition(pm, k):
    assert _members(pm, k, X) == oracles.prefix_multiples(k, 100, X)


@pytest.mark.parametrize("start", [0, 1])
@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 60])
def test_marker_matches_definition(start, n):
    f = load_family(f"marker-intervals(base=3,marker_start={start})")
    assert _members(f, n, X) == oracles.marker_intervals(n, 3, start, X)


@pytest.mark.parametrize("i", [1, 2, 7, 30])
def test_divisibility_matches_definition(i):
    assert _members(load_family("divisibility"), i, X) == oracles.divisibility(i, X)


@pytest.mark.parametrize("j", [0, 1, 5, 44])
def test_cofinite_matches_definition(j):
    assert _members(load_family("cofinite-gaps"), j, 500) == oracles.cofinite_gaps(j, 500)


@pytest.mark.parametrize("depth", [2, 3])
def test_tree_languages_match_composition(depth):
    f = load_family(f"recursive-tree(depth={depth})")
    for i in range(0, 120, 3):
        path = f.path(i)
        assert _members(f, i, 800) == oracles.tree_language(path, 4, 800), path


@pytest.mark.parametrize("depth", [2, 3])
def test_tree_relations_match_brute_force(depth):
    f = load_family(f"recursive-tree(depth={depth})")
    idx = list(range(40))
    sets = {i: frozenset(oracles.tree_language(f.path(i), 4, 4000)) for i in idx}
    for i in idx:
        codes = f.compare_many(i, np.asarray(idx))
        for j, c in zip(idx, codes):
            assert c == oracles.relation(sets[i], sets[j]), (f.path(i), f.path(j))


def test_tree_listing_is_a_bijection():
    f = load_family("recursive-tree(depth=2)")
    seen = set()
    for i in range(500):
        p = f.path(i)
        assert p not in seen and f.index_of_path(p) == i
        assert all(a >= 1 for a in p) and len(p) <= 2
        seen.add(p)


def test_tree_declared_levels_and_ell():
    f = load_family("recursive-tree(depth=2)")
    for i in range(60):
        assert f.declared_level(i) == 2 - len(f.path(i))
    for i in range(40):
        for j in range(40):
            if f.compare_code(i, j) == SUB:
                assert f.declared_ell(i) < f.declared_ell(j)


def test_relation_table_oracle_on_finite_family(demo):
    sets = {1: set(range(1, 200)), 2: set(range(2, 200, 2)), 3: set(range(4, 200, 4))}
    for i in sets:
        for j in sets:
            assert demo.compare_code(i, j) == oracles.relation(frozenset(sets[i]), frozenset(sets[j]))


# --- contract properties ------------------------------------------------------

SPECS = [
    PM,
    "marker-intervals(base=3)",
    "marker-intervals(base=2,marker_start=1)",
    "divisibility",
    "cofinite-gaps",
    "recursive-tree(depth=2)",
    "recursive-tree(depth=3,period=3)",
    "rationals-truth(tau=1/3)",
    "naturals-evens-demo",
]
FAMS = {s: load_family(s) for s in SPECS}


def _index(f, k):
    if f.size is not None:
        return f.first_index + k % f.size
    return f.first_index + k


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.integers(0, 300), st.integers(1, 400))
def test_count_nth_inverse(spec, k, n):
    f = FAMS[spec]
    i = _index(f, k)
    x = f.nth(i, n)
    assert f.member(i, x)
    assert f.count(i, x) == n
    assert f.count(i, x - 1) == n - 1
    assert f.next_member(i, x) == x
    assert f.next_member(i, x + 1) == f.nth(i, n + 1)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.lists(st.integers(0, 200), min_size=1, max_size=12), st.integers(0, 2000))
def test_vectorised_membership_agrees(spec, ks, x):
    f = FAMS[spec]
    idx = np.asarray([_index(f, k) for k in ks], dtype=np.int64)
    x = max(x, f.universe_min)
    assert list(f.member_many(idx, x)) == [f.member(int(i), x) for i in idx]
    xs = np.arange(f.universe_min, f.universe_min + 300, dtype=np.int64)
    i = int(idx[0])
    assert list(f.member_strings(i, xs)) == [f.member(i, int(v)) for v in xs]
    assert f.nth_many(i, np.arange(1, 20)) == [f.nth(i, r) for r in range(1, 20)]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SPECS), st.integers(0, 60), st.lists(st.integers(0, 60), min_size=1, max_size=10))
def test_compare_many_mirrors(spec, a, bs):
    f = FAMS[spec]
    i = _index(f, a)
    idx = np.asarray([_index(f, b) for b in bs], dtype=np.int64)
    codes = f.compare_many(i, idx)
    mirror = {EQ: EQ, SUB: SUP, SUP: SUB, INC: INC}
    for j, c in zip(idx, codes):
        assert c == f.compare_code(i, int(j))
        assert f.compare_code(int(j), i) == mirror[int(c)]


@pytest.mark.parametrize("spec", ["marker-intervals(base=3)", "rationals-truth(tau=1/2)", "recursive-tree(depth=2)"])
def test_relations_agree_with_membership_prefix(spec):
    f = FAMS.get(spec) or load_family(spec)
    top = 600
    sets = {i: frozenset(_members(f, i, top)) for i in range(12)}
    for i in range(12):
        for j in range(12):
            c = f.compare_code(i, j)
            if c == SUB:
                assert sets[i] <= sets[j]
            elif c == EQ:
                assert sets[i] == sets[j]


def test_big_strings_in_marker_family():
    f = load_family("marker-intervals(base=3)")
    big = 3**60
    assert f.member(5, big + 5) and not f.member(5, big + 6)
    assert f.next_member(5, big + 6) == 3**61
    assert list(f.member_many(np.array([0, 4, 5]), big + 5)) == [True, False, True]


def test_declared_towers(pm):
    t = pm.tower_for(0)
    assert t.prefix(4) == [1, 2, 3, 4]
    assert t.b_index(100) == 1 and t.b_index(1) == 1 and t.b_index(2) == 2
    assert pm.tower_for(5) is None
    assert load_family("divisibility").tower_for(1) is None
    assert load_family("divisibility").tower_refutation(None, 1)


def test_rationals_values_in_unit_interval():
    f = load_family("rationals-truth(tau=1/2)")
    vals = [f.value(x) for x in range(0, 200)]
    assert len(set(vals)) == len(vals)
    assert all(0 <= v <= 1 for v in vals)
    for i in (1, 5, 20):
        above = [x for x in range(0, 400) if f.member(i, x) and f.value(x) > Fraction(1, 2)]
        assert len(above) <= i


# --- scripted families ---------------------------------------------------------


def _write(tmp_path, doc):
    p = tmp_path / "fam.json"
    p.write_text(json.dumps(doc))
    return p


def test_scripted_family_loads_and_validates(tmp_path):
    doc = {
        "format": "limitgen-family",
        "version": 1,
        "first_index": 1,
        "languages": [
            {"index": 1, "rule": "naturals"},
            {"index": 2, "rule": "multiples", "k": 2},
            {"index": 3, "rule": "explicit", "prefix": [1], "start": 4, "period": 4, "residues": [0]},
        ],
        "relations": [[2, 1, "ProperSubset"]],
    }
    f = load_family(f"scripted(file={_write(tmp_path, doc)})")
    assert f.compare_code(2, 1) == SUB
    assert f.member(3, 1) and f.member(3, 8) and not f.member(3, 2)
    with pytest.raises(FamilyError):
        f.compare_code(3, 2)  # relations must be declared, never guessed


def test_scripted_family_rejects_false_relation(tmp_path):
    doc = {
        "format": "limitgen-family",
        "version": 1,
        "languages": [{"index": 1, "rule": "naturals"}, {"index": 2, "rule": "multiples", "k": 2}],
        "relations": [[1, 2, "ProperSubset"]],
    }
    with pytest.raises(FamilyError):
        load_family(f"scripted(file={_write(tmp_path, doc)})")


def test_scripted_family_rejects_bad_header(tmp_path):
    with pytest.raises(FamilyError):
        load_family(f"scripted(file={_write(tmp_path, {'format': 'other', 'version': 1})})")
