import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitgen.adversaries import AdversaryError, make_adversary, read_script, shuffled_blocks
from limitgen.families import load_family


@pytest.fixture(scope="module")
def pm():
    return load_family("prefix-multiples(period=100)")


@pytest.fixture(scope="module")
def demo():
    return load_family("naturals-evens-demo")


def test_straight_enumerates_in_order(pm):
    a = make_adversary("straight", pm, 1)
    assert [a.emit() for _ in range(3)] == [1, 100, 200]


def test_greedy_skips_strings_the_algorithm_took(demo):
    a = make_adversary("greedy-lowest", demo, 1, backfill=None)
    assert a.emit(None) == 1
    b = make_adversary("greedy-lowest", demo, 1, backfill=None)
    b.taken.update({1, 2})
    assert b.emit(None) == 3


def test_greedy_backfill_enumerates_taken_strings(pm):
    a = make_adversary("greedy-lowest", pm, 1, backfill=3)
    assert [a.emit(o) for o in [None, 100, None, None, 300, None]] == [1, 200, 100, 300, 400, 500]
    with pytest.raises(AdversaryError):
        make_adversary("greedy-lowest", pm, 1, backfill=0)


def test_pretender_case_two_on_prefix_multiples(pm):
    a = make_adversary("tower-pretender", pm, 0, window=3)
    assert a.case == 2
    out, last = [], None
    for t in range(12):
        w = a.emit(last)
        out.append((w, a.j))
        last = pm.nth(a.lam, 1000 + t)  # every output sits inside the pretended language
    assert out == [(1, 1), (100, 1), (200, 1), (2, 2), (300, 2), (400, 2),
                   (3, 3), (500, 3), (600, 3), (4, 4), (700, 4), (800, 4)]


def test_pretender_never_switches_while_outputs_miss(pm):
    a = make_adversary("tower-pretender", pm, 0, window=3, max_dwell=None)
    ws = [a.emit(7) for _ in range(50)]  # 7 is outside every Λ_j with j < 7
    assert a.j == 1 and all(pm.member(1, w) for w in ws)


def test_pretender_dwell_cap_forces_progress(pm):
    a = make_adversary("tower-pretender", pm, 0, window=3, max_dwell=5)
    for _ in range(21):
        a.emit(7)
    assert a.j == 5


def test_pretender_case_one_on_cofinite_gaps():
    f = load_family("cofinite-gaps")
    a = make_adversary("tower-pretender", f, 0, window=2)
    assert a.case == 1
    first = [a.emit(None) for _ in range(4)]
    assert first == [1, 3, 4, 5]  # the block {1} first, then Λ_1 = ℕ₊ ∖ {2} in order


def test_pretender_requires_a_tower():
    with pytest.raises(AdversaryError):
        make_adversary("tower-pretender", load_family("divisibility"), 1)
    with pytest.raises(AdversaryError):
        make_adversary("tower-pretender", load_family("prefix-multiples(period=100)"), 0, window=0)


def test_scripted_replays_then_enumerates(demo, tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("# warm up\n5\n1\n\n3\n")
    assert read_script(p) == [5, 1, 3]
    a = make_adversary("scripted", demo, 1, path=p)
    assert [a.emit() for _ in range(6)] == [5, 1, 3, 2, 4, 6]


def test_scripted_load_errors(demo, tmp_path):
    with pytest.raises(AdversaryError):
        make_adversary("scripted", demo, 2, script=[2, 7])
    with pytest.raises(AdversaryError):
        make_adversary("scripted", demo, 1, script=[2, 2])
    bad = tmp_path / "bad.txt"
    bad.write_text("4\nfour\n")
    with pytest.raises(AdversaryError):
        read_script(bad)
    with pytest.raises(AdversaryError):
        read_script(tmp_path / "missing.txt")


def test_unknown_adversary(demo):
    with pytest.raises(AdversaryError):
        make_adversary("oracle", demo, 1)


def test_shuffled_blocks_are_permutations(pm):
    it = shuffled_blocks(pm, 3, seed=4, block=16)
    got = [next(it) for _ in range(48)]
    assert sorted(got) == [pm.nth(3, n) for n in range(1, 49)]
    it2 = shuffled_blocks(pm, 3, seed=4, block=16)
    assert [next(it2) for _ in range(48)] == got


SPECS = ["prefix-multiples(period=10)", "marker-intervals(base=2)", "cofinite-gaps", "recursive-tree(depth=2)"]


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SPECS), st.sampled_from(["straight", "greedy-lowest", "tower-pretender", "shuffled"]),
       st.lists(st.integers(0, 3000), min_size=30, max_size=120))
def test_emissions_are_fresh_members_of_the_truth(spec, kind, outs):
    f = load_family(spec)
    K = f.default_true_index()
    a = make_adversary(kind, f, K)
    seen = set()
    last = None
    for o in outs:
        w = a.emit(last)
        assert w not in seen and f.member(K, w)
        seen.add(w)
        last = o


def test_straight_enumeration_is_complete(pm):
    # every member of K below a bound appears once the adversary passes its rank
    a = make_adversary("greedy-lowest", pm, 0, backfill=4)
    got = {a.emit(x) for x in range(2, 802, 2)}
    assert {x for x in range(1, 60)} <= got
