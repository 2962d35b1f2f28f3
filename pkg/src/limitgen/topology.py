"""Finite restrictions of the family topology: limit points, derived-set
levels, linear extensions of proper inclusion and perfect towers."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .density import language_profile, tail_extrema
from .families import EQ, SMALL, SUB, Family, RecursiveTree


class TopologyError(ValueError):
    pass


class FeasibilityError(TopologyError):
    pass


@dataclass(frozen=True)
class Restriction:
    """The first ``n`` languages of the listing (plus ``extra`` indices),
    with membership examined on strings up to ``horizon``."""

    n: int
    horizon: int
    extra: tuple = ()

    def __post_init__(self):
        if self.n < 1 or self.horizon < 1:
            raise TopologyError("restriction needs n >= 1 and horizon >= 1")

    def indices(self, family: Family) -> list:
        end = family.first_index + self.n
        if family.size is not None:
            end = min(end, family.first_index + family.size)
        idx = set(range(family.first_index, end))
        idx.update(family.check_index(i) for i in self.extra)
        return sorted(idx)


@dataclass
class LevelMap:
    levels: dict
    kernel: frozenset
    rank: Optional[int]
    ell: dict
    derived: list = field(default_factory=list)  # X^(0), X^(1), ... as sorted index lists

    def get(self, i):
        return self.levels.get(i)


def in_basic_open(family: Family, j: int, L: int, F) -> bool:
    """True iff F ⊆ L_j ⊆ L_L."""
    if j != L and family.compare_code(j, L) not in (SUB, EQ):
        return False
    F = list(F)
    return bool(family.member_strings(j, F).all()) if F else True


def inclusion_matrix(family: Family, idx: Sequence[int]) -> np.ndarray:
    """incl[a, b] is True when L_idx[a] ⊆ L_idx[b]."""
    idx = np.asarray(idx, dtype=np.int64)
    if isinstance(family, RecursiveTree) and len(idx) > 1:
        return _tree_inclusion(family, idx)
    n = len(idx)
    incl = np.zeros((n, n), dtype=bool)
    for a in range(n):
        codes = family.compare_many(int(idx[a]), idx)
        incl[a] = (codes == SUB) | (codes == EQ)
    return incl


def _tree_inclusion(family: RecursiveTree, idx: np.ndarray) -> np.ndarray:
    certs = [family.certificate(int(i)) for i in idx]
    bound = max(b for b, _ in certs) + math.lcm(*[q for _, q in certs])
    xs = np.arange(1, bound + 1, dtype=np.int64)
    M = np.stack([family._member_vec(int(i), xs) for i in idx]).astype(np.float32)
    miss = M @ (1.0 - M).T  # miss[a, b] = |L_a ∖ L_b| within the bound
    return miss == 0


def _proper(incl: np.ndarray) -> np.ndarray:
    return incl & ~incl.T


def _representatives(idx: list, incl: np.ndarray) -> list:
    """Position of the smallest-index equal language for each position."""
    eq = incl & incl.T
    return [int(np.nonzero(eq[a])[0][0]) for a in range(len(idx))]


def _kahn(idx: list, proper: np.ndarray, key) -> dict:
    n = len(idx)
    indeg = proper.sum(axis=0).astype(int).tolist()  # edges a -> b when L_a ⊊ L_b
    heap = [(key(a), a) for a in range(n) if indeg[a] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, a = heapq.heappop(heap)
        order.append(a)
        for b in np.nonzero(proper[a])[0]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, (key(int(b)), int(b)))
    if len(order) != n:
        raise TopologyError("comparator inconsistency: proper inclusion has a cycle")
    return {idx[a]: Fraction(k) for k, a in enumerate(order)}


def linear_extension(family: Family, restriction: Restriction, incl: Optional[np.ndarray] = None) -> dict:
    """Consecutive rationals increasing along proper inclusion; ties by index."""
    idx = restriction.indices(family)
    if incl is None:
        idx_arr = np.asarray(idx, dtype=np.int64)
        proper = np.zeros((len(idx), len(idx)), dtype=bool)
        for a in range(len(idx)):
            proper[a] = family.compare_many(idx[a], idx_arr) == SUB
    else:
        proper = _proper(incl)
    return _kahn(idx, proper, key=lambda a: idx[a])


def _test_strings(family: Family, i: int, horizon: int) -> list:
    """Initial segment of L_i up to the horizon, plus its separator."""
    n = family.count(i, horizon)
    members = family.nth_many(i, np.arange(1, n + 1, dtype=np.int64)) if n else []
    return sorted(set(members).union(family.separator(i)))


def cb_levels(family: Family, restriction: Restriction) -> LevelMap:
    """Iterated derived sets of a finite restriction.

    L is a limit point of a set Y when some other language of Y is a proper
    subset of L containing L's test strings (its initial segment up to the
    horizon together with its separator).
    """
    idx = restriction.indices(family)
    incl = inclusion_matrix(family, idx)
    proper = _proper(incl)
    rep = _representatives(idx, incl)
    reps = sorted(set(rep))

    tests = {a: _test_strings(family, idx[a], restriction.horizon) for a in reps}
    universe = sorted(set().union(*tests.values())) if tests else []
    pos = {x: k for k, x in enumerate(universe)}
    F = np.zeros((len(reps), len(universe)), dtype=np.float32)
    for r, a in enumerate(reps):
        for x in tests[a]:
            F[r, pos[x]] = 1.0
    arr = np.asarray(universe, dtype=np.int64) if universe and universe[-1] < SMALL else universe
    M = np.stack([family.member_strings(idx[b], arr) for b in reps]).astype(np.float32) if universe else np.ones((len(reps), 0), np.float32)
    contains = (F @ (1.0 - M).T) == 0  # contains[r, s]: tests of rep r lie in rep s
    sub = proper[np.ix_(reps, reps)].T  # sub[r, s]: L_s ⊊ L_r

    witness = sub & contains
    alive = np.ones(len(reps), dtype=bool)
    levels_r = [None] * len(reps)
    derived = [sorted(idx[reps[r]] for r in range(len(reps)))]
    rank = None
    level = 0
    while True:
        lim = alive & (witness & alive[None, :]).any(axis=1)
        if (lim == alive).all():
            rank = level
            break
        for r in np.nonzero(alive & ~lim)[0]:
            levels_r[r] = level
        alive = lim
        derived.append(sorted(idx[reps[r]] for r in np.nonzero(alive)[0]))
        level += 1
    kernel_pos = {reps[r] for r in np.nonzero(alive)[0]}
    levels = {}
    kernel = set()
    for a, i in enumerate(idx):
        r = reps.index(rep[a])
        levels[i] = levels_r[r]
        if rep[a] in kernel_pos:
            kernel.add(i)
    lv_key = lambda a: (levels[idx[a]] if levels[idx[a]] is not None else math.inf, idx[a])
    ell = _kahn(idx, proper, key=lv_key)
    return LevelMap(levels, frozenset(kernel), rank, ell, derived)


# ---------------------------------------------------------------------------
# Towers


@dataclass
class TowerReport:
    sequence: list
    terminal: int
    B_sets: dict
    verdict: str  # verified-at-horizon | refuted | inconclusive
    witness: Optional[str]
    max_upper_density_estimate: Optional[Fraction]
    densities: list
    horizon: int
    beyond: int = 0  # terminal members below the horizon fixed after the sequence
    uncovered: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "format": "limitgen-tower-report",
            "version": 1,
            "sequence": self.sequence,
            "terminal": self.terminal,
            "horizon": self.horizon,
            "verdict": self.verdict,
            "witness": self.witness,
            "max_upper_density_estimate": None if self.max_upper_density_estimate is None else str(self.max_upper_density_estimate),
            "densities": [str(d) for d in self.densities],
            "B_sizes": {str(k): len(v) for k, v in self.B_sets.items()},
            "B_head": {str(k): v[:8] for k, v in self.B_sets.items()},
            "beyond_sequence": self.beyond,
            "uncovered": self.uncovered[:32],
        }


def _terminal_members(family: Family, terminal: int, horizon: int) -> list:
    n = family.count(terminal, horizon)
    return family.nth_many(terminal, np.arange(1, n + 1, dtype=np.int64)) if n else []


def _density_estimates(family: Family, seq: Sequence[int], terminal: int, horizon: int) -> list:
    n = min(horizon, max(2, family.count(terminal, horizon)))
    out = []
    for lam in seq:
        prof = language_profile(family, lam, terminal, n)
        out.append(tail_extrema(prof, max(1, n // 2)).upper_est)
    return out


def finite_tail_sets(family: Family, seq: Sequence[int], members: list) -> tuple:
    """B_k from finite tail intersections over the given strings; also the tails."""
    arr = np.asarray(members, dtype=np.int64) if members and members[-1] < SMALL else members
    mem = np.stack([family.member_strings(lam, arr) for lam in seq]) if members else np.zeros((len(seq), 0), bool)
    tails = np.logical_and.accumulate(mem[::-1], axis=0)[::-1]
    B = {}
    prev = np.zeros(len(members), dtype=bool)
    for k in range(len(seq)):
        cur = tails[k]
        B[k + 1] = [members[x] for x in np.nonzero(cur & ~prev)[0]]
        prev = cur
    return B, tails


def verify_tower(family: Family, seq: Sequence[int], terminal: int, horizon: int) -> TowerReport:
    seq = [family.check_index(i) for i in seq]
    terminal = family.check_index(terminal)
    if len(seq) < 2:
        raise TopologyError("a tower sequence needs at least two languages")

    def refuted(why):
        return TowerReport(seq, terminal, {}, "refuted", why, None, [], horizon)

    why = family.tower_refutation(seq, terminal)
    if why is not None:
        return refuted(why)
    for k, lam in enumerate(seq, 1):
        if family.compare_code(lam, terminal) != SUB:
            return refuted(f"Λ_{k} (language {lam}) is not a proper subset of the terminal")
    for k in range(1, len(seq)):
        if family.compare_code(seq[k], seq[k - 1]) in (SUB, EQ):
            return refuted(f"Λ_{k + 1} ⊆ Λ_{k}, so B_{k + 1} is empty")

    members = _terminal_members(family, terminal, horizon)
    tower = family.tower_for(terminal)
    m = len(seq)
    beyond = 0
    uncovered: list = []
    if tower is not None and seq == tower.prefix(m):
        B = {k: [] for k in range(1, m + 1)}
        for x in members:
            b = tower.b_index(x)
            if b <= m:
                B[b].append(x)
            else:
                beyond += 1
        ok = all(B[k] for k in B)
    else:
        B, tails = finite_tail_sets(family, seq, members)
        last = tails[-1] if len(members) else np.zeros(0, bool)
        cover = int(np.argmin(last)) if len(last) and not last.all() else len(last)
        uncovered = [members[x] for x in np.nonzero(~last)[0]]
        ok = all(B[k] for k in B) and cover >= m
    dens = _density_estimates(family, seq, terminal, horizon)
    verdict = "verified-at-horizon" if ok else "inconclusive"
    return TowerReport(seq, terminal, B, verdict, None, max(dens), dens, horizon, beyond, uncovered)


def extract_tower(
    family: Family,
    feasible_seq: Sequence[tuple],
    terminal: int,
    horizon: int,
    enumeration: Optional[Sequence[int]] = None,
) -> list:
    """Prune a feasible sequence of (step, index) pairs into a verified tower."""
    if not feasible_seq:
        raise FeasibilityError("empty feasible sequence")
    steps = [int(t) for t, _ in feasible_seq]
    if any(b <= a for a, b in zip(steps, steps[1:])) or steps[0] < 1:
        raise FeasibilityError("steps must be positive and strictly increasing")
    for t, J in feasible_seq:
        if family.compare_code(family.check_index(J), terminal) != SUB:
            raise FeasibilityError(f"language {J} is not a proper subset of the terminal")
    if enumeration is None:
        enumeration = family.nth_many(terminal, np.arange(1, max(steps[-1], horizon) + 1, dtype=np.int64))
    enumeration = list(enumeration)
    if len(enumeration) < steps[-1]:
        raise FeasibilityError("enumeration shorter than the last step")
    for t, J in feasible_seq:
        if not family.member_strings(J, enumeration[:t]).all():
            raise FeasibilityError(f"language {J} misses part of the enumeration prefix at step {t}")

    # Distinct languages: each next one contains the first string the previous misses.
    chosen = [0]
    while True:
        cur = feasible_seq[chosen[-1]][1]
        flags = family.member_strings(cur, enumeration)
        miss = np.nonzero(~flags)[0]
        if len(miss) == 0:
            break
        t_next = int(miss[0]) + 1
        nxt = next((k for k in range(chosen[-1] + 1, len(feasible_seq)) if feasible_seq[k][0] >= t_next), None)
        if nxt is None:
            break
        chosen.append(nxt)
    seq = [feasible_seq[k][1] for k in chosen]
    if len(seq) < 2:
        raise TopologyError("extraction inconclusive at horizon: fewer than two distinct languages")

    # Keep one language per stretch on which the finite unions D_i stay fixed.
    members = _terminal_members(family, terminal, horizon)
    _, tails = finite_tail_sets(family, seq, members)
    starts = [0] + [k for k in range(1, len(seq)) if (tails[k] != tails[k - 1]).any()]
    result = []
    for s, a in enumerate(starts):
        if s + 1 < len(starts):
            b = starts[s + 1]
            fresh = np.nonzero(tails[b] & ~tails[a])[0]
            w = members[int(fresh[0])]
            pick = next(seq[k] for k in range(a, b) if not family.member(seq[k], w))
            result.append(pick)
        else:
            result.append(seq[-1])
    out = []
    for lam in result:
        if not out or lam != out[-1]:
            out.append(lam)
    if len(out) < 2:
        raise TopologyError("extraction inconclusive at horizon: fewer than two languages survive pruning")
    report = verify_tower(family, out, terminal, horizon)
    if report.verdict != "verified-at-horizon":
        raise TopologyError(f"extraction inconclusive at horizon ({report.verdict})")
    return out


@dataclass
class TruthEstimate:
    value: Fraction
    inconclusive: bool
    witness: Optional[str] = None
    tower: list = field(default_factory=list)
    source: str = ""

    def __float__(self):
        return float(self.value)


def estimate_truth_index(
    family: Family, terminal: int, search_depth: int = 8, horizon: int = 10000, pool: Optional[int] = None
) -> TruthEstimate:
    """Smallest found max-density over towers to ``terminal``; 1 if none is found."""
    why = family.tower_refutation(None, terminal)
    if why is not None:
        return TruthEstimate(Fraction(1), False, why, [], "refutation")
    tower = family.tower_for(terminal)
    best: Optional[TruthEstimate] = None
    if tower is not None:
        seq = tower.prefix(max(2, search_depth))
        rep = verify_tower(family, seq, terminal, horizon)
        if rep.verdict == "verified-at-horizon":
            best = TruthEstimate(rep.max_upper_density_estimate, False, None, seq, "declared tower")
    greedy = _greedy_tower(family, terminal, max(2, search_depth), horizon, pool or 16 * search_depth)
    if greedy is not None:
        rep = verify_tower(family, greedy, terminal, horizon)
        if rep.verdict == "verified-at-horizon":
            est = TruthEstimate(rep.max_upper_density_estimate, False, None, greedy, "greedy tower")
            if best is None or est.value < best.value:
                best = est
    if best is None:
        return TruthEstimate(Fraction(1), True, None, [], "no tower found")
    return best


def _greedy_tower(family: Family, terminal: int, depth: int, horizon: int, pool: int) -> Optional[list]:
    idx = Restriction(pool, horizon).indices(family)
    cands = [i for i in idx if i != terminal and family.compare_code(i, terminal) == SUB]
    if not cands:
        return None
    members = _terminal_members(family, terminal, horizon)
    if not members:
        return None
    arr = np.asarray(members, dtype=np.int64) if members[-1] < SMALL else members
    flags = {i: family.member_strings(i, arr) for i in cands}
    lead = {i: (int(np.argmin(f)) if not f.all() else len(f)) for i, f in flags.items()}
    n = len(members)
    dens = {i: Fraction(int(f[n // 2 :].sum()), max(1, n - n // 2)) for i, f in flags.items()}

    def options(seq, need):
        prev = seq[-1] if seq else None
        out = [
            i
            for i in cands
            if i not in seq
            and lead[i] >= need
            and (prev is None or (flags[i] & ~flags[prev]).any())
        ]
        return sorted(out, key=lambda i: (dens[i], i))

    def search(seq, need, budget):
        if len(seq) == depth:
            return seq
        for k, i in enumerate(options(seq, need)):
            if k > 0 and budget == 0:
                break
            got = search(seq + [i], max(need + 1, lead[i]), budget - (1 if k > 0 else 0))
            if got is not None:
                return got
        return None

    return search([], 1, 3)
