"""Generation algorithms as step functions over an adversary's string stream.

Each generator owns a chain tracker over the strings it has seen and a record
of every used string (the adversary's and its own). ``step(w)`` consumes the
next adversary string and returns a ``GeneratorDecision``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .chain import ChainTracker, CriticalChain, h_index
from .families import EQ, SMALL, SUB, SUP, Family
from .usedset import UsedSet


class GeneratorError(RuntimeError):
    pass


class LevelError(GeneratorError):
    pass


@dataclass(frozen=True)
class GeneratorDecision:
    guessed_index: Optional[int]
    output: int
    event: str = "none"  # none | rich | refresh | fallback
    target: Optional[int] = None
    token: Optional[int] = None
    chain_len: int = 0
    s_size: int = 0
    truncated: bool = False

    def record(self) -> dict:
        return {
            "i": self.guessed_index,
            "o": self.output,
            "event": self.event,
            "target": self.target,
            "token": self.token,
            "chain_len": self.chain_len,
            "s_size": self.s_size,
            "truncated": self.truncated,
        }


def element_pick(family: Family, i: int, used) -> int:
    """Smallest member of L_i not in ``used``."""
    x = family.nth(i, 1)
    while x in used:
        x = family.next_member(i, x + 1)
    return x


class Board:
    """Used strings plus a cursor per language for fast smallest-unused queries."""

    def __init__(self, family: Family):
        self.family = family
        self.used = UsedSet()
        self.max_used = -1
        self._cursor: dict = {}
        self._arr = np.zeros(256, dtype=np.int64)
        self._n = 0
        self.listeners: list = []
        self.low = family.universe_min  # every string below this is used

    def add(self, x: int) -> None:
        if x in self.used:
            return
        self.used.add(x)
        for fn in self.listeners:
            fn(x)
        if x > self.max_used:
            self.max_used = x
        while self.low in self.used:
            self.low += 1
        if x < SMALL:
            if self._n == len(self._arr):
                self._arr = np.concatenate([self._arr, np.zeros(len(self._arr), dtype=np.int64)])
            self._arr[self._n] = x
            self._n += 1

    def used_array(self) -> np.ndarray:
        return self._arr[: self._n]

    def next_unused(self, i: int) -> int:
        fam = self.family
        x = self._cursor.get(i)
        if x is None or x < self.low:
            x = fam.next_member(i, self.low)
        hops = 0
        while x in self.used:
            hops += 1
            if hops > 16:
                # Scattered used members: scan ranks in batches instead.
                x = self.unused_members(i, x, None, 1)[0]
                break
            x = fam.next_member(i, self.free_from(x))
        self._cursor[i] = x
        return x

    def free_from(self, x: int) -> int:
        """Smallest unused string >= x."""
        return self.used.free_from(x)

    def unused_members(self, i: int, lo: int, hi: Optional[int], limit: int) -> list:
        """Up to ``limit`` smallest unused members of L_i in [lo, hi]."""
        fam = self.family
        out: list = []
        r = fam.count(i, lo - 1) + 1
        r_hi = fam.count(i, hi) if hi is not None else None
        batch = max(64, limit)
        while len(out) < limit and (r_hi is None or r <= r_hi):
            stop = r + batch - 1 if r_hi is None else min(r + batch - 1, r_hi)
            if stop < SMALL:
                vals = fam.nth_many(i, np.arange(r, stop + 1, dtype=np.int64))
            else:
                vals = [fam.nth(i, q) for q in range(r, stop + 1)]
            used = self.used
            out.extend(itertools.islice((v for v in vals if v not in used), limit - len(out)))
            r = stop + 1
            batch *= 2
        return out


class FallbackList:
    """The ordered set S of strings queued for priority output."""

    def __init__(self, board: Board):
        self.board = board
        self._vals: list = []
        self._head = 0
        self._live: set = set()
        self.truncated = False
        board.listeners.append(self._live.discard)

    def add(self, values: list) -> None:
        used = self.board.used
        fresh = [v for v in values if v not in used and v not in self._live]
        if not fresh:
            return
        self._live.update(fresh)
        kept = [v for v in self._vals[self._head :] if v in self._live]
        self._vals = sorted(set(kept).union(fresh))
        self._head = 0

    def peek(self) -> Optional[int]:
        live = self._live
        while self._head < len(self._vals) and self._vals[self._head] not in live:
            self._head += 1
        return self._vals[self._head] if self._head < len(self._vals) else None

    def size(self) -> int:
        return len(self._live)

    def __contains__(self, x) -> bool:
        return x in self._live


# ---------------------------------------------------------------------------


class Generator:
    """Shared plumbing: sample tracking, chain maintenance and used strings."""

    kind = "abstract"

    def __init__(self, family: Family, horizon: Optional[int] = None, floor: int = 64):
        self.family = family
        self.horizon = horizon
        self.tracker = ChainTracker(family, floor)
        self.board = Board(family)
        self.t = 0
        self.prev_chain: Optional[CriticalChain] = None
        self.chain: Optional[CriticalChain] = None

    def step(self, w: int) -> GeneratorDecision:
        self.t += 1
        self.board.add(w)
        self.prev_chain = self.chain
        self.chain = self.tracker.observe(w)
        dec = self.decide(w)
        if dec.output in self.board.used:
            raise GeneratorError(f"generator {self.kind} repeated string {dec.output}")
        self.board.add(dec.output)
        return dec

    def decide(self, w: int) -> GeneratorDecision:
        raise NotImplementedError

    def pick(self, i: int) -> int:
        return self.board.next_unused(i)


class KMGenerator(Generator):
    """Guess the deepest chain entry whose index is at most t."""

    kind = "km"

    def decide(self, w):
        ch = self.chain
        i = ch.at(h_index(ch, self.t))
        return GeneratorDecision(i, self.pick(i), chain_len=len(ch), truncated=ch.truncated)


def acc_index(family: Family, prev: Optional[CriticalChain], t: int, w: int) -> tuple:
    """The index chosen by the accuracy algorithm at step t, and its case label."""
    if prev is None or t == 1:
        return family.first_index, "initial"
    idx = np.asarray(prev.indices, dtype=np.int64)
    inside = family.member_many(idx, w)
    if inside.all():
        return prev.at(h_index(prev, t - 1)), "a"
    k = 0
    while k < len(inside) and inside[k]:
        k += 1
    if k == 0:
        return prev.at(h_index(prev, t - 1)), "edge"
    return prev.at(k), "b"


class AccGenerator(Generator):
    """Guess via the previous chain; stays accurate infinitely often."""

    kind = "acc"

    def __init__(self, family, horizon=None, floor=64):
        super().__init__(family, horizon, floor)
        self.last_case = None

    def acc(self, w) -> int:
        i, self.last_case = acc_index(self.family, self.prev_chain, self.t, w)
        return i

    def decide(self, w):
        i = self.acc(w)
        return GeneratorDecision(i, self.pick(i), chain_len=len(self.chain), truncated=self.chain.truncated)


class LazyGenerator(AccGenerator):
    """Tracks the accuracy stream and, after a rich index, fills the rich
    language until the ordered density of all outputs there reaches c/2."""

    kind = "lazy"

    def __init__(self, family, horizon=None, floor=64, c: Fraction = Fraction(9, 10)):
        super().__init__(family, horizon, floor)
        c = Fraction(c)
        if not (0 < c < 1):
            raise GeneratorError("density target c must lie in (0, 1)")
        self.c = c
        self.history: list = []  # (t, acc index, rich flag)
        self.prev_acc: Optional[int] = None
        self.mode = "tracking"
        self.target: Optional[int] = None
        self.target_t = 0
        self.outputs: list = []
        self._od_count = 0
        self._od_rank = 0

    def _reset_density(self, target: int):
        fam = self.family
        outs = self.outputs
        if outs and max(outs) < SMALL:
            flags = fam.member_strings(target, np.asarray(outs, dtype=np.int64))
            inside = [o for o, f in zip(outs, flags.tolist()) if f]
        else:
            inside = [o for o in outs if fam.member(target, o)]
        self._od_count = len(inside)
        self._od_rank = fam.count(target, max(inside)) if inside else 0

    def _ordered_density_ok(self) -> bool:
        if self._od_count == 0:
            return False
        return Fraction(self._od_count, self._od_rank) >= self.c / 2

    def _set_target(self, target: int, t: int):
        self.mode = "lazy"
        self.target, self.target_t = target, t
        self._reset_density(target)

    def decide(self, w):
        fam = self.family
        t = self.t
        i = self.acc(w)
        rich = self.prev_acc is not None and i != self.prev_acc and fam.compare_code(i, self.prev_acc) == SUP
        self.history.append((t, i, rich))
        self.prev_acc = i
        event, guess = "none", i
        if self.mode == "tracking":
            if rich:
                self._set_target(i, t)
                event = "rich"
            guess = i
        else:
            while self.mode == "lazy" and self._ordered_density_ok():
                event = "refresh"
                missed = [h for h in self.history if h[0] > self.target_t]
                riches = [h for h in missed if h[2]]
                if not riches:
                    self.mode = "tracking"
                    self.target = None
                    break
                maximal = [
                    h
                    for h in riches
                    if not any(fam.compare_code(g[1], h[1]) == SUP for g in riches if g[1] != h[1])
                ]
                best = max(maximal, key=lambda h: h[0])
                self._set_target(best[1], best[0])
            guess = i if self.mode == "tracking" else self.target
        o = self.pick(guess)
        self.outputs.append(o)
        if self.mode == "lazy" and fam.member(self.target, o):
            self._od_count += 1
            self._od_rank = max(self._od_rank, fam.count(self.target, o))
        return GeneratorDecision(
            guess, o, event, target=self.target if self.mode == "lazy" else None,
            chain_len=len(self.chain), truncated=self.chain.truncated,
        )


# ---------------------------------------------------------------------------
# Fallback algorithms


def _positions(chain: Optional[CriticalChain], a: int, b: int):
    if chain is None:
        return None
    pa, pb = chain.position_of(a), chain.position_of(b)
    if pa is None or pb is None:
        return None
    return pa, pb


class _FallbackBase(AccGenerator):
    def __init__(self, family, horizon=None, floor=64, levels: Optional[Callable[[int], object]] = None):
        super().__init__(family, horizon, floor)
        self.levels = levels or family.declared_level
        self.S = FallbackList(self.board)
        self.ga_prev: Optional[int] = None
        self.anc_prev: list = []
        self.prev_t_chain: Optional[CriticalChain] = None

    def level(self, i: int):
        v = self.levels(i)
        if v is None:
            raise LevelError(f"level map missing an active index {i}")
        return v

    def _cap(self) -> Optional[int]:
        if self.horizon is None:
            return None
        return 2 * (self.horizon - self.t + 1) + 2

    def _charge(self, z: int, bound: int, extra: int = 0):
        """Queue unused members of L_z up to ``bound`` plus ``extra`` more above it."""
        limit = self._cap()
        lo = self.board.next_unused(z)
        if limit is None:
            vals = self.board.unused_members(z, lo, bound, 1 << 62)
        else:
            vals = self.board.unused_members(z, lo, bound, limit)
            if len(vals) >= limit:
                self.S.truncated = True
        if extra:
            vals += self.board.unused_members(z, bound + 1, None, extra)
        self.S.add(vals)

    def _anchor(self, z: int) -> int:
        """w′: the least member of L_z above every used string."""
        return self.family.next_member(z, self.board.max_used + 1)

    def _min_output(self, ga: int) -> int:
        s = self.S.peek()
        g = self.pick(ga)
        return s if s is not None and s < g else g

    def _ancestors(self, ga: int, chain: CriticalChain) -> list:
        raise NotImplementedError

    def _mca(self, a_prev: list, a_cur: list) -> Optional[int]:
        """Minimal language common to both ancestor-or-self lists."""
        fam = self.family
        common = [x for x in a_cur if any(x == y or fam.compare_code(x, y) == EQ for y in a_prev)]
        if not common:
            return None
        common = sorted(set(common))
        minimal = [x for x in common if not any(y != x and fam.compare_code(y, x) == SUB for y in common)]
        return min(minimal)


class FallbackFiniteGenerator(_FallbackBase):
    """Fallback algorithm driven by Cantor-Bendixson levels."""

    kind = "fallback-finite"

    def _ancestors(self, ga, chain):
        fam = self.family
        out = [ga]
        cur = ga
        idx = np.asarray(chain.indices, dtype=np.int64)
        while True:
            rel = fam.compare_many(cur, idx)
            lv = self.level(cur)
            cands = [int(e) for e, r in zip(idx, rel) if r == SUB and self.level(int(e)) > lv]
            if not cands:
                return out
            if chain.truncated and cands[-1] == chain.indices[-1] and len(cands) >= self.t:
                parent = cands[self.t - 1]
            else:
                parent = cands[-1]
            out.append(parent)
            cur = parent

    def decide(self, w):
        fam = self.family
        ga = self.acc(w)
        anc = self._ancestors(ga, self.chain)
        event, target = "none", None
        if self.ga_prev is not None and not (ga == self.ga_prev or fam.compare_code(ga, self.ga_prev) == EQ):
            if fam.compare_code(ga, self.ga_prev) == SUB and self.level(ga) != self.level(self.ga_prev):
                target = ga
            else:
                target = self._mca(self.anc_prev, anc)
        if target is not None:
            event = "fallback"
            w1 = self._anchor(target)
            self._charge(target, fam.next_member(target, w1 + 1))
        self.ga_prev, self.anc_prev = ga, anc
        o = self._min_output(ga)
        return GeneratorDecision(
            ga, o, event, target=target, chain_len=len(self.chain),
            s_size=self.S.size(), truncated=self.chain.truncated or self.S.truncated,
        )


class FallbackGeneralGenerator(_FallbackBase):
    """Fallback algorithm driven by a linear extension of proper inclusion."""

    kind = "fallback-general"

    def __init__(self, family, horizon=None, floor=64, levels=None):
        super().__init__(family, horizon, floor, levels=levels or family.declared_ell)
        self.token = 0

    def _ancestors(self, ga, chain):
        fam = self.family
        idx = np.asarray(chain.indices, dtype=np.int64)
        rel = fam.compare_many(ga, idx)
        lv = self.level(ga)
        out = [ga]
        for e, r in zip(idx, rel):
            if r == SUB:
                le = self.level(int(e))
                if le <= lv:
                    raise LevelError(f"level map violates inclusion: {ga} ⊊ {int(e)} but ℓ is not smaller")
                out.append(int(e))
        return out

    def _token(self, chain, upper, lower) -> int:
        pos = _positions(chain, upper, lower)
        if pos is None:
            return 2
        return max(2, 2 * (pos[1] - pos[0]))

    def decide(self, w):
        fam = self.family
        ga = self.acc(w)
        anc = self._ancestors(ga, self.chain)
        target = None
        prev = self.ga_prev
        if prev is not None and not (ga == prev or fam.compare_code(ga, prev) == EQ):
            rel = fam.compare_code(ga, prev)
            if rel == SUB:
                target = prev
                chain = self.prev_chain if _positions(self.prev_chain, prev, ga) else self.chain
                self.token = self._token(chain, prev, ga)
            elif rel == SUP:
                target, self.token = ga, 2
            else:
                target = self._mca(self.anc_prev, anc)
                if target is not None:
                    self.token = self._token(self.chain, target, ga)
        self.ga_prev, self.anc_prev = ga, anc
        if target is None:
            o = self._min_output(ga)
            event = "none"
        else:
            w1 = self._anchor(target)
            self._charge(target, w1, extra=self.token)
            o = self.S.peek()
            if o is None:
                o = self.pick(target)
            event = "fallback"
        return GeneratorDecision(
            ga, o, event, target=target, token=self.token if target is not None else None,
            chain_len=len(self.chain), s_size=self.S.size(), truncated=self.chain.truncated or self.S.truncated,
        )


class ThresholdGenerator(Generator):
    """Aggressive scheme: trust the smallest consistent language and, once the
    adversary passes the current threshold, output its members above w."""

    kind = "threshold"

    def __init__(self, family, horizon=None, floor=64, base: int = 10):
        super().__init__(family, horizon, floor)
        self.base = base

    def schedule(self, k: int) -> int:
        return self.base * 2**k

    def decide(self, w):
        i = self.chain.at(1)
        pos = i - self.family.first_index + 1
        if w <= self.schedule(pos):
            o = self.pick(i)
        else:
            o = self.family.next_member(i, w + 1)
            while o in self.board.used:
                o = self.family.next_member(i, o + 1)
        return GeneratorDecision(i, o, chain_len=len(self.chain), truncated=self.chain.truncated)


GENERATORS = {
    "km": KMGenerator,
    "acc": AccGenerator,
    "lazy": LazyGenerator,
    "fallback-finite": FallbackFiniteGenerator,
    "fallback-general": FallbackGeneralGenerator,
    "threshold": ThresholdGenerator,
}


def make_generator(kind: str, family: Family, horizon: Optional[int] = None, **params) -> Generator:
    try:
        cls = GENERATORS[kind]
    except KeyError:
        raise GeneratorError(f"unknown generator {kind!r}; expected one of {', '.join(GENERATORS)}") from None
    return cls(family, horizon=horizon, **params)


# Step-function views over the stateful generators.


def _stepper(state: Generator, w: int):
    return state, state.step(w)


km_step = acc_step = lazy_step = fallback_finite_step = fallback_general_step = _stepper
