"""Adversaries that enumerate every member of the true language K."""

from __future__ import annotations

import heapq
import random
from pathlib import Path
from typing import Optional


from .families import Family
from .usedset import Cursor, Union, UsedSet


class AdversaryError(ValueError):
    pass


class Adversary:
    kind = "abstract"

    def __init__(self, family: Family, K: int):
        self.family = family
        self.K = family.check_index(K)
        self.emitted = UsedSet()
        self.t = 0

    def emit(self, last_output: Optional[int] = None) -> int:
        """Next string; ``last_output`` is the algorithm's previous output."""
        self.t += 1
        w = self._next(last_output)
        if w in self.emitted:
            raise AdversaryError(f"{self.kind} adversary repeated {w}")
        self.emitted.add(w)
        return w

    def _next(self, last_output):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class StraightAdversary(Adversary):
    """Members of K in increasing order."""

    kind = "straight"

    def __init__(self, family, K):
        super().__init__(family, K)
        self._cur = Cursor(family, self.K)

    def _next(self, last_output):
        return self._cur.next_not_in(self.emitted)


class GreedyLowestAdversary(Adversary):
    """Least member of K that neither side has used.

    Every ``backfill`` steps it instead emits the least member of K it has not
    emitted itself, so members taken by the algorithm are still enumerated.
    """

    kind = "greedy-lowest"

    def __init__(self, family, K, backfill: int = 10):
        super().__init__(family, K)
        if backfill is not None and backfill < 1:
            raise AdversaryError("backfill period must be >= 1")
        self.backfill = backfill
        self.taken = UsedSet()
        self._free = Cursor(family, self.K)
        self._own = Cursor(family, self.K)

    def _next(self, last_output):
        if last_output is not None:
            self.taken.add(last_output)
        if self.backfill and self.t % self.backfill == 0:
            w = self._own.next_not_in(self.emitted)
        else:
            w = self._free.next_not_in(self.taken)
        self.taken.add(w)
        return w

    def describe(self):
        return {"kind": self.kind, "backfill": self.backfill}


class TowerPretenderAdversary(Adversary):
    """Pretends the truth is the current tower language Λ_j.

    Switches to a later Λ once ``window`` consecutive algorithm outputs land in
    Λ_j, or after ``max_dwell`` steps without a switch.
    """

    kind = "tower-pretender"

    def __init__(self, family, K, window: int = 25, max_dwell: Optional[int] = 1000):
        super().__init__(family, K)
        tower = family.tower_for(self.K)
        if tower is None:
            raise AdversaryError(f"no declared tower for language {self.K} of {family.spec}")
        if window < 1:
            raise AdversaryError("stabilization window must be >= 1")
        if max_dwell is not None and max_dwell < 1:
            raise AdversaryError("max_dwell must be >= 1")
        if not tower.nested and tower.finite_block is None:
            raise AdversaryError("tower pretender needs a nested tower or finite fixing sets")
        self.tower = tower
        self.window, self.max_dwell = window, max_dwell
        self.case = 2 if tower.b1_infinite else 1
        self.max_b = 1
        self.switches = 0
        self._blocks = 0
        self._u_set: set = set()
        self._u_heap: list = []
        self._enter(1)

    def _enter(self, j: int):
        self.j = j
        self.lam = self.tower.index_of(j)
        self.stable = 0
        self.dwell = 0
        self.toggle = 0
        self._lam_cursor = Cursor(self.family, self.lam)
        if self.case == 1:
            # B_1 ∪ ... ∪ B_j only grows, so add the new blocks to a heap
            for k in range(self._blocks + 1, j + 1):
                for x in self.tower.finite_block(k):
                    if x not in self._u_set:
                        self._u_set.add(x)
                        heapq.heappush(self._u_heap, x)
            self._blocks = max(self._blocks, j)

    def _u_candidate(self) -> Optional[int]:
        if self.tower.nested:
            return self._lam_cursor.next_not_in(self.emitted)
        heap = self._u_heap
        while heap and heap[0] in self.emitted:
            heapq.heappop(heap)
        return heap[0] if heap else None

    def _r_candidate(self) -> Optional[int]:
        if self.tower.nested:
            return None
        skip = Union(self.emitted, self._u_set)
        return self._lam_cursor.next_not_in(skip)

    def _next(self, last_output):
        if last_output is not None:
            if self.family.member(self.lam, last_output):
                self.stable += 1
            else:
                self.stable = 0
        if self.t > 1 and (self.stable >= self.window or (self.max_dwell is not None and self.dwell >= self.max_dwell)):
            self.switches += 1
            self._enter(max(self.j + 1, self.max_b))
        self.dwell += 1
        u = self._u_candidate()
        if self.case == 1:
            w = u if u is not None else self._r_candidate()
        else:
            r = self._r_candidate()
            if u is None or (r is not None and self.toggle == 1):
                w = r
            else:
                w = u
            self.toggle ^= 1
        self.max_b = max(self.max_b, self.tower.b_index(w))
        return w

    def describe(self):
        return {"kind": self.kind, "window": self.window, "max_dwell": self.max_dwell, "case": self.case}


def read_script(path) -> list:
    """Newline-separated integers; '#' starts a comment."""
    out = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise AdversaryError(f"cannot read script {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise AdversaryError(f"script line {n}: {line!r} is not an integer") from None
    return out


class ScriptedAdversary(Adversary):
    """Replays a fixed list of strings, then continues straight enumeration."""

    kind = "scripted"

    def __init__(self, family, K, script=None, path=None):
        super().__init__(family, K)
        if script is None:
            script = read_script(path) if path is not None else []
        seen = set()
        for x in script:
            if x in seen:
                raise AdversaryError(f"script repeats {x}")
            if not family.member(self.K, x):
                raise AdversaryError(f"script string {x} is not a member of the true language")
            seen.add(x)
        self.script = list(script)
        self.path = path
        self._pos = 0
        self._cur = Cursor(family, self.K)

    def _next(self, last_output):
        if self._pos < len(self.script):
            self._pos += 1
            return self.script[self._pos - 1]
        return self._cur.next_not_in(self.emitted)

    def describe(self):
        return {"kind": self.kind, "script": str(self.path) if self.path else None, "length": len(self.script)}


def shuffled_blocks(family: Family, K: int, seed: int, block: int = 64):
    """Endless enumeration of K, shuffled within consecutive blocks of ranks."""
    rng = random.Random(seed)
    r = 1
    while True:
        chunk = [family.nth(K, n) for n in range(r, r + block)]
        rng.shuffle(chunk)
        yield from chunk
        r += block


class ShuffledAdversary(Adversary):
    kind = "shuffled"

    def __init__(self, family, K, seed: int = 0, block: int = 64):
        super().__init__(family, K)
        self.seed, self.block = seed, block
        self._it = shuffled_blocks(family, self.K, seed, block)

    def _next(self, last_output):
        return next(self._it)

    def describe(self):
        return {"kind": self.kind, "seed": self.seed, "block": self.block}


ADVERSARIES = {
    "straight": StraightAdversary,
    "greedy-lowest": GreedyLowestAdversary,
    "tower-pretender": TowerPretenderAdversary,
    "scripted": ScriptedAdversary,
    "shuffled": ShuffledAdversary,
}


def make_adversary(kind: str, family: Family, K: int, **params) -> Adversary:
    try:
        cls = ADVERSARIES[kind]
    except KeyError:
        raise AdversaryError(f"unknown adversary {kind!r}; expected one of {', '.join(ADVERSARIES)}") from None
    return cls(family, K, **params)


def _stepper(state: Adversary, last_output=None):
    return state, state.emit(last_output)


def straight_step(state):
    return _stepper(state)


greedy_lowest_step = tower_pretender_step = _stepper


def scripted_step(state):
    return _stepper(state)
