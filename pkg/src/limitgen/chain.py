"""Consistency and strictly critical chains over a scan window of the listing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .families import SMALL, SUB, Family

DEFAULT_FLOOR = 64


def scan_horizon(t: int, floor: int = DEFAULT_FLOOR) -> int:
    return max(t, floor)


@dataclass
class Sample:
    """Strings seen so far, in arrival order."""

    strings: list = field(default_factory=list)

    def __post_init__(self):
        self._set = set(self.strings)
        if len(self._set) != len(self.strings):
            raise ValueError("sample strings must be distinct")

    def add(self, w: int) -> None:
        if w in self._set:
            raise ValueError(f"string {w} already in sample")
        self.strings.append(w)
        self._set.add(w)

    def __contains__(self, w) -> bool:
        return w in self._set

    def __len__(self) -> int:
        return len(self.strings)

    def as_set(self) -> frozenset:
        return frozenset(self._set)


@dataclass(frozen=True)
class CriticalChain:
    """Strictly critical indices, shallowest first. Positions start at 1."""

    indices: tuple
    truncation_horizon: int
    truncated: bool = False

    @property
    def entries(self) -> list:
        return [(p + 1, i) for p, i in enumerate(self.indices)]

    def __len__(self) -> int:
        return len(self.indices)

    def at(self, position: int) -> int:
        return self.indices[position - 1]

    def position_of(self, index: int) -> Optional[int]:
        try:
            return self.indices.index(index) + 1
        except ValueError:
            return None


def _strings_array(strings):
    if strings and max(strings) >= SMALL:
        return list(strings)
    return np.asarray(strings, dtype=np.int64)


def consistent(family: Family, i: int, sample) -> bool:
    strings = list(sample.strings if isinstance(sample, Sample) else sample)
    if not strings:
        return True
    return bool(family.member_strings(i, _strings_array(strings)).all())


def _window_end(family: Family, horizon: int) -> int:
    end = family.first_index + horizon
    if family.size is not None:
        end = min(end, family.first_index + family.size)
    return end


def _strict_chain(family: Family, alive: np.ndarray) -> list:
    """Strictly critical members of the sorted consistent index array."""
    if len(alive) == 0:
        return []
    chain = [int(alive[0])]
    pos = 0
    n = len(alive)
    while True:
        last = chain[-1]
        rest = alive[pos + 1 :]
        if len(rest) == 0:
            return chain
        rel = family.compare_many(last, rest)
        # Candidates are proper subsets of the last entry.
        cand = np.nonzero(rel == 2)[0]
        found = False
        for c in cand:
            j = int(rest[c])
            between = rest[:c]
            if len(between) == 0 or (family.compare_many(j, between) == SUB).all():
                chain.append(j)
                pos = pos + 1 + int(c)
                found = True
                break
        if not found or pos >= n - 1:
            return chain


def critical_chain(family: Family, sample, t: int, floor: int = DEFAULT_FLOOR) -> CriticalChain:
    """Strictly critical languages among the first H(t) of the listing."""
    strings = list(sample.strings if isinstance(sample, Sample) else sample)
    end = _window_end(family, scan_horizon(t, floor))
    idx = np.arange(family.first_index, end, dtype=np.int64)
    arr = _strings_array(strings)
    keep = np.fromiter((bool(family.member_strings(int(i), arr).all()) for i in idx), dtype=bool, count=len(idx))
    chain = _strict_chain(family, idx[keep])
    return CriticalChain(tuple(chain), end - family.first_index, _is_truncated(family, chain, end))


def _is_truncated(family: Family, chain: list, end: int) -> bool:
    return family.size is None and bool(chain) and chain[-1] == end - 1


def h_index(chain: CriticalChain, t: int) -> int:
    """Deepest position whose index is <= t, or 1 when none is."""
    best = 1
    for p, i in enumerate(chain.indices, start=1):
        if i <= t:
            best = p
    return best


class ChainTracker:
    """Incremental version of ``critical_chain`` for a growing sample.

    Keeps the sorted array of consistent indices within the window. When no
    consistent language dies, existing entries stay strictly critical and only
    newly scanned indices need checking.
    """

    def __init__(self, family: Family, floor: int = DEFAULT_FLOOR):
        self.family = family
        self.floor = floor
        self.t = 0
        self.sample = Sample()
        self._small = np.zeros(64, dtype=np.int64)
        self._n_small = 0
        self._big: list = []
        self._keys = np.zeros(64, dtype=np.int64)
        self._encodable = True
        self.window_end = family.first_index
        self.alive = np.zeros(0, dtype=np.int64)
        self.chain: Optional[CriticalChain] = None
        self._chain_list: list = []

    def _sample_values(self):
        small = self._small[: self._n_small]
        if self._big:
            return list(small.tolist()) + self._big
        return small

    def _add_sample(self, w: int):
        self.sample.add(w)
        if self._encodable:
            key = self.family.encode(w)
            if key is None:
                self._encodable = False
            else:
                n = len(self.sample) - 1
                if n == len(self._keys):
                    self._keys = np.concatenate([self._keys, np.zeros(len(self._keys), dtype=np.int64)])
                self._keys[n] = key
        if w < SMALL:
            if self._n_small == len(self._small):
                self._small = np.concatenate([self._small, np.zeros(len(self._small), dtype=np.int64)])
            self._small[self._n_small] = w
            self._n_small += 1
        else:
            self._big.append(w)

    def observe(self, w: int) -> CriticalChain:
        fam = self.family
        self.t += 1
        self._add_sample(w)
        died = False
        if len(self.alive):
            mask = fam.member_many(self.alive, w)
            if not mask.all():
                self.alive = self.alive[mask]
                died = True
        end = _window_end(fam, scan_horizon(self.t, self.floor))
        added = []
        if end > self.window_end:
            if self._encodable:
                keys = self._keys[: len(self.sample)]
                test = lambda j: fam.member_encoded(j, keys).all()
            else:
                vals = self._sample_values()
                test = lambda j: fam.member_strings(j, vals).all()
            added = [j for j in range(self.window_end, end) if test(j)]
            self.window_end = end
            if added:
                self.alive = np.concatenate([self.alive, np.asarray(added, dtype=np.int64)])
        if died or self.chain is None:
            self._chain_list = _strict_chain(fam, self.alive)
        elif added:
            self._extend(added)
        self.chain = CriticalChain(
            tuple(self._chain_list), self.window_end - fam.first_index, _is_truncated(fam, self._chain_list, self.window_end)
        )
        return self.chain

    def _extend(self, added: Sequence[int]):
        fam = self.family
        for j in added:
            if not self._chain_list:
                self._chain_list.append(j)
                continue
            last = self._chain_list[-1]
            if fam.compare_code(j, last) != SUB:
                continue
            between = self.alive[(self.alive > last) & (self.alive < j)]
            if len(between) == 0 or (fam.compare_many(j, between) == SUB).all():
                self._chain_list.append(j)
