"""Sets of used strings with fast skipping over runs, plus an ordered cursor."""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from .families import SMALL, Family


class UsedSet(set):
    """A set that only grows; ``free_from`` jumps over runs of members."""

    def __init__(self, *args):
        super().__init__(*args)
        self._jump: dict = {}

    def free_from(self, x: int) -> int:
        """Smallest non-member >= x."""
        jump = self._jump
        path = []
        while x in self:
            path.append(x)
            x = jump.get(x, x + 1)
        for y in path:
            jump[y] = x
        return x


class Union:
    """Membership view over several sets."""

    def __init__(self, *parts):
        self.parts = parts

    def __contains__(self, x):
        return any(x in p for p in self.parts)

    def free_from(self, x: int) -> int:
        while x in self:
            for p in self.parts:
                if x in p:
                    x = p.free_from(x) if hasattr(p, "free_from") else x + 1
        return x


def skip_run(skip, x: int) -> int:
    return skip.free_from(x) if hasattr(skip, "free_from") else x + 1


class Cursor:
    """Walks the members of one language in increasing order, skipping a set.

    Runs of skipped strings are crossed with ``next_member`` hops; when skipped
    members are scattered it switches to batched rank scans.
    """

    HOPS = 16

    def __init__(self, family: Family, i: int):
        self.family, self.i = family, i
        self.pos = family.universe_min  # no answer lies below this
        self.rank = 1  # rank of _buf[0]
        self._buf: list = []
        self._batch = 16
        self._scan_mode = False

    def _fill(self):
        r = self.rank + len(self._buf)
        stop = r + self._batch
        if stop < SMALL:
            self._buf += self.family.nth_many(self.i, np.arange(r, stop, dtype=np.int64))
        else:
            self._buf += [self.family.nth(self.i, q) for q in range(r, stop)]
        self._batch = min(2 * self._batch, 4096)

    def _seek(self, x: int):
        """Drop buffered members below x, re-anchoring the rank if needed."""
        k = bisect_left(self._buf, x)
        if k < len(self._buf):
            del self._buf[:k]
            self.rank += k
        else:
            self._buf = []
            self.rank = self.family.count(self.i, x - 1) + 1

    def next_not_in(self, skip) -> int:
        fam, i = self.family, self.i
        x = self.pos
        if not self._scan_mode:
            for _ in range(self.HOPS):
                x = fam.next_member(i, x)
                if x not in skip:
                    self.pos = x
                    return x
                x = skip_run(skip, x)
            self._scan_mode = True
        self._seek(x)
        while True:
            if not self._buf:
                self._fill()
            buf = self._buf
            k = next((k for k, y in enumerate(buf) if y not in skip), None)
            if k is not None:
                break
            self.rank += len(buf)
            self._buf = []
        del self._buf[:k]
        self.rank += k
        self.pos = x = self._buf[0]
        return x
