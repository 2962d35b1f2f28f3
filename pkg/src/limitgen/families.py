"""Countable families of infinite languages over the natural numbers.

Every language is an infinite subset of the naturals, ordered numerically.
A family is addressed by integer language indices and offers exact
membership, enumeration (``nth``/``count``) and inclusion comparison.
"""

from __future__ import annotations

import bisect
import json
import math
import re
import threading
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

# Values at or above this bound are handled with Python integers.
SMALL = 1 << 62


class FamilyError(ValueError):
    """Raised for unknown kinds, bad parameters, malformed files or bad indices."""


class Relation(str, Enum):
    PROPER_SUBSET = "ProperSubset"
    EQUAL = "Equal"
    PROPER_SUPERSET = "ProperSuperset"
    INCOMPARABLE = "Incomparable"

    def mirror(self) -> "Relation":
        return _MIRROR[self]


_MIRROR = {
    Relation.PROPER_SUBSET: Relation.PROPER_SUPERSET,
    Relation.PROPER_SUPERSET: Relation.PROPER_SUBSET,
    Relation.EQUAL: Relation.EQUAL,
    Relation.INCOMPARABLE: Relation.INCOMPARABLE,
}

# Integer codes used by vectorised comparisons: relation of L_i to L_j.
EQ, SUB, SUP, INC = 0, 1, 2, 3
CODE_TO_RELATION = (Relation.EQUAL, Relation.PROPER_SUBSET, Relation.PROPER_SUPERSET, Relation.INCOMPARABLE)
RELATION_TO_CODE = {r: c for c, r in enumerate(CODE_TO_RELATION)}
_MIRROR_CODE = np.array([EQ, SUP, SUB, INC], dtype=np.int8)


def code_from_inclusions(i_in_j: bool, j_in_i: bool) -> int:
    if i_in_j and j_in_i:
        return EQ
    if i_in_j:
        return SUB
    if j_in_i:
        return SUP
    return INC


def _floor_log(x: int, b: int) -> int:
    """Largest k with b**k <= x, for x >= 1."""
    k = max(0, int((x.bit_length() - 1) / math.log2(b)) - 1)
    p = b ** k
    while p * b <= x:
        p *= b
        k += 1
    while p > x:
        p //= b
        k -= 1
    return k


# ---------------------------------------------------------------------------
# Family specifications


_PRIMARY_PARAM = {
    "prefix-multiples": "period",
    "marker-intervals": "base",
    "recursive-tree": "depth",
    "rationals-truth": "tau",
    "scripted": "file",
}


@dataclass(frozen=True)
class FamilySpec:
    """A family kind plus its parameters, e.g. ``prefix-multiples(period=100)``."""

    kind: str
    params: tuple = ()

    @classmethod
    def make(cls, kind: str, **params) -> "FamilySpec":
        return cls(kind, tuple(sorted((k, _normalise(v)) for k, v in params.items())))

    def get(self, name: str, default=None):
        for k, v in self.params:
            if k == name:
                return v
        return default

    @classmethod
    def parse(cls, text: str) -> "FamilySpec":
        text = text.strip()
        m = re.fullmatch(r"([A-Za-z][\w-]*)\s*(?:\((.*)\))?", text, re.S)
        if not m:
            raise FamilyError(f"cannot parse family spec {text!r}")
        kind, body = m.group(1), m.group(2)
        params = {}
        if body and body.strip():
            for pos, part in enumerate(p.strip() for p in body.split(",")):
                if "=" in part:
                    key, val = (s.strip() for s in part.split("=", 1))
                elif pos == 0 and kind in _PRIMARY_PARAM:
                    key, val = _PRIMARY_PARAM[kind], part
                else:
                    raise FamilyError(f"positional parameter {part!r} not allowed for {kind}")
                params[key] = _parse_value(val)
        return cls.make(kind, **params)

    def __str__(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}(" + ",".join(f"{k}={v}" for k, v in self.params) + ")"

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": {k: str(v) for k, v in self.params}}


def _normalise(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**9)
    return v


def _parse_value(val: str):
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return Fraction(val)
    except (ValueError, ZeroDivisionError):
        return val


# ---------------------------------------------------------------------------
# Declared towers


@dataclass(frozen=True)
class DeclaredTower:
    """An analytic tower Λ_1, Λ_2, ... whose union of fixing sets is the terminal.

    ``b_index(x)`` gives the k with x in B_k for members x of the terminal.
    ``finite_block(k)`` lists B_k when every block is finite.
    """

    terminal: int
    index_of: Callable[[int], int]
    b_index: Callable[[int], int]
    b1_infinite: bool
    nested: bool
    finite_block: Optional[Callable[[int], list]] = None

    def prefix(self, m: int) -> list:
        return [self.index_of(j) for j in range(1, m + 1)]


# ---------------------------------------------------------------------------
# Base class


class Family:
    """Base class for language families.

    Subclasses implement ``count`` and ``nth`` (and usually faster membership
    and comparison). All methods are pure; any caches are internal.
    """

    kind = "abstract"
    first_index = 0
    size: Optional[int] = None
    terminal: Optional[int] = None
    universe_min = 1

    def __init__(self, spec: FamilySpec):
        self.spec = spec

    # index range -------------------------------------------------------
    @property
    def last_index(self) -> Optional[int]:
        return None if self.size is None else self.first_index + self.size - 1

    def is_index(self, i) -> bool:
        if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
            return False
        i = int(i)
        return i >= self.first_index and (self.size is None or i <= self.last_index)

    def check_index(self, i) -> int:
        if not self.is_index(i):
            raise FamilyError(f"language index {i!r} outside the range of {self.spec}")
        return int(i)

    def default_true_index(self) -> int:
        return self.first_index if self.terminal is None else self.terminal

    # core ----------------------------------------------------------------
    def count(self, i: int, x: int) -> int:
        """Number of members of L_i that are <= x."""
        raise NotImplementedError

    def nth(self, i: int, n: int) -> int:
        """The n-th smallest member of L_i (n >= 1)."""
        raise NotImplementedError

    def member(self, i: int, x: int) -> bool:
        if x < self.universe_min:
            return False
        return self.count(i, x) - self.count(i, x - 1) == 1

    def next_member(self, i: int, x: int) -> int:
        """Smallest member of L_i that is >= x."""
        return self.nth(i, self.count(i, x - 1) + 1)

    def member_many(self, idx: np.ndarray, x: int) -> np.ndarray:
        """Membership of one string in many languages."""
        return np.fromiter((self.member(int(i), x) for i in idx), dtype=bool, count=len(idx))

    def member_strings(self, i: int, xs) -> np.ndarray:
        """Membership of many strings in one language."""
        xs = list(xs) if not isinstance(xs, np.ndarray) else xs
        if len(xs) == 0:
            return np.zeros(0, dtype=bool)
        arr = _small_array(xs)
        if arr is not None:
            return self._member_vec(i, arr)
        return np.fromiter((self.member(i, int(x)) for x in xs), dtype=bool, count=len(xs))

    def _member_vec(self, i: int, xs: np.ndarray) -> np.ndarray:
        return np.fromiter((self.member(i, int(x)) for x in xs), dtype=bool, count=len(xs))

    def nth_many(self, i: int, ranks: np.ndarray) -> list:
        """Members at the given ranks, as a list of Python ints."""
        return [self.nth(i, int(r)) for r in ranks]

    def encode(self, x: int) -> Optional[int]:
        """An int64 key from which membership can be decided, or None.

        Lets callers keep large samples as one array; see ``member_encoded``.
        """
        return x if x < SMALL else None

    def member_encoded(self, i: int, keys: np.ndarray) -> np.ndarray:
        return self._member_vec(i, keys) if len(keys) else np.zeros(0, dtype=bool)

    # comparisons -----------------------------------------------------------
    def compare_code(self, i: int, j: int) -> int:
        raise NotImplementedError

    def compare(self, i: int, j: int) -> Relation:
        self.check_index(i)
        self.check_index(j)
        if i == j:
            return Relation.EQUAL
        return CODE_TO_RELATION[self.compare_code(int(i), int(j))]

    def compare_many(self, i: int, idx: np.ndarray) -> np.ndarray:
        """Codes of the relation of L_i to each L_j, j in idx."""
        return np.fromiter(
            (EQ if int(j) == i else self.compare_code(i, int(j)) for j in idx), dtype=np.int8, count=len(idx)
        )

    # metadata --------------------------------------------------------------
    def declared_level(self, i: int) -> Optional[int]:
        return None

    def declared_ell(self, i: int) -> Optional[Fraction]:
        return None

    def separator(self, i: int) -> tuple:
        """Finite set of members of L_i used when testing limit points."""
        return ()

    def tower_for(self, terminal: int) -> Optional[DeclaredTower]:
        return None

    def tower_refutation(self, seq: Optional[Sequence[int]], terminal: int) -> Optional[str]:
        """A witness that no infinite perfect tower to ``terminal`` exists, if known."""
        return None

    def describe(self) -> dict:
        return {"spec": str(self.spec), "first_index": self.first_index, "size": self.size, "terminal": self.terminal}


def _small_array(xs) -> Optional[np.ndarray]:
    if isinstance(xs, np.ndarray) and xs.dtype != object:
        return xs.astype(np.int64, copy=False)
    try:
        if max(xs) >= SMALL or min(xs) < -SMALL:
            return None
    except TypeError:
        return None
    return np.asarray(xs, dtype=np.int64)


# ---------------------------------------------------------------------------
# prefix-multiples


def _pm_nth(c: int, n: int, P: int) -> int:
    return n if n <= c else (c // P + n - c) * P


def _pm_b_index(r: int, P: int) -> int:
    if r == 1 or r % P == 0:
        return 1
    return r - r // P


def _pm_kth_non_multiple(j: int, P: int) -> int:
    return j + (j - 1) // (P - 1)


class PrefixMultiples(Family):
    """L_0 = ℕ₊ and L_k = {1..k} ∪ {P, 2P, 3P, ...} for k >= 1."""

    kind = "prefix-multiples"
    first_index = 0
    terminal = 0
    universe_min = 1

    def __init__(self, spec):
        super().__init__(spec)
        P = spec.get("period", 100)
        if not isinstance(P, int) or P < 2:
            raise FamilyError("prefix-multiples period must be an integer >= 2")
        self.P = P

    def count(self, i, x):
        self.check_index(i)
        if x < 1:
            return 0
        if i == 0:
            return x
        return min(x, i) + max(0, x // self.P - i // self.P)

    def nth(self, i, n):
        self.check_index(i)
        if n < 1:
            raise FamilyError("rank must be >= 1")
        if i == 0:
            return n
        return _pm_nth(i, n, self.P)

    def member(self, i, x):
        return x >= 1 and (i == 0 or x <= i or x % self.P == 0)

    def member_many(self, idx, x):
        idx = np.asarray(idx, dtype=np.int64)
        if x < 1:
            return np.zeros(len(idx), dtype=bool)
        if x % self.P == 0:
            return np.ones(len(idx), dtype=bool)
        if x >= SMALL:
            return idx == 0
        return (idx == 0) | (idx >= x)

    def _member_vec(self, i, xs):
        ok = xs >= 1
        if i == 0:
            return ok
        return ok & ((xs <= i) | (xs % self.P == 0))

    def nth_many(self, i, ranks):
        ranks = np.asarray(ranks, dtype=np.int64)
        if i == 0:
            return ranks.tolist()
        out = np.where(ranks <= i, ranks, (i // self.P + ranks - i) * self.P)
        return out.tolist()

    def canonical(self, i: int) -> int:
        if i != 0 and i % self.P == 0:
            return i - 1
        return i

    def _canon_array(self, idx):
        c = np.where((idx != 0) & (idx % self.P == 0), idx - 1, idx)
        return np.where(idx == 0, np.iinfo(np.int64).max, c)

    def compare_code(self, i, j):
        ci = math.inf if i == 0 else self.canonical(i)
        cj = math.inf if j == 0 else self.canonical(j)
        if ci == cj:
            return EQ
        return SUB if ci < cj else SUP

    def compare_many(self, i, idx):
        idx = np.asarray(idx, dtype=np.int64)
        ci = self._canon_array(np.array([i], dtype=np.int64))[0]
        cj = self._canon_array(idx)
        out = np.full(len(idx), EQ, dtype=np.int8)
        out[ci < cj] = SUB
        out[ci > cj] = SUP
        return out

    def declared_level(self, i):
        self.check_index(i)
        return 1 if i == 0 else 0

    def declared_ell(self, i):
        self.check_index(i)
        if i == 0:
            return Fraction(1)
        c = self.canonical(i)
        return Fraction(c, c + 1)

    def separator(self, i):
        self.check_index(i)
        return () if i == 0 else (self.canonical(i),)

    def tower_for(self, terminal):
        if terminal != 0:
            return None
        P = self.P
        return DeclaredTower(
            terminal=0,
            index_of=lambda j: _pm_kth_non_multiple(j, P),
            b_index=lambda x: _pm_b_index(x, P),
            b1_infinite=True,
            nested=True,
        )


# ---------------------------------------------------------------------------
# marker-intervals


class MarkerIntervals(Family):
    """L_n = union over i of [a_i, a_i + n] with a_i = b**i; L_0 is the universe.

    With ``marker_start=0`` the first marker is 0 and strings start at 0;
    with ``marker_start=1`` the first marker is b**0 = 1.
    """

    kind = "marker-intervals"
    first_index = 0
    terminal = 0

    def __init__(self, spec):
        super().__init__(spec)
        b = spec.get("base", 3)
        s = spec.get("marker_start", 0)
        if not isinstance(b, int) or b < 2:
            raise FamilyError("marker-intervals base must be an integer >= 2")
        if s not in (0, 1):
            raise FamilyError("marker_start must be 0 or 1")
        self.b, self.marker_start = b, s
        self.universe_min = s
        # Powers that fit in int64, for vectorised paths.
        pw, p = [], 1
        while p < SMALL:
            pw.append(p)
            p *= b
        self._powers = np.array(pw, dtype=np.int64)

    def marker(self, k: int) -> int:
        if k == 0:
            return 0 if self.marker_start == 0 else 1
        return self.b ** k

    def marker_index_le(self, x: int) -> int:
        """Index of the largest marker <= x (x >= universe_min)."""
        if self.marker_start == 0 and x < self.b:
            return 0
        return _floor_log(x, self.b)

    def _block_len(self, n: int, k: int) -> int:
        return min(n, self.marker(k + 1) - 1 - self.marker(k)) + 1

    def _stable_from(self, n: int) -> int:
        """First marker index from which all blocks have length n+1."""
        k = 0
        while self.marker(k + 1) - self.marker(k) <= n:
            k += 1
        return k

    def count(self, i, x):
        self.check_index(i)
        if x < self.universe_min:
            return 0
        if i == 0:
            return x - self.universe_min + 1
        m = self.marker_index_le(x)
        k0 = self._stable_from(i)
        total = 0
        for k in range(min(m, k0)):
            total += self._block_len(i, k)
        if m > k0:
            total += (m - k0) * (i + 1)
        a = self.marker(m)
        return total + min(x - a, i) + 1

    def nth(self, i, n):
        self.check_index(i)
        if n < 1:
            raise FamilyError("rank must be >= 1")
        if i == 0:
            return n - 1 + self.universe_min
        k0 = self._stable_from(i)
        acc = 0
        for k in range(k0):
            ln = self._block_len(i, k)
            if acc + ln >= n:
                return self.marker(k) + (n - acc - 1)
            acc += ln
        q, r = divmod(n - acc - 1, i + 1)
        return self.marker(k0 + q) + r

    def member(self, i, x):
        if x < self.universe_min:
            return False
        if i == 0:
            return True
        return x - self.marker(self.marker_index_le(x)) <= i

    def next_member(self, i, x):
        self.check_index(i)
        x = max(x, self.universe_min)
        if i == 0 or self.member(i, x):
            return x
        return self.marker(self.marker_index_le(x) + 1)

    def member_many(self, idx, x):
        idx = np.asarray(idx, dtype=np.int64)
        if x < self.universe_min:
            return np.zeros(len(idx), dtype=bool)
        d = x - self.marker(self.marker_index_le(x))
        if d >= SMALL:
            return idx == 0
        return (idx == 0) | (idx >= d)

    def encode(self, x):
        if x < self.universe_min:
            return -1
        return min(x - self.marker(self.marker_index_le(x)), SMALL - 1)

    def member_encoded(self, i, keys):
        if i == 0:
            return keys >= 0
        return (keys >= 0) & (keys <= i)

    def _distance(self, xs):
        pos = np.searchsorted(self._powers, xs, side="right") - 1
        m = self._powers[np.maximum(pos, 0)]
        if self.marker_start == 0:
            m = np.where(xs < self.b, 0, m)
        return xs - m

    def _member_vec(self, i, xs):
        ok = xs >= self.universe_min
        if i == 0:
            return ok
        return ok & (self._distance(np.maximum(xs, self.universe_min)) <= i)

    def nth_many(self, i, ranks):
        if i == 0:
            return (np.asarray(ranks, dtype=np.int64) - 1 + self.universe_min).tolist()
        return super().nth_many(i, ranks)

    def compare_code(self, i, j):
        a = math.inf if i == 0 else i
        c = math.inf if j == 0 else j
        if a == c:
            return EQ
        return SUB if a < c else SUP

    def compare_many(self, i, idx):
        idx = np.asarray(idx, dtype=np.int64)
        big = np.iinfo(np.int64).max
        a = big if i == 0 else i
        c = np.where(idx == 0, big, idx)
        out = np.full(len(idx), EQ, dtype=np.int8)
        out[a < c] = SUB
        out[a > c] = SUP
        return out

    def declared_level(self, i):
        self.check_index(i)
        return 1 if i == 0 else 0

    def declared_ell(self, i):
        self.check_index(i)
        return Fraction(1) if i == 0 else Fraction(i, i + 1)

    def separator(self, i):
        self.check_index(i)
        if i == 0:
            return ()
        k = 1
        while (self.b - 1) * self.b ** k <= i:
            k += 1
        return (self.b ** k + i,)

    def tower_for(self, terminal):
        if terminal != 0:
            return None
        return DeclaredTower(
            terminal=0,
            index_of=lambda j: j,
            b_index=lambda x: max(1, x - self.marker(self.marker_index_le(x))),
            b1_infinite=True,
            nested=True,
        )


# ---------------------------------------------------------------------------
# divisibility


class Divisibility(Family):
    """L_i = positive multiples of i, for i >= 1."""

    kind = "divisibility"
    first_index = 1
    terminal = 1
    universe_min = 1

    def count(self, i, x):
        self.check_index(i)
        return max(0, x) // i

    def nth(self, i, n):
        self.check_index(i)
        if n < 1:
            raise FamilyError("rank must be >= 1")
        return n * i

    def member(self, i, x):
        return x >= 1 and x % i == 0

    def member_many(self, idx, x):
        idx = np.asarray(idx, dtype=np.int64)
        if x < 1:
            return np.zeros(len(idx), dtype=bool)
        if x >= SMALL:
            return np.array([x % int(i) == 0 for i in idx], dtype=bool)
        return x % idx == 0

    def _member_vec(self, i, xs):
        return (xs >= 1) & (xs % i == 0)

    def nth_many(self, i, ranks):
        return (np.asarray(ranks, dtype=np.int64) * i).tolist()

    def compare_code(self, i, j):
        if i == j:
            return EQ
        if j % i == 0:
            return SUP
        if i % j == 0:
            return SUB
        return INC

    def compare_many(self, i, idx):
        idx = np.asarray(idx, dtype=np.int64)
        out = np.full(len(idx), INC, dtype=np.int8)
        out[idx % i == 0] = SUP
        out[i % idx == 0] = SUB
        out[idx == i] = EQ
        return out

    def declared_level(self, i):
        self.check_index(i)
        return 0

    def declared_ell(self, i):
        self.check_index(i)
        return Fraction(1, i)

    def separator(self, i):
        self.check_index(i)
        return (i,)

    def tower_refutation(self, seq, terminal):
        return (
            "each string x belongs only to the languages indexed by divisors of x, "
            "so any infinite set of distinct languages has empty intersection and B_1 is empty"
        )


# ---------------------------------------------------------------------------
# cofinite-gaps


class CofiniteGaps(Family):
    """L_0 = ℕ₊ and L_j = ℕ₊ minus {j + 1} for j >= 1."""

    kind = "cofinite-gaps"
    first_index = 0
    terminal = 0
    universe_min = 1

    def count(self, i, x):
        self.check_index(i)
        if x < 1:
            return 0
        if i == 0:
            return x
        return x - (1 if x >= i + 1 else 0)

    def nth(self, i, n):
        self.check_index(i)
        if n < 1:
            raise FamilyError("rank must be >= 1")
        return n if i == 0 or n <= i else n + 1

    def member(self, i, x):
        return x >= 1 and (i == 0 or x != i + 1)

    def member_many(self, idx, x):
        idx = np.asarray(idx, dtype=np.int64)
        if x < 1:
            return np.zeros(len(idx), dtype=bool)
        return (idx == 0) | (idx != x - 1)

    def _member_vec(self, i, xs):
        ok = xs >= 1
        return ok if i == 0 else ok & (xs != i + 1)

    def nth_many(self, i, ranks):
        r = np.asarray(ranks, dtype=np.int64)
        if i == 0:
            return r.tolist()
        return np.where(r <= i, r, r + 1).tolist()

    def compare_code(self, i, j):
        if i == j:
            return EQ
        if i == 0:
            return SUP
        if j == 0:
            return SUB
        return INC

    def compare_many(self, i, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if i == 0:
            out = np.full(len(idx), SUP, dtype=np.int8)
        else:
            out = np.full(len(idx), INC, dtype=np.int8)
            out[idx == 0] = SUB
        out[idx == i] = EQ
        return out

    def declared_level(self, i):
        self.check_index(i)
        return 1 if i == 0 else 0

    def declared_ell(self, i):
        self.check_index(i)
        return Fraction(1) if i == 0 else Fraction(i, i + 1)

    def tower_for(self, terminal):
        if terminal != 0:
            return None
        return DeclaredTower(
            terminal=0,
            index_of=lambda j: j,
            b_index=lambda x: x,
            b1_infinite=False,
            nested=False,
            finite_block=lambda k: [k],
        )


# ---------------------------------------------------------------------------
# rationals-truth


class _RationalTable:
    """Rationals in [0, 1] in diagonal order: 0/1, 1/1, 1/2, 1/3, 2/3, 1/4, ..."""

    def __init__(self, tau: Fraction):
        self.tau = tau
        self.values: list = []
        self.above = bytearray()
        self.cum_above: list = []  # number of ids <= x with value > tau
        self.above_ids: list = []
        self._q = 0
        self._lock = threading.Lock()

    def _extend_once(self):
        q = self._q + 1
        self._q = q
        if q == 1:
            fresh = [Fraction(0), Fraction(1)]
        else:
            fresh = [Fraction(p, q) for p in range(1, q) if math.gcd(p, q) == 1]
        for r in fresh:
            x = len(self.values)
            self.values.append(r)
            a = r > self.tau
            self.above.append(1 if a else 0)
            prev = self.cum_above[-1] if self.cum_above else 0
            self.cum_above.append(prev + a)
            if a:
                self.above_ids.append(x)

    def ensure_id(self, x: int):
        if x >= len(self.values):
            with self._lock:
                while x >= len(self.values):
                    self._extend_once()

    def ensure_above(self, k: int):
        if k > len(self.above_ids):
            with self._lock:
                while k > len(self.above_ids):
                    self._extend_once()


class RationalsTruth(Family):
    """Strings are rationals in [0, 1] by diagonal id; L_i = [0, tau] plus i rationals above tau."""

    kind = "rationals-truth"
    first_index = 0
    terminal = 0
    universe_min = 0

    def __init__(self, spec):
        super().__init__(spec)
        tau = spec.get("tau", Fraction(1, 2))
        if isinstance(tau, str):
            raise FamilyError(f"tau must be a rational, got {tau!r}")
        tau = Fraction(tau)
        if not (0 < tau < 1):
            raise FamilyError("rationals-truth tau must satisfy 0 < tau < 1")
        self.tau = tau
        self.table = _RationalTable(tau)

    def value(self, x: int) -> Fraction:
        self.table.ensure_id(x)
        return self.table.values[x]

    def _above(self, x):
        self.table.ensure_id(x)
        return self.table.above[x] == 1, self.table.cum_above[x]

    def count(self, i, x):
        self.check_index(i)
        if x < 0:
            return 0
        if i == 0:
            return x + 1
        _, ca = self._above(x)
        return (x + 1 - ca) + min(ca, i)

    def nth(self, i, n):
        self.check_index(i)
        if n < 1:
            raise FamilyError("rank must be >= 1")
        if i == 0:
            return n - 1
        lo, hi = n - 1, max(n, 1)
        while self.count(i, hi) < n:
            hi *= 2
        while lo < hi:
            mid = (lo + hi) // 2
            if self.count(i, mid) >= n:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def member(self, i, x):
        if x < 0:
            return False
        if i == 0:
            return True
        a, ca = self._above(x)
        return (not a) or ca <= i

    def member_many(self, idx, x):
        idx = np.asarray(idx, dtype=np.int64)
        if x < 0:
            return np.zeros(len(idx), dtype=bool)
        a, ca = self._above(x)
        if not a:
            return np.ones(len(idx), dtype=bool)
        return (idx == 0) | (idx >= ca)

    def _member_vec(self, i, xs):
        ok = xs >= 0
        if i == 0 or not ok.any():
            return ok
        self.table.ensure_id(int(xs.max()))
        above = np.frombuffer(bytes(self.table.above), dtype=np.uint8)
        cum = np.asarray(self.table.cum_above, dtype=np.int64)
        safe = np.maximum(xs, 0)
        return ok & ((above[safe] == 0) | (cum[safe] <= i))

    def compare_code(self, i, j):
        a = math.inf if i == 0 else i
        c = math.inf if j == 0 else j
        if a == c:
            return EQ
        return SUB if a < c else SUP

    def compare_many(self, i, idx):
        idx = np.asarray(idx, dtype=np.int64)
        big = np.iinfo(np.int64).max
        a = big if i == 0 else i
        c = np.where(idx == 0, big, idx)
        out = np.full(len(idx), EQ, dtype=np.int8)
        out[a < c] = SUB
        out[a > c] = SUP
        return out

    def declared_level(self, i):
        self.check_index(i)
        return 1 if i == 0 else 0

    def declared_ell(self, i):
        self.check_index(i)
        return Fraction(1) if i == 0 else Fraction(i, i + 1)

    def separator(self, i):
        self.check_index(i)
        if i == 0:
            return ()
        self.table.ensure_above(i)
        return (self.table.above_ids[i - 1],)

    def tower_for(self, terminal):
        if terminal != 0:
            return None

        def b_index(x):
            a, ca = self._above(x)
            return 1 if not a else max(1, ca)

        return DeclaredTower(terminal=0, index_of=lambda j: j, b_index=b_index, b1_infinite=True, nested=True)


# ---------------------------------------------------------------------------
# Ultimately periodic languages (demo and scripted families)


@dataclass(frozen=True)
class PeriodicLanguage:
    """Members below ``start`` listed in ``prefix``; from ``start`` on, x is a
    member iff x mod ``period`` is in ``residues``."""

    prefix: tuple
    start: int
    period: int
    residues: tuple

    def __post_init__(self):
        if self.period < 1 or not self.residues:
            raise FamilyError("periodic rule needs period >= 1 and at least one residue")
        if any(not (0 <= r < self.period) for r in self.residues) or list(self.residues) != sorted(set(self.residues)):
            raise FamilyError("residues must be distinct, sorted and in [0, period)")
        if self.start < 0:
            raise FamilyError("start must be >= 0")
        p = list(self.prefix)
        if p != sorted(set(p)) or any(x < 0 or x >= self.start for x in p):
            raise FamilyError("explicit prefix must be strictly increasing and below start")

    def _g(self, x: int) -> int:
        if x < 0:
            return 0
        q, r = divmod(x, self.period)
        return (q * len(self.residues)) + bisect.bisect_right(self.residues, r)

    def count(self, x: int) -> int:
        if x < self.start:
            return bisect.bisect_right(self.prefix, x)
        return len(self.prefix) + self._g(x) - self._g(self.start - 1)

    def nth(self, n: int) -> int:
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        m = n - len(self.prefix) + self._g(self.start - 1)
        q, rem = divmod(m - 1, len(self.residues))
        return q * self.period + self.residues[rem]

    def member(self, x: int) -> bool:
        if x < self.start:
            i = bisect.bisect_left(self.prefix, x)
            return i < len(self.prefix) and self.prefix[i] == x
        return x % self.period in self.residues

    def member_vec(self, xs: np.ndarray) -> np.ndarray:
        res = np.isin(xs % self.period, np.asarray(self.residues, dtype=np.int64))
        low = xs < self.start
        if low.any():
            res = np.where(low, np.isin(xs, np.asarray(self.prefix, dtype=np.int64)), res)
        return res

    def sigma(self) -> Fraction:
        """Sum of 2**-x over members; strictly monotone under proper inclusion."""
        total = sum((Fraction(1, 2**x) for x in self.prefix), Fraction(0))
        tail = Fraction(0)
        for r in self.residues:
            b = self.start + ((r - self.start) % self.period)
            tail += Fraction(1, 2**b)
        return total + tail / (1 - Fraction(1, 2**self.period))


def periodic_relation(a: PeriodicLanguage, b: PeriodicLanguage) -> int:
    """Exact relation code of two ultimately periodic languages."""
    bound = max(a.start, b.start) + math.lcm(a.period, b.period)
    xs = np.arange(0, bound + 1, dtype=np.int64)
    ma, mb = a.member_vec(xs), b.member_vec(xs)
    return code_from_inclusions(not (ma & ~mb).any(), not (mb & ~ma).any())


class PeriodicFamily(Family):
    """A finite listing of ultimately periodic languages."""

    def __init__(self, spec, languages: Sequence[PeriodicLanguage], first_index: int, relations=None):
        super().__init__(spec)
        self.first_index = first_index
        self.size = len(languages)
        self.langs = list(languages)
        self.relations = relations  # None means compute exactly
        self.universe_min = min(l.nth(1) for l in self.langs)
        self._ell = [l.sigma() for l in self.langs]

    def lang(self, i) -> PeriodicLanguage:
        return self.langs[self.check_index(i) - self.first_index]

    def count(self, i, x):
        return self.lang(i).count(x) if x >= 0 else 0

    def nth(self, i, n):
        if n < 1:
            raise FamilyError("rank must be >= 1")
        return self.lang(i).nth(n)

    def member(self, i, x):
        return x >= 0 and self.lang(i).member(x)

    def _member_vec(self, i, xs):
        return (xs >= 0) & self.lang(i).member_vec(np.maximum(xs, 0))

    def member_many(self, idx, x):
        return np.fromiter((self.member(int(i), x) for i in idx), dtype=bool, count=len(idx))

    def compare_code(self, i, j):
        if i == j:
            return EQ
        if self.relations is None:
            return periodic_relation(self.lang(i), self.lang(j))
        key = (min(i, j), max(i, j))
        if key not in self.relations:
            raise FamilyError(f"scripted family declares no relation between {key[0]} and {key[1]}")
        code = self.relations[key]
        return code if i < j else int(_MIRROR_CODE[code])

    def declared_level(self, i):
        self.check_index(i)
        return 0

    def declared_ell(self, i):
        return self._ell[self.check_index(i) - self.first_index]

    def separator(self, i):
        return ()


class NaturalsEvensDemo(PeriodicFamily):
    """Indices 1, 2, 3: positive naturals, positive evens, positive multiples of 4."""

    kind = "naturals-evens-demo"

    def __init__(self, spec):
        langs = [
            PeriodicLanguage((), 1, 1, (0,)),
            PeriodicLanguage((), 1, 2, (0,)),
            PeriodicLanguage((), 1, 4, (0,)),
        ]
        super().__init__(spec, langs, first_index=1)
        self.terminal = None


SCRIPT_FORMAT = "limitgen-family"
SCRIPT_VERSION = 1


def _rule_language(entry: dict) -> PeriodicLanguage:
    rule = entry.get("rule")
    if rule == "naturals":
        return PeriodicLanguage((), int(entry.get("min", 1)), 1, (0,))
    if rule == "multiples":
        k = int(entry["k"])
        if k < 1:
            raise FamilyError("multiples rule needs k >= 1")
        return PeriodicLanguage((), 1, k, (0,))
    if rule == "residues":
        return PeriodicLanguage((), int(entry.get("start", 0)), int(entry["period"]), tuple(int(r) for r in entry["residues"]))
    if rule == "explicit":
        return PeriodicLanguage(
            tuple(int(x) for x in entry.get("prefix", [])),
            int(entry["start"]),
            int(entry["period"]),
            tuple(int(r) for r in entry["residues"]),
        )
    raise FamilyError(f"unknown language rule {rule!r}")


def load_scripted_family(path, spec: Optional[FamilySpec] = None) -> PeriodicFamily:
    """Load a scripted family file (JSON). See README for the format."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FamilyError(f"cannot read scripted family {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != SCRIPT_FORMAT:
        raise FamilyError(f"scripted family must declare format {SCRIPT_FORMAT!r}")
    if doc.get("version") != SCRIPT_VERSION:
        raise FamilyError(f"unsupported scripted family version {doc.get('version')!r}")
    first = int(doc.get("first_index", 1))
    entries = doc.get("languages")
    if not isinstance(entries, list) or not entries:
        raise FamilyError("scripted family needs a non-empty 'languages' list")
    try:
        entries = sorted(entries, key=lambda e: int(e["index"]))
        if [int(e["index"]) for e in entries] != list(range(first, first + len(entries))):
            raise FamilyError("language indices must be contiguous from first_index")
        langs = [_rule_language(e) for e in entries]
        relations = {}
        for row in doc.get("relations", []):
            i, j, rel = int(row[0]), int(row[1]), Relation(row[2])
            if i == j:
                if rel is not Relation.EQUAL:
                    raise FamilyError(f"language {i} must be Equal to itself")
                continue
            code = RELATION_TO_CODE[rel]
            key = (min(i, j), max(i, j))
            code = code if i < j else int(_MIRROR_CODE[code])
            if key in relations and relations[key] != code:
                raise FamilyError(f"conflicting relations declared for {key}")
            relations[key] = code
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FamilyError):
            raise
        raise FamilyError(f"malformed scripted family: {exc}") from exc
    fam = PeriodicFamily(spec or FamilySpec.make("scripted", file=str(path)), langs, first, relations)
    fam.kind = "scripted"
    for (i, j), code in relations.items():
        if not (fam.is_index(i) and fam.is_index(j)):
            raise FamilyError(f"relation refers to unknown index in {(i, j)}")
        actual = periodic_relation(fam.lang(i), fam.lang(j))
        if actual != code:
            raise FamilyError(
                f"declared relation {CODE_TO_RELATION[code].value} between {i} and {j} "
                f"contradicts membership ({CODE_TO_RELATION[actual].value})"
            )
    return fam


# ---------------------------------------------------------------------------
# recursive-tree


class RecursiveTree(Family):
    """Tree of languages built by nesting N_c = {1..c} ∪ Pℕ₊.

    A path (a_1, ..., a_k) with 1 <= k <= depth names the language
    f_{a_1} ∘ ... ∘ f_{a_{k-1}} (N_{a_k}), where f_c is the increasing
    bijection from ℕ₊ onto N_c. Index 0 is the root ℕ₊. Paths are listed by
    increasing weight sum(a) + (depth - k) * (max(a) + slack), ties broken by
    length and then lexicographically, so every internal node is preceded by
    enough of its descendants to be a limit point of finite restrictions.
    """

    kind = "recursive-tree"
    first_index = 0
    terminal = 0
    universe_min = 1

    def __init__(self, spec):
        super().__init__(spec)
        d = spec.get("depth", 2)
        P = spec.get("period", 4)
        s = spec.get("slack", 8)
        if not isinstance(d, int) or not (1 <= d <= 6):
            raise FamilyError("recursive-tree depth must be an integer in [1, 6]")
        if not isinstance(P, int) or P < 2:
            raise FamilyError("recursive-tree period must be an integer >= 2")
        if not isinstance(s, int) or s < 0:
            raise FamilyError("recursive-tree slack must be a non-negative integer")
        self.depth, self.P, self.slack = d, P, s
        self._paths: list = [()]
        self._pos: dict = {(): 0}
        self._weight_done = 0
        self._comps = np.zeros((1, d), dtype=np.int64)
        self._lens = np.zeros(1, dtype=np.int64)
        self._lock = threading.Lock()
        self._cert: dict = {}
        self._rel: dict = {}
        self._ell: dict = {}

    # path listing ------------------------------------------------------
    def weight(self, path) -> int:
        if not path:
            return 0
        return sum(path) + (self.depth - len(path)) * (max(path) + self.slack)

    def _paths_of_weight(self, w: int) -> list:
        out = []
        d, s = self.depth, self.slack

        def rec(prefix, k):
            S, M = sum(prefix), max(prefix, default=0)
            if len(prefix) == k - 1:
                # Solve for the last component directly.
                cands = []
                a = w - S - (d - k) * (M + s)
                if 1 <= a <= M:
                    cands.append(a)
                num = w - S - (d - k) * s
                if num > 0 and num % (1 + d - k) == 0 and num // (1 + d - k) > M:
                    cands.append(num // (1 + d - k))
                for a in sorted(cands):
                    out.append(tuple(prefix) + (a,))
                return
            a = 1
            while True:
                prefix.append(a)
                fits = self._lower_bound(prefix, k) <= w
                if fits:
                    rec(prefix, k)
                prefix.pop()
                if not fits:
                    break
                a += 1

        for k in range(1, d + 1):
            rec([], k)
        out.sort(key=lambda p: (len(p), p))
        return out

    def _lower_bound(self, prefix, k):
        rest = k - len(prefix)
        return sum(prefix) + rest + (self.depth - k) * (max(prefix) + self.slack)

    def _grow(self, need: int):
        with self._lock:
            new = []
            while len(self._paths) + len(new) <= need:
                self._weight_done += 1
                new.extend(self._paths_of_weight(self._weight_done))
            if not new:
                return
            base = len(self._paths)
            comps = np.zeros((len(new), self.depth), dtype=np.int64)
            lens = np.zeros(len(new), dtype=np.int64)
            for r, p in enumerate(new):
                comps[r, : len(p)] = p
                lens[r] = len(p)
                self._pos[p] = base + r
            self._paths.extend(new)
            self._comps = np.vstack([self._comps, comps])
            self._lens = np.concatenate([self._lens, lens])

    def path(self, i: int) -> tuple:
        self.check_index(i)
        if i >= len(self._paths):
            self._grow(i)
        return self._paths[i]

    def index_of_path(self, path) -> int:
        path = tuple(path)
        if len(path) > self.depth or any(a < 1 for a in path):
            raise FamilyError(f"invalid tree path {path}")
        if path not in self._pos:
            w = self.weight(path)
            while self._weight_done < w:
                self._grow(len(self._paths))
        return self._pos[path]

    # language operations -------------------------------------------------
    def _count_path(self, path, x):
        P = self.P
        for c in path:
            if x < 1:
                return 0
            x = min(x, c) + max(0, x // P - c // P)
        return max(x, 0)

    def count(self, i, x):
        return self._count_path(self.path(i), x)

    def nth(self, i, n):
        if n < 1:
            raise FamilyError("rank must be >= 1")
        y = n
        for c in reversed(self.path(i)):
            y = _pm_nth(c, y, self.P)
        return y

    def _member_path(self, path, x):
        P = self.P
        for c in path:
            if x < 1 or not (x <= c or x % P == 0):
                return False
            x = min(x, c) + max(0, x // P - c // P)
        return x >= 1

    def member(self, i, x):
        return self._member_path(self.path(i), x)

    def member_many(self, idx, x):
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx) == 0:
            return np.zeros(0, dtype=bool)
        if x < 1:
            return np.zeros(len(idx), dtype=bool)
        if x >= SMALL:
            return np.array([self.member(int(i), x) for i in idx], dtype=bool)
        top = int(idx.max())
        if top >= len(self._paths):
            self._grow(top)
        comps, lens = self._comps[idx], self._lens[idx]
        P = self.P
        y = np.full(len(idx), x, dtype=np.int64)
        ok = np.ones(len(idx), dtype=bool)
        for lvl in range(self.depth):
            active = lens > lvl
            if not active.any():
                break
            c = comps[:, lvl]
            mem = (y >= 1) & ((y <= c) | (y % P == 0))
            ok &= ~active | mem
            y = np.where(active, np.minimum(y, c) + np.maximum(0, y // P - c // P), y)
        return ok

    def _member_vec(self, i, xs):
        P = self.P
        y = xs.copy()
        ok = y >= 1
        for c in self.path(i):
            ok &= (y <= c) | (y % P == 0)
            y = np.minimum(y, c) + np.maximum(0, y // P - c // P)
        return ok

    def nth_many(self, i, ranks):
        y = np.asarray(ranks, dtype=np.int64)
        P = self.P
        for c in reversed(self.path(i)):
            y = np.where(y <= c, y, (c // P + y - c) * P)
        return y.tolist()

    # exact comparison via periodicity certificates -------------------------
    def certificate(self, i: int):
        """(B, Q): for x > B membership depends only on x mod Q."""
        if i in self._cert:
            return self._cert[i]
        path = self.path(i)
        P = self.P
        B, Q = 0, 1  # the root ℕ₊
        if path:
            B, Q = path[-1], P
            for c in reversed(path[:-1]):
                B = max(c, P * max(0, B - c + c // P))
                Q = P * Q
        self._cert[i] = (B, Q)
        return B, Q

    def compare_code(self, i, j):
        if i == j:
            return EQ
        key = (i, j) if i < j else (j, i)
        code = self._rel.get(key)
        if code is None:
            bi, qi = self.certificate(key[0])
            bj, qj = self.certificate(key[1])
            bound = max(bi, bj) + math.lcm(qi, qj)
            xs = np.arange(1, bound + 1, dtype=np.int64)
            ma, mb = self._member_vec(key[0], xs), self._member_vec(key[1], xs)
            code = code_from_inclusions(not (ma & ~mb).any(), not (mb & ~ma).any())
            self._rel[key] = code
        return code if i < j else int(_MIRROR_CODE[code])

    def declared_level(self, i):
        return self.depth - len(self.path(i))

    def declared_ell(self, i):
        v = self._ell.get(i)
        if v is None:
            if i == 0:
                v = Fraction(1)
            else:
                B, Q = self.certificate(i)
                xs = np.arange(1, B + Q + 1, dtype=np.int64)
                mem = self._member_vec(i, xs)
                head = sum((Fraction(1, 2 ** int(x)) for x in xs[: B][mem[: B]]), Fraction(0))
                tail = sum((Fraction(1, 2 ** int(x)) for x in xs[B:][mem[B:]]), Fraction(0))
                v = head + tail / (1 - Fraction(1, 2**Q))
            self._ell[i] = v
        return v

    def separator(self, i):
        # Members up to the certificate bound pin down the non-periodic head,
        # which is where nodes from different branches differ.
        B, _ = self.certificate(i)
        n = self.count(i, B)
        return tuple(self.nth_many(i, np.arange(1, n + 1, dtype=np.int64))) if n else ()

    def tower_for(self, terminal):
        path = self.path(terminal)
        if len(path) >= self.depth:
            return None
        P = self.P

        def b_index(x):
            r = self._count_path(path, x)
            return _pm_b_index(r, P)

        return DeclaredTower(
            terminal=terminal,
            index_of=lambda j: self.index_of_path(path + (_pm_kth_non_multiple(j, P),)),
            b_index=b_index,
            b1_infinite=True,
            nested=True,
        )

    def describe(self):
        d = super().describe()
        d.update({"depth": self.depth, "period": self.P, "slack": self.slack, "listing": "weight then length then lexicographic"})
        return d


# ---------------------------------------------------------------------------
# Loading and module-level operations


_KINDS = {
    "prefix-multiples": PrefixMultiples,
    "marker-intervals": MarkerIntervals,
    "recursive-tree": RecursiveTree,
    "divisibility": Divisibility,
    "cofinite-gaps": CofiniteGaps,
    "rationals-truth": RationalsTruth,
    "naturals-evens-demo": NaturalsEvensDemo,
}

_ALLOWED = {
    "prefix-multiples": {"period"},
    "marker-intervals": {"base", "marker_start"},
    "recursive-tree": {"depth", "period", "slack"},
    "divisibility": set(),
    "cofinite-gaps": set(),
    "rationals-truth": {"tau"},
    "naturals-evens-demo": set(),
    "scripted": {"file"},
}

KINDS = tuple(_ALLOWED)


def load_family(spec) -> Family:
    """Build a family from a ``FamilySpec`` or its textual form."""
    if isinstance(spec, str):
        spec = FamilySpec.parse(spec)
    if spec.kind not in _ALLOWED:
        raise FamilyError(f"unknown family kind {spec.kind!r}; expected one of {', '.join(KINDS)}")
    extra = {k for k, _ in spec.params} - _ALLOWED[spec.kind]
    if extra:
        raise FamilyError(f"unknown parameter(s) {sorted(extra)} for {spec.kind}")
    if spec.kind == "scripted":
        path = spec.get("file")
        if not path:
            raise FamilyError("scripted family needs file=<path>")
        return load_scripted_family(path, spec)
    return _KINDS[spec.kind](spec)


def member(family: Family, i: int, x: int) -> bool:
    family.check_index(i)
    return bool(family.member(i, x))


def nth_string(family: Family, i: int, n: int) -> int:
    return family.nth(family.check_index(i), n)


def rank_in(family: Family, i: int, x: int) -> int:
    if not member(family, i, x):
        raise FamilyError(f"{x} is not a member of language {i}")
    return family.count(i, x)


def succ_in(family: Family, i: int, x: int) -> int:
    return family.nth(i, rank_in(family, i, x) + 1)


def compare(family: Family, i: int, j: int) -> Relation:
    return family.compare(i, j)


def iter_members(family: Family, i: int, start: int = 0) -> Iterable[int]:
    """Members of L_i that are >= start, in increasing order."""
    n = family.count(i, start - 1) + 1
    while True:
        yield family.nth(i, n)
        n += 1
