"""Prefix densities of sets inside languages, computed exactly."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .families import SMALL, Family


class DensityError(ValueError):
    pass


@dataclass(frozen=True)
class DensityProfile:
    horizons: tuple
    hits: tuple

    @property
    def ratios(self) -> tuple:
        return tuple(Fraction(h, n) for h, n in zip(self.hits, self.horizons))


@dataclass(frozen=True)
class DensityEstimate:
    upper_est: Fraction
    lower_est: Fraction
    window_start: int
    label: str = "finite-horizon estimate"


SetLike = Union[Iterable[int], Callable[[int], bool]]


def _prefix_members(family: Family, i: int, n: int) -> list:
    """The first n members of L_i."""
    return family.nth_many(i, np.arange(1, n + 1, dtype=np.int64)) if n else []


def _hit_flags(A: SetLike, family: Family, i: int, n: int) -> np.ndarray:
    """flags[r-1] is True when the r-th member of L_i lies in A, for r <= n."""
    if callable(A) and not isinstance(A, (set, frozenset, list, tuple, np.ndarray)):
        return np.fromiter((bool(A(x)) for x in _prefix_members(family, i, n)), dtype=bool, count=n)
    vals = sorted(set(int(a) for a in A))
    flags = np.zeros(n, dtype=bool)
    if not vals or n == 0:
        return flags
    top = family.nth(i, n)
    vals = [v for v in vals if v <= top]
    if not vals:
        return flags
    arr = np.asarray(vals, dtype=np.int64) if vals[-1] < SMALL else None
    mem = family.member_strings(i, arr if arr is not None else vals)
    for v, m in zip(vals, mem):
        if m:
            flags[family.count(i, v) - 1] = True
    return flags


def hit_series(A: SetLike, family: Family, i: int, n_max: int) -> np.ndarray:
    """Cumulative hits: entry N-1 is |A ∩ first N members of L_i|."""
    return np.cumsum(_hit_flags(A, family, i, n_max), dtype=np.int64)


def prefix_density(A: SetLike, family: Family, i: int, N: int) -> Fraction:
    """|A ∩ {first N members of L_i}| / N as an exact fraction.

    ``A`` may be a finite collection of strings or a membership predicate.
    """
    if N < 1:
        raise DensityError("horizon N must be >= 1")
    return Fraction(int(_hit_flags(A, family, i, N).sum()), N)


def extreme_ratio(hits, horizons, low: bool = False) -> Fraction:
    """Exact max (or min) of hits[k] / horizons[k] over paired arrays."""
    h = np.asarray(hits, dtype=np.int64)
    n = np.asarray(horizons, dtype=np.int64)
    if len(h) == 0:
        raise DensityError("empty horizon range")
    r = h / n
    k = int(np.argmin(r) if low else np.argmax(r))
    while True:
        # Cross-multiplied comparison is exact while products fit in int64.
        lhs, rhs = h * n[k], h[k] * n
        better = np.nonzero(lhs < rhs if low else lhs > rhs)[0]
        if len(better) == 0:
            return Fraction(int(h[k]), int(n[k]))
        k = int(better[0])


def default_stride(n_max: int) -> int:
    return max(1, n_max // 2000)


def density_profile(A: SetLike, family: Family, i: int, n_max: int, stride: Optional[int] = None) -> DensityProfile:
    stride = default_stride(n_max) if stride is None else stride
    if not (n_max >= stride >= 1):
        raise DensityError("need n_max >= stride >= 1")
    series = hit_series(A, family, i, n_max)
    horizons = tuple(range(stride, n_max + 1, stride))
    return DensityProfile(horizons, tuple(int(series[n - 1]) for n in horizons))


def language_profile(family: Family, a: int, i: int, n_max: int, stride: Optional[int] = None) -> DensityProfile:
    """Profile of the language L_a inside L_i."""
    stride = default_stride(n_max) if stride is None else stride
    members = family.nth_many(i, np.arange(1, n_max + 1, dtype=np.int64))
    flags = family.member_strings(a, members)
    series = np.cumsum(flags, dtype=np.int64)
    horizons = tuple(range(stride, n_max + 1, stride))
    return DensityProfile(horizons, tuple(int(series[n - 1]) for n in horizons))


def tail_extrema(profile: DensityProfile, window_start: int) -> DensityEstimate:
    pairs = [(h, n) for n, h in zip(profile.horizons, profile.hits) if n >= window_start]
    if not pairs:
        raise DensityError("empty tail window")
    hits, horizons = zip(*pairs)
    return DensityEstimate(extreme_ratio(hits, horizons), extreme_ratio(hits, horizons, low=True), window_start)


def ordered_density(O: Iterable[int], family: Family, i: int) -> Fraction:
    """|O ∩ L_i| divided by the rank in L_i of the largest member of O ∩ L_i."""
    inside = [x for x in set(O) if family.member(i, x)]
    if not inside:
        raise DensityError("empty intersection")
    return Fraction(len(inside), family.count(i, max(inside)))


def format_ratio(r: Fraction) -> str:
    return f"{float(r):.9g}"


def write_profile_csv(profile: DensityProfile, target) -> None:
    """Write columns N, hits, ratio. ``target`` is a path or a text stream."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "hits", "ratio"])
        for n, h in zip(profile.horizons, profile.hits):
            w.writerow([n, h, format_ratio(Fraction(h, n))])
    finally:
        if own:
            fh.close()


def profile_csv_text(profile: DensityProfile) -> str:
    buf = io.StringIO()
    write_profile_csv(profile, buf)
    return buf.getvalue()
