"""Game loop, transcripts, metrics and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .adversaries import AdversaryError, make_adversary
from .density import (
    DensityProfile,
    default_stride,
    extreme_ratio,
    hit_series,
    profile_csv_text,
)
from .families import EQ, SMALL, Family, FamilyError, FamilySpec, load_family
from .generators import GeneratorError, make_generator

TRANSCRIPT_FORMAT = "limitgen-transcript"
SWEEP_FORMAT = "limitgen-sweep"
FORMAT_VERSION = 1
DEFAULT_HORIZONS = (500, 1000, 2000, 5000, 10000)
DEFAULT_TAIL_START = 500


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class AdversaryConfig:
    kind: str = "straight"
    window: int = 25
    max_dwell: Optional[int] = 1000
    backfill: int = 10
    script: Optional[str] = None
    seed: int = 0

    def params(self) -> dict:
        if self.kind == "tower-pretender":
            return {"window": self.window, "max_dwell": self.max_dwell}
        if self.kind == "greedy-lowest":
            return {"backfill": self.backfill}
        if self.kind == "scripted":
            return {"path": self.script}
        if self.kind == "shuffled":
            return {"seed": self.seed}
        return {}


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "acc"
    c: Fraction = Fraction(9, 10)
    level_source: str = "declared"  # declared | computed
    restriction: Optional[tuple] = None  # (n, H) when levels are computed
    threshold_base: int = 10


@dataclass(frozen=True)
class GameConfig:
    family: str
    steps: int
    true_index: Optional[int] = None
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    floor: int = 64

    def validate(self) -> Family:
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        try:
            fam = load_family(self.family)
        except FamilyError as exc:
            raise ConfigError(str(exc)) from exc
        K = self.K(fam)
        if not fam.is_index(K):
            raise ConfigError(f"true index {K} outside the family")
        if self.generator.level_source not in ("declared", "computed"):
            raise ConfigError("level_source must be 'declared' or 'computed'")
        return fam

    def K(self, fam: Family) -> int:
        return fam.default_true_index() if self.true_index is None else self.true_index

    def to_json(self) -> dict:
        d = asdict(self)
        d["generator"]["c"] = str(self.generator.c)
        if self.generator.restriction is not None:
            d["generator"]["restriction"] = list(self.generator.restriction)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GameConfig":
        adv = AdversaryConfig(**d.get("adversary", {}))
        g = dict(d.get("generator", {}))
        if "c" in g:
            g["c"] = Fraction(str(g["c"]))
        if g.get("restriction") is not None:
            g["restriction"] = tuple(g["restriction"])
        return cls(
            family=d["family"],
            steps=d["steps"],
            true_index=d.get("true_index"),
            adversary=adv,
            generator=GeneratorConfig(**g),
            floor=d.get("floor", 64),
        )


def first_equal_index(fam: Family, K: int) -> int:
    """z: the first index in the listing whose language equals L_K."""
    for i in range(fam.first_index, K + 1):
        if i == K or fam.compare_code(i, K) == EQ:
            return i
    return K


def _level_map(fam: Family, cfg: GeneratorConfig):
    if cfg.level_source == "declared":
        return None
    from .topology import Restriction, cb_levels, linear_extension

    if cfg.restriction is None:
        raise ConfigError("computed levels need a restriction (n, H)")
    r = Restriction(*cfg.restriction)
    if cfg.kind == "fallback-general":
        table = linear_extension(fam, r)
    else:
        table = cb_levels(fam, r).levels
    return lambda i: table.get(i)


def build_generator(fam: Family, cfg: GameConfig):
    g = cfg.generator
    params = {"floor": cfg.floor}
    if g.kind == "lazy":
        params["c"] = g.c
    elif g.kind in ("fallback-finite", "fallback-general"):
        lv = _level_map(fam, g)
        if lv is not None:
            params["levels"] = lv
    elif g.kind == "threshold":
        params["base"] = g.threshold_base
    return make_generator(g.kind, fam, horizon=cfg.steps, **params)


# ---------------------------------------------------------------------------
# Transcripts


@dataclass
class Transcript:
    header: dict
    records: list

    def lines(self) -> list:
        out = [_dumps(self.header)]
        out.extend(_dumps(r) for r in self.records)
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.text())

    @classmethod
    def read(cls, path) -> "Transcript":
        rows = [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]
        if not rows or rows[0].get("format") != TRANSCRIPT_FORMAT:
            raise ConfigError(f"{path} is not a transcript")
        return cls(rows[0], rows[1:])

    @property
    def config(self) -> GameConfig:
        return GameConfig.from_json(self.header["config"])

    def outputs(self) -> list:
        return [r["o"] for r in self.records]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_game(config: GameConfig) -> Transcript:
    fam = config.validate()
    K = config.K(fam)
    try:
        adv = make_adversary(config.adversary.kind, fam, K, **config.adversary.params())
        gen = build_generator(fam, config)
    except (AdversaryError, GeneratorError, FamilyError) as exc:
        raise ConfigError(f"cannot build game components: {exc}") from exc
    header = {
        "format": TRANSCRIPT_FORMAT,
        "version": FORMAT_VERSION,
        "package_version": __version__,
        "config": config.to_json(),
        "K": K,
        "z": first_equal_index(fam, K),
        "adversary": adv.describe(),
    }
    if config.generator.kind == "threshold":
        header["threshold_schedule"] = [gen.schedule(k) for k in range(1, 33)]
    records = []
    last = None
    for t in range(1, config.steps + 1):
        w = adv.emit(last)
        dec = gen.step(w)
        rec = {"t": t, "w": w}
        rec.update(dec.record())
        records.append(rec)
        last = dec.output
    return Transcript(header, records)


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class Metrics:
    K: int
    z: int
    steps: int
    validity_time: Optional[int]
    accuracy_count: int
    accuracy_at: dict
    outputs_in_K: int
    horizons: tuple
    prefix_density_at: dict
    tail_start: int
    min_tail_density: Optional[Fraction]
    max_tail_density: Optional[Fraction]
    profile: DensityProfile
    d_t: list
    breadth_low: Optional[Fraction]
    breadth_high: Optional[Fraction]
    fallback_events: int
    rich_events: int
    truncated_steps: int
    hit_series: np.ndarray = field(repr=False, default=None)

    def prefix_density(self, N: int) -> Fraction:
        return Fraction(int(self.hit_series[N - 1]), N)

    def min_density(self, lo: int, hi: int) -> Fraction:
        return _extreme_ratio(self.hit_series, lo, hi, low=True)

    def max_density(self, lo: int, hi: int) -> Fraction:
        return _extreme_ratio(self.hit_series, lo, hi, low=False)

    def summary(self) -> dict:
        def fr(x):
            return None if x is None else str(x)

        return {
            "K": self.K,
            "z": self.z,
            "steps": self.steps,
            "validity_time": self.validity_time,
            "accuracy_count": self.accuracy_count,
            "accuracy_at": {str(k): v for k, v in self.accuracy_at.items()},
            "outputs_in_K": self.outputs_in_K,
            "prefix_density_at": {str(k): fr(v) for k, v in self.prefix_density_at.items()},
            "tail_start": self.tail_start,
            "min_tail_density": fr(self.min_tail_density),
            "max_tail_density": fr(self.max_tail_density),
            "breadth_low": fr(self.breadth_low),
            "breadth_high": fr(self.breadth_high),
            "fallback_events": self.fallback_events,
            "rich_events": self.rich_events,
            "truncated_steps": self.truncated_steps,
        }


def _extreme_ratio(series: np.ndarray, lo: int, hi: int, low: bool) -> Fraction:
    hi = min(hi, len(series))
    if lo > hi:
        raise ValueError("empty horizon range")
    return extreme_ratio(series[lo - 1 : hi], np.arange(lo, hi + 1), low)


class _LanguageDensityCache:
    """Tail-window upper density estimates of L_i inside L_K, cached per index."""

    def __init__(self, fam: Family, K: int, n_max: int, tail_start: int):
        self.fam, self.n_max, self.tail_start = fam, n_max, tail_start
        members = fam.nth_many(K, np.arange(1, n_max + 1, dtype=np.int64))
        self.members = np.asarray(members, dtype=np.int64) if members[-1] < SMALL else members
        self.stride = default_stride(n_max)
        self.horizons = np.arange(self.stride, n_max + 1, self.stride)
        self.horizons = self.horizons[self.horizons >= tail_start]
        self.cache: dict = {}

    def upper(self, i: int) -> Fraction:
        v = self.cache.get(i)
        if v is None:
            flags = self.fam.member_strings(i, self.members)
            series = np.cumsum(flags)
            v = extreme_ratio(series[self.horizons - 1], self.horizons)
            self.cache[i] = v
        return v


def analyze(
    transcript: Transcript,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    tail_start: int = DEFAULT_TAIL_START,
    accuracy_horizons: Sequence[int] = (2000, 8000, 20000),
    with_d_t: bool = True,
) -> Metrics:
    cfg = transcript.config
    fam = load_family(cfg.family)
    K = transcript.header["K"]
    recs = transcript.records
    T = len(recs)
    outs = [r["o"] for r in recs]
    small = np.asarray(outs, dtype=np.int64) if outs and max(outs) < SMALL else None
    in_K = fam.member_strings(K, small if small is not None else outs)

    bad = np.nonzero(~in_K)[0]
    if len(bad) == 0:
        t_star = 1
    elif bad[-1] == T - 1:
        t_star = None
    else:
        t_star = int(bad[-1]) + 2

    eq_cache: dict = {}

    def is_K(i):
        if i not in eq_cache:
            eq_cache[i] = i == K or fam.compare_code(i, K) == EQ
        return eq_cache[i]

    acc_flags = [r["i"] is not None and is_K(r["i"]) for r in recs]
    acc_cum = np.cumsum(acc_flags) if acc_flags else np.zeros(0, dtype=int)
    accuracy_at = {h: int(acc_cum[min(h, T) - 1]) for h in accuracy_horizons if T}

    n_max = max(horizons)
    tail_start = min(tail_start, n_max)
    O_in_K = [o for o, f in zip(outs, in_K) if f]
    series = hit_series(O_in_K, fam, K, n_max)
    stride = default_stride(n_max)
    hz = tuple(range(stride, n_max + 1, stride))
    profile = DensityProfile(hz, tuple(int(series[n - 1]) for n in hz))
    pd = {N: Fraction(int(series[N - 1]), N) for N in horizons}
    lo_t = _extreme_ratio(series, tail_start, n_max, True)
    hi_t = _extreme_ratio(series, tail_start, n_max, False)

    d_t: list = []
    b_lo = b_hi = None
    if with_d_t:
        cache = _LanguageDensityCache(fam, K, n_max, tail_start)
        d_t = [None if r["i"] is None else cache.upper(r["i"]) for r in recs]
        if t_star is not None:
            tail = [d for d in d_t[t_star - 1 :] if d is not None]
            if tail:
                b_lo, b_hi = min(tail), max(tail)

    return Metrics(
        K=K,
        z=transcript.header["z"],
        steps=T,
        validity_time=t_star,
        accuracy_count=int(acc_cum[-1]) if T else 0,
        accuracy_at=accuracy_at,
        outputs_in_K=len(set(O_in_K)),
        horizons=tuple(horizons),
        prefix_density_at=pd,
        tail_start=tail_start,
        min_tail_density=lo_t,
        max_tail_density=hi_t,
        profile=profile,
        d_t=d_t,
        breadth_low=b_lo,
        breadth_high=b_hi,
        fallback_events=sum(1 for r in recs if r["event"] == "fallback"),
        rich_events=sum(1 for r in recs if r["event"] == "rich"),
        truncated_steps=sum(1 for r in recs if r["truncated"]),
        hit_series=series,
    )


def density_csv(metrics: Metrics) -> str:
    return profile_csv_text(metrics.profile)


def run_and_save(config: GameConfig, transcript_path=None, density_path=None, horizons=DEFAULT_HORIZONS):
    tr = run_game(config)
    m = analyze(tr, horizons)
    if transcript_path:
        tr.write(transcript_path)
    if density_path:
        Path(density_path).write_text(density_csv(m))
    return tr, m


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepConfig:
    families: tuple
    adversaries: tuple
    generators: tuple
    steps: int
    true_index: Optional[int] = None
    horizons: tuple = DEFAULT_HORIZONS
    out_dir: Optional[str] = None
    workers: int = 1
    write_transcripts: bool = False

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read sweep config {path}: {exc}") from exc
        if doc.get("format") != SWEEP_FORMAT or doc.get("version") != FORMAT_VERSION:
            raise ConfigError(f"sweep config must declare format {SWEEP_FORMAT!r} version {FORMAT_VERSION}")
        try:
            advs = tuple(AdversaryConfig(**({"kind": a} if isinstance(a, str) else a)) for a in doc.get("adversaries", []))
            gens = []
            for g in doc.get("generators", []):
                g = {"kind": g} if isinstance(g, str) else dict(g)
                if "c" in g:
                    g["c"] = Fraction(str(g["c"]))
                if g.get("restriction") is not None:
                    g["restriction"] = tuple(g["restriction"])
                gens.append(GeneratorConfig(**g))
            return cls(
                families=tuple(doc.get("families", [])),
                adversaries=advs,
                generators=tuple(gens),
                steps=int(doc["steps"]),
                true_index=doc.get("true_index"),
                horizons=tuple(doc.get("horizons", DEFAULT_HORIZONS)),
                out_dir=doc.get("out_dir"),
                workers=int(doc.get("workers", 1)),
                write_transcripts=bool(doc.get("write_transcripts", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed sweep config: {exc}") from exc

    def games(self) -> list:
        return [
            GameConfig(family=f, steps=self.steps, true_index=self.true_index, adversary=a, generator=g)
            for f, a, g in itertools.product(self.families, self.adversaries, self.generators)
        ]


def _combo_name(cfg: GameConfig) -> str:
    raw = f"{cfg.family}__{cfg.adversary.kind}__{cfg.generator.kind}"
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in raw)


def _run_row(args) -> dict:
    cfg, horizons, out_dir, write_tr = args
    row = {"family": cfg.family, "adversary": cfg.adversary.kind, "generator": cfg.generator.kind, "steps": cfg.steps}
    try:
        tr = run_game(cfg)
        m = analyze(tr, horizons)
    except (ConfigError, FamilyError, AdversaryError, GeneratorError) as exc:
        row.update({"status": "error", "error": str(exc)})
        return row
    row.update({"status": "ok", "error": ""})
    row.update({k: v for k, v in m.summary().items() if not isinstance(v, dict)})
    for N, v in m.prefix_density_at.items():
        row[f"density_{N}"] = str(v)
    if out_dir:
        name = _combo_name(cfg)
        Path(out_dir, f"{name}.csv").write_text(density_csv(m))
        if write_tr:
            tr.write(Path(out_dir, f"{name}.jsonl"))
    return row


def sweep(config: SweepConfig) -> list:
    """Run every combination; failures become error rows."""
    games = config.games()
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
    jobs = [(g, config.horizons, config.out_dir, config.write_transcripts) for g in games]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            rows = list(ex.map(_run_row, jobs))
    else:
        rows = [_run_row(j) for j in jobs]
    if config.out_dir:
        write_rows_csv(rows, Path(config.out_dir, "results.csv"))
    return rows


def write_rows_csv(rows: list, path) -> None:
    cols: list = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in cols})
