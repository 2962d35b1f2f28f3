"""Command line entry point: run, sweep, tower, levels."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .adversaries import AdversaryError
from .families import FamilyError, load_family
from .generators import GeneratorError
from .harness import AdversaryConfig, ConfigError, GameConfig, GeneratorConfig, SweepConfig, run_and_save, sweep
from .topology import Restriction, TopologyError, cb_levels, estimate_truth_index, verify_tower

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _restriction(text):
    try:
        n, h = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected n,H") from None
    return (n, h)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="limitgen", description="Language generation in the limit: games, sweeps and topology.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="play one game")
    r.add_argument("--family", required=True)
    r.add_argument("--true", dest="true_index", type=int, default=None)
    r.add_argument("--adversary", default="straight")
    r.add_argument("--generator", default="acc")
    r.add_argument("--steps", type=int, required=True)
    r.add_argument("--transcript")
    r.add_argument("--density")
    r.add_argument("--window", type=int, default=25, help="pretender stabilization window")
    r.add_argument("--max-dwell", type=int, default=1000)
    r.add_argument("--backfill", type=int, default=10)
    r.add_argument("--script", help="newline-separated strings for the scripted adversary")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--c", default="9/10", help="lazy density target, e.g. 9/10")
    r.add_argument("--level-source", choices=("declared", "computed"), default="declared")
    r.add_argument("--restrict", type=_restriction, help="n,H for computed levels")
    r.add_argument("--floor", type=int, default=64)

    s = sub.add_parser("sweep", help="run a grid of games from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int)

    t = sub.add_parser("tower", help="verify the declared tower to a terminal language")
    t.add_argument("--family", required=True)
    t.add_argument("--terminal", type=int)
    t.add_argument("--depth", type=int, default=8)
    t.add_argument("--horizon", type=int, default=10000)
    t.add_argument("--sequence", help="comma-separated indices instead of the declared tower")

    lv = sub.add_parser("levels", help="derived-set levels of a finite restriction")
    lv.add_argument("--family", required=True)
    lv.add_argument("--restrict", type=int, required=True)
    lv.add_argument("--horizon", type=int, default=64)
    lv.add_argument("--extra", default="", help="comma-separated extra indices")
    return p


def _cmd_run(a) -> int:
    cfg = GameConfig(
        family=a.family,
        steps=a.steps,
        true_index=a.true_index,
        adversary=AdversaryConfig(kind=a.adversary, window=a.window, max_dwell=a.max_dwell, backfill=a.backfill, script=a.script, seed=a.seed),
        generator=GeneratorConfig(kind=a.generator, c=Fraction(a.c), level_source=a.level_source, restriction=a.restrict),
        floor=a.floor,
    )
    cfg.validate()
    _, m = run_and_save(cfg, a.transcript, a.density)
    print(json.dumps(m.summary(), indent=2, default=str))
    return EXIT_OK


def _cmd_sweep(a) -> int:
    cfg = SweepConfig.load(a.config)
    if a.workers:
        cfg = SweepConfig(**{**cfg.__dict__, "workers": a.workers})
    for g in cfg.games():
        g.validate()
    rows = sweep(cfg)
    bad = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        print(f"{r['status']:5} {r['family']} {r['adversary']} {r['generator']} {r.get('error', '')}".rstrip())
    return EXIT_PARTIAL if bad else EXIT_OK


def _cmd_tower(a) -> int:
    fam = load_family(a.family)
    terminal = fam.default_true_index() if a.terminal is None else fam.check_index(a.terminal)
    if a.sequence:
        seq = [int(v) for v in a.sequence.split(",")]
    else:
        tower = fam.tower_for(terminal)
        if tower is None:
            est = estimate_truth_index(fam, terminal, a.depth, a.horizon)
            doc = {"terminal": terminal, "declared_tower": None, "truth_index_estimate": str(est.value),
                   "inconclusive": est.inconclusive, "witness": est.witness, "tower": est.tower}
            print(json.dumps(doc, indent=2))
            return EXIT_OK
        seq = tower.prefix(a.depth)
    report = verify_tower(fam, seq, terminal, a.horizon)
    print(json.dumps(report.to_json(), indent=2))
    return EXIT_OK


def _cmd_levels(a) -> int:
    fam = load_family(a.family)
    extra = tuple(int(v) for v in a.extra.split(",") if v.strip())
    lm = cb_levels(fam, Restriction(a.restrict, a.horizon, extra))
    print(f"# rank={lm.rank} kernel={sorted(lm.kernel)}")
    print("index\tlevel\tell\tkernel")
    for i in sorted(lm.levels):
        lv = "-" if lm.levels[i] is None else lm.levels[i]
        print(f"{i}\t{lv}\t{lm.ell[i]}\t{int(i in lm.kernel)}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "tower": _cmd_tower, "levels": _cmd_levels}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, FamilyError, AdversaryError, GeneratorError, TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
