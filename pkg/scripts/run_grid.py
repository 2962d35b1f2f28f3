"""Play the family x adversary x generator grid and print one line per game.

    python3 scripts/run_grid.py --steps 20000 --out runs/grid
"""

import argparse
import time
from fractions import Fraction
from pathlib import Path

from limitgen.harness import (
    AdversaryConfig,
    GameConfig,
    GeneratorConfig,
    analyze,
    density_csv,
    run_game,
    write_rows_csv,
)

FAMILIES = ["prefix-multiples(period=100)", "marker-intervals(base=3)", "recursive-tree(depth=2)", "cofinite-gaps"]
ADVERSARIES = ["straight", "greedy-lowest", "tower-pretender"]
GENERATORS = ["km", "acc", "lazy", "fallback-general"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--out", default=None)
    ap.add_argument("--c", default="9/10")
    a = ap.parse_args()
    out = Path(a.out) if a.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    horizons = tuple(h for h in (500, 1000, 2000, 5000, 10000) if h <= a.steps) or (a.steps,)
    rows, total = [], time.perf_counter()
    for f in FAMILIES:
        for adv in ADVERSARIES:
            for g in GENERATORS:
                cfg = GameConfig(family=f, steps=a.steps, adversary=AdversaryConfig(kind=adv),
                                 generator=GeneratorConfig(kind=g, c=Fraction(a.c)))
                t0 = time.perf_counter()
                m = analyze(run_game(cfg), horizons)
                dt = time.perf_counter() - t0
                lo = m.min_tail_density
                print(f"{f:30} {adv:15} {g:17} t*={m.validity_time} acc={m.accuracy_count:6d} "
                      f"min-density={float(lo):.3f} d({horizons[-1]})={float(m.prefix_density(horizons[-1])):.3f} [{dt:.1f}s]",
                      flush=True)
                row = {"family": f, "adversary": adv, "generator": g, "seconds": round(dt, 2)}
                row.update({k: v for k, v in m.summary().items() if not isinstance(v, dict)})
                rows.append(row)
                if out:
                    name = f"{f}__{adv}__{g}".replace("(", "_").replace(")", "").replace("=", "").replace(",", "_")
                    (out / f"{name}.csv").write_text(density_csv(m))
    if out:
        write_rows_csv(rows, out / "results.csv")
    print(f"total {time.perf_counter() - total:.0f}s")


if __name__ == "__main__":
    main()
