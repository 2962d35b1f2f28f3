"""Prefix densities of the output set under the tower pretender.

Compares the enumeration-style guesser with the fallback and lazy strategies on
the same family; the first collapses towards zero, the others do not.

    python3 scripts/density_contrast.py --family "prefix-multiples(period=100)" --steps 20000
"""

import argparse

from limitgen.harness import AdversaryConfig, GameConfig, GeneratorConfig, analyze, run_game


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--family", default="prefix-multiples(period=100)")
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--window", type=int, default=25)
    a = ap.parse_args()
    horizons = tuple(h for h in (500, 1000, 2000, 5000, 10000) if h <= a.steps) or (a.steps,)
    print("generator".ljust(18) + "".join(f"N={h:<8}" for h in horizons) + "min")
    for g in ("km", "acc", "lazy", "fallback-general"):
        cfg = GameConfig(family=a.family, steps=a.steps, adversary=AdversaryConfig(kind="tower-pretender", window=a.window),
                         generator=GeneratorConfig(kind=g))
        m = analyze(run_game(cfg), horizons, tail_start=min(500, horizons[0]))
        cells = "".join(f"{float(m.prefix_density_at[h]):<10.4f}" for h in horizons)
        print(f"{g:18}{cells}{float(m.min_tail_density):.4f}")


if __name__ == "__main__":
    main()
