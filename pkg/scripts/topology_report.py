"""Derived-set ranks, declared towers and truth-index estimates for the built-ins.

    python3 scripts/topology_report.py
"""

from limitgen.families import load_family
from limitgen.topology import Restriction, cb_levels, estimate_truth_index, verify_tower

# Restriction sizes per family: large enough to show the limit points,
# small enough that finite horizons do not create spurious ones.
RESTRICTIONS = {
    "prefix-multiples(period=100)": Restriction(60, 20),
    "marker-intervals(base=3)": Restriction(51, 64),
    "recursive-tree(depth=2)": Restriction(200, 4),
    "divisibility": Restriction(50, 64),
    "cofinite-gaps": Restriction(40, 64),
}


def main():
    print("family                          rank  levels")
    for spec, R in RESTRICTIONS.items():
        lm = cb_levels(load_family(spec), R)
        hist = {}
        for v in lm.levels.values():
            hist[v] = hist.get(v, 0) + 1
        print(f"{spec:32}{lm.rank!s:6}{dict(sorted(hist.items(), key=str))}")
    print()
    for spec in ("prefix-multiples(period=100)", "marker-intervals(base=3)", "cofinite-gaps"):
        fam = load_family(spec)
        K = fam.default_true_index()
        rep = verify_tower(fam, fam.tower_for(K).prefix(6), K, 10000)
        sizes = {k: len(v) for k, v in rep.B_sets.items()}
        print(f"{spec:32}{rep.verdict:22} |B_k|={sizes} max density~{float(rep.max_upper_density_estimate):.4f}")
    print()
    for spec in ("rationals-truth(tau=1/2)", "prefix-multiples(period=100)", "divisibility", "cofinite-gaps"):
        fam = load_family(spec)
        K = 1 if spec == "divisibility" else fam.default_true_index()
        est = estimate_truth_index(fam, K)
        note = est.witness or est.source
        print(f"{spec:32}estimate={float(est.value):.4f} inconclusive={est.inconclusive} ({note})")


if __name__ == "__main__":
    main()
