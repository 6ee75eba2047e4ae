"""Recompute every reference hypothesis test and summary cell from the seed listings."""

import argparse

from pnn import reference_results as ref
from pnn.stats import EXACT_MAX_N, descriptive, kruskal_wallis, mann_whitney_u


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.parse_args()

    print(f"{'test':<4} {'table':<16} {'groups':<42} {'reported':>17} {'recomputed':>24}")
    for kind, table, groups, stat, p, recomputable in ref.REPORTED_TESTS:
        samples = [ref.TABLES[table][g] for g in groups]
        if kind == "H":
            r = kruskal_wallis(samples)
            got = f"{r.statistic:6.2f} p={r.p_value:.3f}"
        else:
            r = mann_whitney_u(*samples)
            got = f"{r.statistic:6.2f} p={r.p_value:.3f}"
            if sum(map(len, samples)) <= EXACT_MAX_N:
                got += f" exact={mann_whitney_u(*samples, method='exact').p_value:.3f}"
        flag = "" if recomputable else "  <- not reproducible from the listed seeds"
        label = " vs ".join(groups) if kind == "U" else f"{len(groups)} groups"
        print(f"{kind:<4} {table:<16} {label:<42} {stat:7.2f} p={p:.2f}   {got}{flag}")

    print()
    print(f"{'table':<16} {'model':<22} {'reported':>24}   recomputed")
    for (table, model), cells in ref.DESCRIPTIVE_CELLS.items():
        d = descriptive(ref.TABLES[table][model])
        rep = " / ".join("  -  " if c is None else f"{c:5.2f}" for c in cells)
        print(f"{table:<16} {model:<22} {rep:>24}   {d.mean:5.2f} / {d.trimmed_mean:5.2f} / "
              f"{d.median:5.2f}")


if __name__ == "__main__":
    main()
