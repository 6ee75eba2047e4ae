"""Write the reference seed listings as aggregate CSVs that ``pnn compare`` reads."""

import argparse
from pathlib import Path

from pnn.reference_results import TABLES, write_table_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/reference", help="output directory")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for table in TABLES:
        print(write_table_csv(table, out / f"{table}.csv"))


if __name__ == "__main__":
    main()
