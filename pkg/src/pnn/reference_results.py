"""Reference per-seed test errors (%) and their published summary cells.

Only rows whose seed values survive in full are included. Where a table
cell and a per-seed listing disagree, the listing wins if it reproduces the
table's summary cells.

In ``REPORTED_TESTS`` the last field marks whether the listed seeds
reproduce the published statistic. Entries with ``False`` are kept for the
discrepancy report and never asserted.
"""

from __future__ import annotations

import csv
from pathlib import Path

# CIFAR-10, single networks (five seeds)
CIFAR10_SINGLE = {
    "ResNet20": [7.50, 7.38, 7.57, 7.49, 7.24],
    "WideResNet14": [7.51, 7.66, 7.25, 7.48, 7.89],
    "PNN5/ResNet20": [8.10, 7.78, 7.17, 7.43, 7.83],
    "PNN5/WideResNet14": [7.55, 7.81, 7.78, 7.84, 7.18],
    "PNN10/ResNet20": [7.88, 7.53, 7.49, 7.16, 7.35],
    "PNN10/WideResNet14": [7.29, 7.56, 7.41, 7.36, 7.91],
    "PNN15/ResNet20": [7.38, 7.02, 7.22, 7.24, 7.48],
    "PNN15/WideResNet14": [7.49, 7.26, 7.22, 7.63, 7.24],
}

# CIFAR-10, dual networks (soft-voted pair)
CIFAR10_DUAL = {
    "Ensemble": [6.02, 5.87, 6.02, 5.88, 6.12],
    "PNN5": [5.95, 6.07, 5.89, 5.87, 6.25],
    "PNN10": [5.98, 6.05, 5.99, 5.71, 5.98],
    "PNN15": [5.87, 5.80, 5.67, 5.82, 5.88],
}

# CIFAR-100, single networks: the four rows with all seven seeds recoverable.
# ResNet164 seeds 3 and 4 read 23.19 / 22.60 in the table but 23.11 / 22.66
# in the listing; only the listing reproduces the 23.49 / 23.56 summary cells.
CIFAR100_SINGLE = {
    "ResNet164": [23.64, 23.67, 23.11, 22.66, 23.85, 23.54, 23.99],
    "WideResNet110": [23.10, 22.39, 25.49, 23.90, 22.56, 22.76, 25.31],
    "PNN10/ResNet164": [24.01, 23.26, 23.56, 23.24, 24.11, 23.91, 21.38],
    "PNN15/WideResNet110": [22.09, 22.02, 25.54, 23.65, 22.52, 22.58, 24.23],
}

# CIFAR-100, dual networks
CIFAR100_DUAL = {
    "Ensemble": [20.77, 20.27, 21.08, 20.45, 20.67, 20.59, 21.72],
    "PNN10": [20.62, 20.77, 21.53, 20.75, 20.53, 20.92, 24.40],
    "PNN15": [20.56, 20.27, 21.58, 20.80, 20.46, 20.62, 21.48],
    "PNN20": [20.27, 20.21, 21.76, 20.80, 20.46, 20.41, 20.79],
}

TABLES = {
    "cifar10-single": CIFAR10_SINGLE,
    "cifar10-dual": CIFAR10_DUAL,
    "cifar100-single": CIFAR100_SINGLE,
    "cifar100-dual": CIFAR100_DUAL,
}

# (table, model) -> published (mean, trimmed mean, median); None = not published/recoverable.
DESCRIPTIVE_CELLS = {
    ("cifar10-single", "ResNet20"): (7.44, None, None),
    ("cifar10-single", "WideResNet14"): (7.56, None, None),
    ("cifar10-single", "PNN5/ResNet20"): (7.66, None, None),
    ("cifar10-single", "PNN5/WideResNet14"): (7.63, None, None),
    ("cifar10-single", "PNN10/ResNet20"): (7.48, None, None),
    ("cifar10-single", "PNN10/WideResNet14"): (7.51, None, None),
    ("cifar10-single", "PNN15/ResNet20"): (7.27, None, None),
    ("cifar10-single", "PNN15/WideResNet14"): (7.37, None, None),
    ("cifar10-dual", "Ensemble"): (5.98, None, None),
    ("cifar10-dual", "PNN5"): (6.01, None, None),
    ("cifar10-dual", "PNN10"): (5.94, None, None),
    ("cifar10-dual", "PNN15"): (5.81, None, None),
    ("cifar100-single", "ResNet164"): (23.49, 23.56, 23.64),
    ("cifar100-single", "WideResNet110"): (23.64, 23.53, 23.10),
    ("cifar100-single", "PNN10/ResNet164"): (23.35, 23.60, 23.56),
    # the listing's mean "22.23" contradicts the table's "23." integer part; 23.23 fits both
    ("cifar100-single", "PNN15/WideResNet110"): (23.23, 23.01, 22.58),
    ("cifar100-dual", "Ensemble"): (20.79, 20.71, 20.67),
    ("cifar100-dual", "PNN10"): (21.36, 20.92, 20.77),
    # table median cell reads 20.62; the prose summary says 20.64
    ("cifar100-dual", "PNN15"): (20.82, 20.78, 20.62),
    ("cifar100-dual", "PNN20"): (20.67, 20.55, 20.46),
}

# Grand means of the per-model means quoted in the discussion.
GROUP_MEANS = {
    "cifar10-single": 7.49,
    "cifar10-dual": 5.93,
    "cifar100-dual": 20.91,
}

# Published hypothesis tests: (kind, table, groups in argument order, statistic, p, recomputable)
REPORTED_TESTS = [
    ("H", "cifar10-single", tuple(CIFAR10_SINGLE), 8.27, 0.31, True),
    ("H", "cifar10-dual", tuple(CIFAR10_DUAL), 9.45, 0.02, False),
    ("U", "cifar10-single", ("ResNet20", "PNN15/ResNet20"), 21.00, 0.09, True),
    ("U", "cifar10-single", ("WideResNet14", "PNN15/WideResNet14"), 19.00, 0.22, True),
    ("U", "cifar10-dual", ("PNN15", "Ensemble"), 2.00, 0.04, True),
    ("U", "cifar100-single", ("ResNet164", "PNN10/ResNet164"), 20.00, 0.80, False),
    ("U", "cifar100-single", ("WideResNet110", "PNN15/WideResNet110"), 30.00, 0.52, True),
    ("H", "cifar100-dual", tuple(CIFAR100_DUAL), 2.18, 0.54, True),
    # published as "an H statistic"; it is the U of the Ensemble-first ordering
    ("U", "cifar100-dual", ("Ensemble", "PNN20"), 28.50, 0.64, True),
]


def write_table_csv(table: str, path, column: str = "ensemble_err") -> Path:
    """Write one table in the aggregate-CSV schema, one row per (model, seed)."""
    from .experiment import CSV_COLUMNS

    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for model, values in TABLES[table].items():
            for i, v in enumerate(values, start=1):
                row = {c: "" for c in CSV_COLUMNS}
                row.update(model=model, seed=i, swap_count=0)
                row[column] = f"{v:.2f}"
                w.writerow(row)
    return path
