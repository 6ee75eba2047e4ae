"""Nonparametric model comparison and the systematic seed sampler.

Everything here is pure Python on plain float lists.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import ConfigError, DegenerateTestError, SizeError
from .special import chi2_sf, norm_sf

EXACT_MAX_N = 14


@dataclass(frozen=True)
class Sample:
    label: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise SizeError(f"sample {self.label!r} is empty")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class TestMethod:
    name: str
    tie_correction: bool
    exact: bool = False
    continuity: bool = False


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: TestMethod
    df: int | None = None
    details: dict = field(default_factory=dict, compare=False)

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def _values(s) -> list[float]:
    return list(s.values) if isinstance(s, Sample) else [float(v) for v in s]


def ranks_with_ties(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the positions they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def tie_sum(values: Sequence[float]) -> float:
    """``sum(t**3 - t)`` over groups of tied values."""
    return float(sum(t**3 - t for t in Counter(values).values() if t > 1))


def kruskal_wallis(groups) -> TestResult:
    """Kruskal-Wallis H with the standard tie correction; df = k - 1.

    ``details["uncorrected"]`` holds the plain
    ``12/(N(N+1)) * sum(R_i^2/n_i) - 3(N+1)`` value.
    """
    data = [_values(g) for g in groups]
    if len(data) < 2:
        raise SizeError("Kruskal-Wallis needs at least 2 groups")
    if any(len(d) == 0 for d in data):
        raise SizeError("every group must be non-empty")
    pooled = [v for d in data for v in d]
    n = len(pooled)
    ranks = ranks_with_ties(pooled)
    rank_sums, pos = [], 0
    for d in data:
        rank_sums.append(math.fsum(ranks[pos : pos + len(d)]))
        pos += len(d)
    h0 = 12.0 / (n * (n + 1)) * math.fsum(r * r / len(d) for r, d in zip(rank_sums, data)) \
        - 3.0 * (n + 1)
    correction = 1.0 - tie_sum(pooled) / (n**3 - n)
    if correction <= 0:
        raise DegenerateTestError("all observations are identical; H is undefined")
    h = h0 / correction
    df = len(data) - 1
    return TestResult(
        statistic=h,
        p_value=min(1.0, max(0.0, chi2_sf(h, df))),
        method=TestMethod("kruskal-wallis", tie_correction=True),
        df=df,
        details={"uncorrected": h0, "N": n, "rank_sums": rank_sums,
                 "sizes": [len(d) for d in data]},
    )


def u_statistic(x: Sequence[float], y: Sequence[float]) -> float:
    """Pairs with ``x_i > y_j``, counting ties as one half."""
    gt = sum(1 for a in x for b in y if a > b)
    eq = sum(1 for a in x for b in y if a == b)
    return gt + 0.5 * eq


def _exact_p(x: list[float], y: list[float]) -> float:
    pooled = x + y
    n, n1 = len(pooled), len(x)
    if n > EXACT_MAX_N:
        raise SizeError(f"exact enumeration is limited to N <= {EXACT_MAX_N}, got {n}")
    # doubled midranks are integers, so U can be compared exactly
    r2 = [int(round(2 * r)) for r in ranks_with_ties(pooled)]
    offset = n1 * (n1 + 1)
    observed = sum(r2[:n1]) - offset
    le = ge = total = 0
    for combo in itertools.combinations(range(n), n1):
        u2 = sum(r2[i] for i in combo) - offset
        le += u2 <= observed
        ge += u2 >= observed
        total += 1
    return min(1.0, 2.0 * min(le, ge) / total)


def mann_whitney_u(x, y, method: str = "normal", continuity: bool = True) -> TestResult:
    """Two-sided Mann-Whitney U; the statistic is U of the first sample.

    ``method="normal"`` uses the tie-corrected normal approximation (with a
    0.5 continuity correction by default); ``method="exact"`` enumerates all
    assignments of the pooled midranks (N <= 14).
    """
    xs, ys = _values(x), _values(y)
    if not xs or not ys:
        raise SizeError("both samples must be non-empty")
    n1, n2 = len(xs), len(ys)
    n = n1 + n2
    ux = u_statistic(xs, ys)
    uy = n1 * n2 - ux
    pooled = xs + ys
    var = n1 * n2 / 12.0 * ((n + 1) - tie_sum(pooled) / (n * (n - 1)))
    mu = n1 * n2 / 2.0
    details = {"U_x": ux, "U_y": uy, "n1": n1, "n2": n2}
    if method == "normal":
        if var <= 0:
            raise DegenerateTestError("tie-corrected variance is zero; all values are identical")
        num = max(abs(ux - mu) - (0.5 if continuity else 0.0), 0.0)
        z = num / math.sqrt(var)
        details["z"] = math.copysign(z, ux - mu)
        p = min(1.0, 2.0 * norm_sf(z))
        m = TestMethod("mann-whitney-u", tie_correction=True, exact=False, continuity=continuity)
    elif method == "exact":
        p = _exact_p(xs, ys)
        m = TestMethod("mann-whitney-u", tie_correction=True, exact=True, continuity=False)
    else:
        raise ValueError(f"method must be 'normal' or 'exact', got {method!r}")
    return TestResult(statistic=ux, p_value=p, method=m, details=details)


class Descriptive(NamedTuple):
    mean: float
    trimmed_mean: float
    median: float


def trimmed_mean(values: Sequence[float]) -> float:
    """Mean after dropping exactly one minimum and one maximum."""
    if len(values) < 3:
        raise SizeError("trimmed mean needs at least 3 values")
    s = sorted(values)[1:-1]
    return math.fsum(s) / len(s)


def median(values: Sequence[float]) -> float:
    s = sorted(values)
    m = len(s) // 2
    return s[m] if len(s) % 2 else (s[m - 1] + s[m]) / 2.0


def descriptive(values: Sequence[float]) -> Descriptive:
    values = [float(v) for v in values]
    if not values:
        raise SizeError("descriptive statistics need at least one value")
    return Descriptive(math.fsum(values) / len(values), trimmed_mean(values), median(values))


def systematic_seeds(population_max: int = 2**32 - 1, strata: int = 60, take: int = 5) -> list[int]:
    """Every k-th integer of ``[0, population_max]`` with ``k = population_max // strata``.

    Seeds are ``k, 2k, ..., take*k``; zero is skipped so every seed is nonzero.
    """
    if not strata >= take >= 1:
        raise ConfigError(f"need strata >= take >= 1, got strata={strata}, take={take}",
                          field="take")
    k = population_max // strata
    if k == 0:
        raise ConfigError(f"population {population_max} is smaller than {strata} strata",
                          field="strata")
    return [i * k for i in range(1, take + 1)]
