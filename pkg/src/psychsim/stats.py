"""Two-sample and k-sample tests used to compare policies.

Rank statistics are computed here; scipy only supplies the t, normal and
chi-square tail probabilities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _dist

EXACT_MAX_N = 12


class DegenerateSample(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: tuple
    df: float | None = None
    difference: float | None = None
    ci: tuple | None = None

    __test__ = False  # keep pytest from collecting this class


def _clamp01(p: float) -> float:
    return min(1.0, max(0.0, float(p)))


def welch_t_test(x, y, confidence: float = 0.95) -> TestResult:
    """Welch's unequal-variance t test with a CI on mean(x) - mean(y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise DegenerateSample("each sample needs at least two values")
    vx, vy = x.var(ddof=1) / nx, y.var(ddof=1) / ny
    se2 = vx + vy
    if se2 <= 0.0:
        raise DegenerateSample("both samples have zero variance")
    diff = float(x.mean() - y.mean())
    se = math.sqrt(se2)
    df = se2 ** 2 / (vx ** 2 / (nx - 1) + vy ** 2 / (ny - 1))
    t = diff / se
    p = 2.0 * _dist.t.sf(abs(t), df)
    h = _dist.t.ppf(0.5 + confidence / 2.0, df) * se
    return TestResult(float(t), _clamp01(p), "welch-t", (nx, ny), float(df), diff, (float(diff - h), float(diff + h)))


def midranks(values) -> np.ndarray:
    """1-based ranks with ties given the average of their positions."""
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a))
    s = a[order]
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and s[j + 1] == s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _tie_term(values) -> float:
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def exact_u_distribution(nx: int, ny: int) -> np.ndarray:
    """Counts of each U value (0..nx*ny) over every way to pick x's ranks."""
    n = nx + ny
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    base = nx * (nx + 1) // 2
    for pick in itertools.combinations(range(1, n + 1), nx):
        counts[sum(pick) - base] += 1
    return counts


def mann_whitney_u(x, y, continuity: bool = True, exact: bool | None = None) -> TestResult:
    """Two-sided Mann-Whitney U test; the statistic is U for ``x``.

    Exact when the pooled size is at most 12 and there are no ties (or when
    ``exact`` forces it); otherwise the tie-corrected normal approximation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx < 1 or ny < 1:
        raise DegenerateSample("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    n = nx + ny
    r = midranks(pooled)
    u = float(r[:nx].sum() - nx * (nx + 1) / 2.0)
    ties = _tie_term(pooled)
    if exact is None:
        exact = n <= EXACT_MAX_N and ties == 0.0
    if exact:
        counts = exact_u_distribution(nx, ny)
        total = counts.sum()
        k = int(round(u))
        lower = counts[:k + 1].sum() / total
        upper = counts[k:].sum() / total
        return TestResult(u, _clamp01(2.0 * min(lower, upper)), "mann-whitney-exact", (nx, ny))
    mu = nx * ny / 2.0
    var = nx * ny / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0.0:
        return TestResult(u, 1.0, "mann-whitney-normal", (nx, ny))
    dev = abs(u - mu)
    if continuity:
        dev = max(dev - 0.5, 0.0)
    z = dev / math.sqrt(var)
    return TestResult(u, _clamp01(2.0 * _dist.norm.sf(z)), "mann-whitney-normal", (nx, ny))


def kruskal_wallis(*samples) -> TestResult:
    """Kruskal-Wallis H with tie correction; chi-square p with k - 1 df."""
    groups = [np.asarray(s, dtype=float) for s in samples]
    if len(groups) < 2:
        raise DegenerateSample("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise DegenerateSample("empty group")
    pooled = np.concatenate(groups)
    n = len(pooled)
    if n < 3:
        raise DegenerateSample("need at least three observations")
    ns = tuple(len(g) for g in groups)
    r = midranks(pooled)
    h = 0.0
    start = 0
    for m in ns:
        h += r[start:start + m].sum() ** 2 / m
        start += m
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    corr = 1.0 - _tie_term(pooled) / (n ** 3 - n)
    if corr <= 0.0:
        return TestResult(0.0, 1.0, "kruskal-wallis", ns, float(len(groups) - 1))
    h = max(h / corr, 0.0)
    df = len(groups) - 1
    return TestResult(float(h), _clamp01(_dist.chi2.sf(h, df)), "kruskal-wallis", ns, float(df))


def pairwise_compare(groups, method: str = "mann_whitney", correction: str = "bonferroni") -> dict:
    """Every pairwise comparison, Bonferroni-adjusted.

    ``groups`` is a mapping label -> sample (or a sequence, labelled by
    position). Returns ``{(a, b): TestResult}`` with adjusted p values.
    """
    if method != "mann_whitney":
        raise ValueError(f"unsupported method {method!r}")
    if correction not in ("bonferroni", "none"):
        raise ValueError(f"unsupported correction {correction!r}")
    items = list(groups.items()) if isinstance(groups, dict) else list(enumerate(groups))
    if len(items) < 2:
        raise DegenerateSample("need at least two groups")
    pairs = list(itertools.combinations(range(len(items)), 2))
    factor = len(pairs) if correction == "bonferroni" else 1
    out = {}
    for i, j in pairs:
        (a, xa), (b, xb) = items[i], items[j]
        res = mann_whitney_u(xa, xb)
        out[(a, b)] = TestResult(res.statistic, _clamp01(res.p_value * factor),
                                 f"{res.method}+{correction}", res.n)
    return out
