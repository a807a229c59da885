"""Popularity binning, Gaussian KDE, and nonparametric two-sample tests.

The Anderson-Darling test uses the Scholz-Stephens k-sample rank statistic
(k = 2) in its midrank form, which is exact under ties. P-values come either
from interpolation of the published critical-value table (clipped to its
[0.001, 0.25] range) or from permutation of the pooled sample: exhaustive
enumeration of splits when their number is small, seeded Monte Carlo
otherwise. Permutation p-values count splits whose statistic strictly
exceeds the observed one, plus the observed split itself.
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cloud import EccentricityRecord
from .errors import DataFormatError

DEFAULT_BANDWIDTH = 5.0
DEFAULT_GRID_POINTS = 512
DEFAULT_GRID_SPAN = 3.0
DEFAULT_N_PERM = 9999
# enumerate splits exhaustively when C(N, n) is at most this
EXACT_SPLIT_LIMIT = 20_000
MANN_WHITNEY_EXACT_LIMIT = 12
# two split statistics within this relative distance are tied, not "greater";
# guards against summation-order rounding flipping strict comparisons
SPLIT_TIE_RTOL = 1e-9


# ---------------------------------------------------------------------------
# popularity binning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PopularityBinning:
    """Ascending like-count cut points partitioning [0, inf) into labeled bins."""

    thresholds: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if list(self.thresholds) != sorted(set(self.thresholds)):
            raise DataFormatError(f"thresholds must be strictly ascending: {self.thresholds}")
        if len(self.labels) != len(self.thresholds) + 1:
            raise DataFormatError("need exactly one more label than thresholds")

    @classmethod
    def from_thresholds(cls, thresholds: Sequence[int]) -> "PopularityBinning":
        thresholds = tuple(thresholds)
        if len(thresholds) == 0:
            labels = ("all",)
        elif len(thresholds) == 1:
            labels = ("low", "high")
        elif len(thresholds) == 2:
            labels = ("low", "medium", "high")
        else:
            labels = (f"le_{thresholds[0]}",
                      *(f"{lo + 1}_{hi}" for lo, hi in zip(thresholds, thresholds[1:])),
                      f"gt_{thresholds[-1]}")
        return cls(thresholds=thresholds, labels=labels)

    def label_for(self, likes: int) -> str:
        return self.labels[bisect_left(self.thresholds, likes)]


def bin_by_popularity(
    records: Iterable[EccentricityRecord],
    binning: PopularityBinning | Sequence[int],
) -> dict[str, list[float]]:
    """Group defined eccentricities by like-count bin.

    A record with likes L lands in bin i when thresholds[i-1] < L <=
    thresholds[i]; records beyond the last threshold land in the last bin.
    Records with undefined eccentricity are skipped.
    """
    if not isinstance(binning, PopularityBinning):
        binning = PopularityBinning.from_thresholds(binning)
    out: dict[str, list[float]] = {label: [] for label in binning.labels}
    for r in records:
        if r.eccentricity is None:
            continue
        out[binning.label_for(r.likes)].append(r.eccentricity)
    return out


# ---------------------------------------------------------------------------
# kernel density estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n_samples: int


def default_grid(samples: Sequence[float], bandwidth: float,
                 points: int = DEFAULT_GRID_POINTS,
                 span: float = DEFAULT_GRID_SPAN) -> np.ndarray:
    """Ascending grid covering [min - span*h, max + span*h]."""
    samples = np.asarray(samples, dtype=float)
    return np.linspace(samples.min() - span * bandwidth,
                       samples.max() + span * bandwidth, points)


def kde(samples: Sequence[float], bandwidth: float, grid: np.ndarray) -> DensityCurve:
    """Gaussian kernel density estimate on an ascending grid.

    density(x) = (1 / (n h sqrt(2 pi))) * sum_i exp(-(x - s_i)^2 / (2 h^2))
    """
    samples = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if samples.size == 0:
        raise DataFormatError("kde needs at least one sample")
    if bandwidth <= 0:
        raise DataFormatError(f"bandwidth must be positive, got {bandwidth}")
    if np.any(np.diff(grid) < 0):
        raise DataFormatError("grid must be ascending")
    density = np.zeros(grid.size)
    for start in range(0, samples.size, 4096):
        chunk = samples[start:start + 4096]
        scaled = (grid[None, :] - chunk[:, None]) / bandwidth
        density += np.exp(-0.5 * scaled**2).sum(axis=0)
    density /= samples.size * bandwidth * math.sqrt(2.0 * math.pi)
    return DensityCurve(grid=grid, density=density, bandwidth=bandwidth,
                        n_samples=int(samples.size))


# ---------------------------------------------------------------------------
# Anderson-Darling two-sample test
# ---------------------------------------------------------------------------

class _PooledSplits:
    """Precomputation over a pooled sample for repeated split statistics.

    The distinct values, their multiplicities, and the per-value denominators
    of the midrank statistic depend only on the pooled sample, so they are
    shared across all splits during permutation.
    """

    def __init__(self, pooled: np.ndarray):
        pooled = np.asarray(pooled, dtype=float)
        self.n_total = pooled.size
        self.values, self.value_index, counts = np.unique(
            pooled, return_inverse=True, return_counts=True)
        self.multiplicity = counts.astype(float)
        less = np.concatenate(([0.0], np.cumsum(counts)[:-1]))
        self.pooled_midcount = less + self.multiplicity / 2.0  # B_j
        n = float(self.n_total)
        self.denominator = (self.pooled_midcount * (n - self.pooled_midcount)
                            - n * self.multiplicity / 4.0)
        self.degenerate = self.values.size < 2

    def statistic(self, x_index: np.ndarray) -> float:
        """Midrank two-sample statistic for the split whose first sample is
        the pooled elements at positions ``x_index``."""
        n = float(self.n_total)
        nx = float(x_index.size)
        ny = n - nx
        counts_x = np.bincount(self.value_index[x_index],
                               minlength=self.values.size).astype(float)
        counts_y = self.multiplicity - counts_x
        total = 0.0
        for counts, size in ((counts_x, nx), (counts_y, ny)):
            less = np.concatenate(([0.0], np.cumsum(counts)[:-1]))
            mid = less + counts / 2.0  # M_ij
            term = (self.multiplicity / n) * (n * mid - size * self.pooled_midcount)**2
            total += float(np.sum(term / self.denominator)) / size
        return (n - 1.0) / n * total


def ad_2sample_statistic(x: Sequence[float], y: Sequence[float]) -> float:
    """Scholz-Stephens two-sample rank statistic, midrank (tie-aware) version."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pooled = _PooledSplits(np.concatenate([x, y]))
    if pooled.degenerate:
        return 0.0
    return pooled.statistic(np.arange(x.size))


# critical values of the standardized statistic: b0 + b1/sqrt(m) + b2/m
_AD_SIG = np.array([0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001])
_AD_B0 = np.array([0.675, 1.281, 1.645, 1.960, 2.326, 2.573, 3.085])
_AD_B1 = np.array([-0.245, 0.250, 0.678, 1.149, 1.822, 2.364, 3.615])
_AD_B2 = np.array([-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154])


def ad_standardized(a2: float, n_x: int, n_y: int) -> float:
    """Standardize the two-sample statistic: (A2 - 1) / sigma with sigma from
    the statistic's finite-sample variance."""
    n_total = n_x + n_y
    k = 2
    h_sum = float(np.sum(1.0 / np.arange(1, n_total)))
    seq = np.cumsum(1.0 / np.arange(n_total - 1, 1, -1))
    g_sum = float(np.sum(seq / np.arange(2, n_total)))
    cap_h = 1.0 / n_x + 1.0 / n_y
    a = (4.0 * g_sum - 6.0) * (k - 1) + (10.0 - 6.0 * g_sum) * cap_h
    b = ((2.0 * g_sum - 4.0) * k**2 + 8.0 * h_sum * k
         + (2.0 * g_sum - 14.0 * h_sum - 4.0) * cap_h - 8.0 * h_sum
         + 4.0 * g_sum - 6.0)
    c = ((6.0 * h_sum + 2.0 * g_sum - 2.0) * k**2
         + (4.0 * h_sum - 4.0 * g_sum + 6.0) * k
         + (2.0 * h_sum - 6.0) * cap_h + 4.0 * h_sum)
    d = (2.0 * h_sum + 6.0) * k**2 - 4.0 * h_sum * k
    sigma_sq = ((a * n_total**3 + b * n_total**2 + c * n_total + d)
                / ((n_total - 1.0) * (n_total - 2.0) * (n_total - 3.0)))
    return (a2 - (k - 1)) / math.sqrt(sigma_sq)


def _ad_table_p(a2: float, n_x: int, n_y: int) -> float:
    """Interpolate the p-value from the published critical-value table.

    The standardized statistic is compared against the two-sample critical
    curve; log p is interpolated linearly between table columns and clipped
    to the table's [0.001, 0.25] range.
    """
    t = ad_standardized(a2, n_x, n_y)
    critical = _AD_B0 + _AD_B1 + _AD_B2  # b0 + b1/sqrt(m) + b2/m at m = 1
    if t <= critical[0]:
        return float(_AD_SIG[0])
    if t >= critical[-1]:
        return float(_AD_SIG[-1])
    return float(math.exp(np.interp(t, critical, np.log(_AD_SIG))))


def ad_test_2sample(
    x: Sequence[float],
    y: Sequence[float],
    p_method: str = "table",
    n_perm: int = DEFAULT_N_PERM,
    seed: int = 0,
) -> tuple[float, float]:
    """Two-sample Anderson-Darling test; returns (statistic, p).

    p_method "table" interpolates Scholz-Stephens critical values (p clipped
    to [0.001, 0.25]); "permutation" enumerates all pooled splits when there
    are at most EXACT_SPLIT_LIMIT of them, otherwise draws n_perm seeded
    shuffles. Splits count as more extreme only when their statistic exceeds
    the observed one by more than SPLIT_TIE_RTOL relative, so equal-valued
    splits are ties regardless of rounding. A pooled sample with a single
    distinct value is degenerate and reports p = 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or y.size < 2:
        raise DataFormatError("each sample needs at least 2 observations")
    if p_method not in ("table", "permutation"):
        raise DataFormatError(f"unknown p_method {p_method!r}")
    pooled = _PooledSplits(np.concatenate([x, y]))
    if pooled.degenerate:
        return 0.0, 1.0
    observed = pooled.statistic(np.arange(x.size))
    if p_method == "table":
        return observed, _ad_table_p(observed, x.size, y.size)

    n_total = x.size + y.size
    threshold = observed + SPLIT_TIE_RTOL * (1.0 + abs(observed))
    n_splits = math.comb(n_total, x.size)
    if n_splits <= EXACT_SPLIT_LIMIT:
        greater = sum(
            1 for combo in itertools.combinations(range(n_total), x.size)
            if pooled.statistic(np.asarray(combo)) > threshold
        )
        return observed, (greater + 1) / n_splits
    rng = np.random.default_rng(seed)
    greater = 0
    positions = np.arange(n_total)
    for _ in range(n_perm):
        chosen = rng.permutation(positions)[:x.size]
        if pooled.statistic(chosen) > threshold:
            greater += 1
    return observed, (greater + 1) / (n_perm + 1)


def bonferroni(pvals: Sequence[float], m: int) -> list[float]:
    """Multiply each p-value by m, capping at 1."""
    if m < 1:
        raise DataFormatError(f"m must be >= 1, got {m}")
    out = []
    for p in pvals:
        if not 0.0 <= p <= 1.0:
            raise DataFormatError(f"p-value out of range: {p}")
        out.append(min(1.0, m * p))
    return out


# ---------------------------------------------------------------------------
# Mann-Whitney U test
# ---------------------------------------------------------------------------

def _midranks(a: np.ndarray) -> np.ndarray:
    values, inverse, counts = np.unique(a, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    group_rank = starts + (counts + 1) / 2.0
    return group_rank[inverse]


def mann_whitney(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Two-sided Mann-Whitney test; returns (U, p) with U counted for x.

    U = #{(i, j): x_i > y_j} + half the ties. Exact enumeration of all pooled
    splits supplies the p-value when the samples hold at most 12 observations
    together; otherwise the normal approximation with tie-corrected variance
    and continuity correction is used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.size, y.size
    if n < 1 or m < 1:
        raise DataFormatError("each sample needs at least 1 observation")
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    u = float(ranks[:n].sum() - n * (n + 1) / 2.0)
    mu = n * m / 2.0

    if n + m <= MANN_WHITNEY_EXACT_LIMIT:
        observed_dev = abs(u - mu)
        count = 0
        total = 0
        for combo in itertools.combinations(range(n + m), n):
            u_split = float(ranks[list(combo)].sum() - n * (n + 1) / 2.0)
            if abs(u_split - mu) >= observed_dev - 1e-12:
                count += 1
            total += 1
        return u, count / total

    n_total = n + m
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(float)**3 - counts)) / (n_total * (n_total - 1.0))
    variance = n * m / 12.0 * ((n_total + 1.0) - tie_term)
    if variance <= 0.0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(variance)
    return u, min(1.0, math.erfc(z / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# per-bin summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinStats:
    label: str
    n: int
    mean: float | None
    curve: DensityCurve | None


@dataclass(frozen=True)
class PairTest:
    label_a: str
    label_b: str
    a2: float
    p_raw: float
    p_bonferroni: float


@dataclass(frozen=True)
class BinSummary:
    bins: list[BinStats]
    tests: list[PairTest]
    notices: list[str]


def bin_summary(
    bins: dict[str, list[float]],
    bandwidth: float = DEFAULT_BANDWIDTH,
    grid: np.ndarray | None = None,
    p_method: str = "table",
    n_perm: int = DEFAULT_N_PERM,
    seed: int = 0,
) -> BinSummary:
    """Per-bin mean and density on a shared grid, plus pairwise AD tests.

    Pairwise tests run between every pair of bins holding at least two
    samples and are Bonferroni-corrected by the number of tests performed;
    smaller bins are reported but skipped with a notice.
    """
    pooled = [v for samples in bins.values() for v in samples]
    if grid is None and pooled:
        grid = default_grid(pooled, bandwidth)
    stats_rows: list[BinStats] = []
    notices: list[str] = []
    testable: list[str] = []
    for label, samples in bins.items():
        n = len(samples)
        mean = float(np.mean(samples)) if n else None
        curve = kde(samples, bandwidth, grid) if n else None
        stats_rows.append(BinStats(label=label, n=n, mean=mean, curve=curve))
        if n >= 2:
            testable.append(label)
        else:
            notices.append(f"bin {label!r} has {n} sample(s); tests skipped")
    pairs = list(itertools.combinations(testable, 2))
    tests: list[PairTest] = []
    if pairs:
        raw = []
        for a, b in pairs:
            a2, p = ad_test_2sample(bins[a], bins[b], p_method=p_method,
                                    n_perm=n_perm, seed=seed)
            raw.append((a, b, a2, p))
        corrected = bonferroni([p for _, _, _, p in raw], len(pairs))
        tests = [PairTest(a, b, a2, p, pc)
                 for (a, b, a2, p), pc in zip(raw, corrected)]
    return BinSummary(bins=stats_rows, tests=tests, notices=notices)
