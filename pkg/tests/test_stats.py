import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ideadrift.cloud import EccentricityRecord
from ideadrift.errors import DataFormatError
from ideadrift.stats import (
    PopularityBinning, ad_2sample_statistic, ad_test_2sample, bin_by_popularity,
    bin_summary, bonferroni, default_grid, kde, mann_whitney,
)

# ---------------------------------------------------------------------------
# independent oracles, written from the definitions with plain loops
# ---------------------------------------------------------------------------

def naive_ad_statistic(x, y):
    """Midrank two-sample statistic computed scalar-by-scalar."""
    pooled = sorted(list(x) + list(y))
    distinct = sorted(set(pooled))
    n_total = len(pooled)
    total = 0.0
    for sample in (list(x), list(y)):
        size = len(sample)
        inner = 0.0
        for value in distinct:
            mult = pooled.count(value)
            b_mid = sum(1 for v in pooled if v < value) + mult / 2.0
            m_mid = (sum(1 for v in sample if v < value)
                     + sum(1 for v in sample if v == value) / 2.0)
            denom = b_mid * (n_total - b_mid) - n_total * mult / 4.0
            inner += (mult / n_total) * (n_total * m_mid - size * b_mid) ** 2 / denom
        total += inner / size
    return (n_total - 1) / n_total * total


def exhaustive_ad_p(x, y):
    """Share of pooled splits at least as extreme as the observed one:
    strictly-greater statistics (beyond the 1e-9 tie band) plus the observed
    split itself."""
    pooled = list(x) + list(y)
    observed = naive_ad_statistic(x, y)
    threshold = observed + 1e-9 * (1.0 + abs(observed))
    greater = 0
    total = 0
    for combo in itertools.combinations(range(len(pooled)), len(x)):
        xs = [pooled[i] for i in combo]
        ys = [pooled[i] for i in range(len(pooled)) if i not in combo]
        if naive_ad_statistic(xs, ys) > threshold:
            greater += 1
        total += 1
    return (greater + 1) / total


def pairwise_u(x, y):
    u = 0.0
    for xi in x:
        for yj in y:
            if xi > yj:
                u += 1.0
            elif xi == yj:
                u += 0.5
    return u


def exhaustive_mw_p(x, y):
    pooled = list(x) + list(y)
    n = len(x)
    mu = n * len(y) / 2.0
    observed = abs(pairwise_u(x, y) - mu)
    count = 0
    total = 0
    for combo in itertools.combinations(range(len(pooled)), n):
        xs = [pooled[i] for i in combo]
        ys = [pooled[i] for i in range(len(pooled)) if i not in combo]
        if abs(pairwise_u(xs, ys) - mu) >= observed - 1e-12:
            count += 1
        total += 1
    return count / total


# ---------------------------------------------------------------------------
# binning
# ---------------------------------------------------------------------------

def rec(likes, ecc=1.0):
    return EccentricityRecord(post_id=f"p{likes}-{ecc}", author="u", created_at=0,
                              likes=likes, eccentricity=ecc, self_eccentricity=None,
                              cloud_size=1, self_cloud_size=0)


class TestBinning:
    def test_three_level_thresholds(self):
        binning = PopularityBinning.from_thresholds((10, 100))
        assert binning.label_for(10) == "low"
        assert binning.label_for(11) == "medium"
        assert binning.label_for(100) == "medium"
        assert binning.label_for(101) == "high"

    def test_two_level_thresholds(self):
        binning = PopularityBinning.from_thresholds((2,))
        assert binning.label_for(2) == "low"
        assert binning.label_for(3) == "high"

    def test_zero_likes_in_first_bin(self):
        for thresholds in ((2,), (10, 100), ()):
            binning = PopularityBinning.from_thresholds(thresholds)
            assert binning.label_for(0) == binning.labels[0]

    def test_empty_thresholds_single_bin(self):
        binning = PopularityBinning.from_thresholds(())
        assert binning.labels == ("all",)

    def test_undefined_eccentricity_excluded(self):
        undefined = EccentricityRecord("px", "u", 0, 5, None, None, 0, 0)
        bins = bin_by_popularity([rec(1, 2.0), undefined], (10, 100))
        assert bins == {"low": [2.0], "medium": [], "high": []}

    def test_unsorted_thresholds_rejected(self):
        with pytest.raises(DataFormatError):
            PopularityBinning.from_thresholds((100, 10))


# ---------------------------------------------------------------------------
# kernel density estimation
# ---------------------------------------------------------------------------

class TestKde:
    def test_single_sample_peak_value(self):
        curve = kde([0.0], 5.0, np.array([0.0]))
        assert curve.density[0] == pytest.approx(1 / (5 * math.sqrt(2 * math.pi)),
                                                 rel=1e-12)

    def test_symmetry(self):
        grid = np.linspace(-4, 4, 101)
        curve = kde([-1.0, 1.0], 1.0, grid)
        assert_allclose(curve.density, curve.density[::-1], rtol=1e-12)

    def test_integrates_to_one(self):
        rng = np.random.default_rng(0)
        samples = rng.normal(3, 10, 200)
        h = 5.0
        grid = np.linspace(samples.min() - 6 * h, samples.max() + 6 * h, 1024)
        curve = kde(samples, h, grid)
        integral = np.trapezoid(curve.density, grid)
        assert integral == pytest.approx(1.0, abs=1e-3)

    def test_shift_equivariance(self):
        samples = [0.0, 1.0, 5.0]
        grid = np.linspace(-10, 15, 257)
        shift = 7.25
        base = kde(samples, 2.0, grid)
        moved = kde([s + shift for s in samples], 2.0, grid + shift)
        assert_allclose(moved.density, base.density, rtol=1e-12)

    def test_empty_samples_rejected(self):
        with pytest.raises(DataFormatError):
            kde([], 5.0, np.array([0.0]))

    def test_bad_bandwidth_rejected(self):
        with pytest.raises(DataFormatError):
            kde([1.0], 0.0, np.array([0.0]))

    def test_default_grid_span(self):
        grid = default_grid([0.0, 10.0], 5.0)
        assert grid[0] == -15.0 and grid[-1] == 25.0 and grid.size == 512


# ---------------------------------------------------------------------------
# Anderson-Darling
# ---------------------------------------------------------------------------

class TestAdStatistic:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_naive_implementation(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 6, rng.integers(2, 9)).astype(float)
        y = rng.integers(0, 6, rng.integers(2, 9)).astype(float)
        if np.unique(np.concatenate([x, y])).size < 2:
            pytest.skip("degenerate draw")
        assert ad_2sample_statistic(x, y) == pytest.approx(
            naive_ad_statistic(x, y), rel=1e-12)

    def test_standardized_statistic_matches_scipy(self):
        import warnings
        scipy_stats = pytest.importorskip("scipy.stats")
        from ideadrift.stats import ad_standardized
        rng = np.random.default_rng(1)
        for _ in range(25):
            x = rng.normal(0, 1, rng.integers(4, 30))
            y = rng.normal(0.3, 1.2, rng.integers(4, 30))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                reference = scipy_stats.anderson_ksamp([x, y]).statistic
            t = ad_standardized(ad_2sample_statistic(x, y), x.size, y.size)
            assert t == pytest.approx(reference, rel=1e-9, abs=1e-12)


class TestAdTest:
    def test_identical_multisets_high_p(self):
        x = [1.0, 2.0, 3.0]
        _, p = ad_test_2sample(x, list(x), p_method="permutation")
        assert p >= 0.5

    def test_fully_separated_4v4_most_extreme_split(self):
        _, p = ad_test_2sample([1, 2, 3, 4], [101, 102, 103, 104],
                               p_method="permutation")
        assert p == pytest.approx(1 / 70, rel=1e-12)

    @pytest.mark.parametrize("nx,ny", [(2, 2), (2, 3), (3, 3), (2, 4), (3, 4),
                                       (4, 4), (2, 6), (3, 5)])
    def test_exhaustive_permutation_matches_oracle(self, nx, ny):
        rng = np.random.default_rng(nx * 10 + ny)
        x = rng.integers(0, 5, nx).astype(float)
        y = rng.integers(0, 5, ny).astype(float)
        if np.unique(np.concatenate([x, y])).size < 2:
            x[0] += 1.0
        _, p = ad_test_2sample(x, y, p_method="permutation")
        assert p == exhaustive_ad_p(x, y)

    def test_degenerate_pooled_sample(self):
        a2, p = ad_test_2sample([2.0, 2.0], [2.0, 2.0, 2.0])
        assert p == 1.0

    def test_monte_carlo_path_is_seeded(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, 12)
        y = rng.normal(1, 1, 12)  # C(24, 12) is far over the exact limit
        r1 = ad_test_2sample(x, y, p_method="permutation", n_perm=500, seed=9)
        r2 = ad_test_2sample(x, y, p_method="permutation", n_perm=500, seed=9)
        r3 = ad_test_2sample(x, y, p_method="permutation", n_perm=500, seed=10)
        assert r1 == r2
        assert 0 < r1[1] <= 1
        assert r1 != r3 or True  # different seeds may still agree by chance

    def test_table_p_detects_strong_separation(self):
        x = np.arange(50.0)
        y = np.arange(50.0) + 100
        _, p = ad_test_2sample(x, y, p_method="table")
        assert p == pytest.approx(0.001)

    def test_table_p_capped_for_similar_samples(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, 40)
        _, p = ad_test_2sample(x, x.copy(), p_method="table")
        assert p == pytest.approx(0.25)

    def test_sample_size_precondition(self):
        with pytest.raises(DataFormatError):
            ad_test_2sample([1.0], [2.0, 3.0])


class TestBonferroni:
    def test_basic(self):
        assert bonferroni([0.01], 3) == [pytest.approx(0.03)]

    def test_cap_at_one(self):
        assert bonferroni([0.5], 3) == [1.0]

    def test_identity_at_m1(self):
        ps = [0.1, 0.9, 0.0, 1.0]
        assert bonferroni(ps, 1) == ps

    def test_never_decreases(self):
        ps = [0.001, 0.2, 0.7]
        for m in (1, 2, 5):
            assert all(c >= p for c, p in zip(bonferroni(ps, m), ps))

    def test_rejects_bad_values(self):
        with pytest.raises(DataFormatError):
            bonferroni([1.5], 2)
        with pytest.raises(DataFormatError):
            bonferroni([0.5], 0)


# ---------------------------------------------------------------------------
# Mann-Whitney
# ---------------------------------------------------------------------------

class TestMannWhitney:
    def test_complete_separation(self):
        u, _ = mann_whitney([1, 2, 3], [4, 5, 6])
        assert u == 0.0

    def test_exact_p_two_vs_two(self):
        u, p = mann_whitney([1, 2], [3, 4])
        assert u == 0.0
        assert p == pytest.approx(1 / 3, rel=1e-12)

    def test_identical_samples_half_u(self):
        x = [1.0, 2.0, 3.0]
        u, _ = mann_whitney(x, list(x))
        assert u == len(x) * len(x) / 2

    def test_u_complement_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.integers(0, 10, rng.integers(1, 15)).astype(float)
            y = rng.integers(0, 10, rng.integers(1, 15)).astype(float)
            u_xy, _ = mann_whitney(x, y)
            u_yx, _ = mann_whitney(y, x)
            assert u_xy + u_yx == pytest.approx(len(x) * len(y))

    def test_u_matches_pairwise_count(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            x = rng.integers(0, 6, rng.integers(1, 20)).astype(float)
            y = rng.integers(0, 6, rng.integers(1, 20)).astype(float)
            u, _ = mann_whitney(x, y)
            assert u == pytest.approx(pairwise_u(x, y))

    @pytest.mark.parametrize("seed", range(10))
    def test_exact_enumeration_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 12 - n + 1))
        x = rng.integers(0, 4, n).astype(float)
        y = rng.integers(0, 4, m).astype(float)
        _, p = mann_whitney(x, y)
        assert p == exhaustive_mw_p(x, y)

    def test_asymptotic_agrees_with_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(6)
        for _ in range(30):
            x = rng.integers(0, 9, rng.integers(8, 40)).astype(float)
            y = rng.integers(0, 9, rng.integers(8, 40)).astype(float)
            u, p = mann_whitney(x, y)
            ref = scipy_stats.mannwhitneyu(x, y, alternative="two-sided",
                                           method="asymptotic")
            assert u == pytest.approx(ref.statistic)
            assert p == pytest.approx(ref.pvalue, rel=1e-9)

    def test_all_ties_p_one(self):
        x = [5.0] * 10
        _, p = mann_whitney(x, x * 2)
        assert p == 1.0


# ---------------------------------------------------------------------------
# bin summaries
# ---------------------------------------------------------------------------

class TestBinSummary:
    def test_single_bin_no_tests(self):
        summary = bin_summary({"all": [1.0, 2.0, 3.0]}, bandwidth=1.0)
        assert summary.tests == []
        assert summary.bins[0].curve is not None
        assert summary.bins[0].mean == pytest.approx(2.0)

    def test_identical_bins_not_significant(self):
        data = list(np.linspace(0, 8, 30))
        summary = bin_summary({"a": data, "b": list(data)}, bandwidth=1.0,
                              p_method="permutation", n_perm=400, seed=1)
        (test,) = summary.tests
        assert test.p_raw >= 0.5

    def test_small_bin_skipped_with_notice(self):
        summary = bin_summary({"a": [1.0, 2.0, 3.0], "b": [9.0]}, bandwidth=1.0)
        assert summary.tests == []
        assert any("b" in n for n in summary.notices)
        by_label = {b.label: b for b in summary.bins}
        assert by_label["b"].mean == pytest.approx(9.0)

    def test_bonferroni_uses_number_of_pairs(self):
        rng = np.random.default_rng(0)
        bins = {label: list(rng.normal(loc, 1, 30))
                for label, loc in (("a", 0.0), ("b", 2.0), ("c", 5.0))}
        summary = bin_summary(bins, bandwidth=1.0)
        assert len(summary.tests) == 3
        for t in summary.tests:
            assert t.p_bonferroni == pytest.approx(min(1.0, 3 * t.p_raw))

    def test_curves_share_grid(self):
        bins = {"a": [0.0, 1.0, 2.0], "b": [10.0, 11.0, 12.0]}
        summary = bin_summary(bins, bandwidth=1.0)
        grids = [b.curve.grid for b in summary.bins]
        assert_allclose(grids[0], grids[1])

    def test_handles_wildly_unequal_sizes(self):
        rng = np.random.default_rng(1)
        bins = {
            "low": list(rng.normal(10, 3, 20000)),
            "medium": list(rng.normal(11, 3, 300)),
            "high": list(rng.normal(13, 3, 15)),
        }
        summary = bin_summary(bins, bandwidth=5.0)
        assert len(summary.tests) == 3
        assert all(np.isfinite(t.a2) for t in summary.tests)
        assert all(0 < t.p_raw <= 1 for t in summary.tests)
