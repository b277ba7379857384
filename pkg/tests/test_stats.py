import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from bemdsvr.errors import DegenerateSeriesError, DimensionMismatchError, UnsupportedDesignError
from bemdsvr.interval_ts import IntervalSeries
from bemdsvr.stats import (
    AccuracySample,
    f_sf,
    one_way_anova,
    q_crit,
    theil_u,
    theil_u_interval,
    tukey_hsd,
)


def groups_of(*vals):
    return [AccuracySample(f"m{i}", v) for i, v in enumerate(vals)]


class TestTheilU:
    def test_worked_case(self):
        actual = IntervalSeries.from_bounds([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        fc = IntervalSeries.from_bounds([0.5, 1.5], [1.5, 2.5], start=(2000, 2))
        assert theil_u_interval(actual, fc) == pytest.approx(0.5, abs=1e-12)

    @settings(max_examples=30)
    @given(st.integers(2, 40), st.integers(0, 2**16))
    def test_naive_is_one_perfect_is_zero(self, n, seed):
        rng = np.random.default_rng(seed)
        lo = np.cumsum(rng.normal(size=n + 1))
        up = lo + rng.uniform(0, 2, n + 1)
        assert abs(theil_u(lo, up, lo[:-1], up[:-1]) - 1) <= 1e-12
        assert theil_u(lo, up, lo[1:], up[1:]) == 0.0

    @settings(max_examples=30)
    @given(st.integers(0, 2**16), st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariant(self, seed, a, b):
        rng = np.random.default_rng(seed)
        lo = rng.normal(size=9)
        up = lo + 1
        pl, pu = lo[1:] + rng.normal(size=8), up[1:] + rng.normal(size=8)
        u1 = theil_u(lo, up, pl, pu)
        u2 = theil_u(a * lo + b, a * up + b, a * pl + b, a * pu + b)
        assert u2 == pytest.approx(u1, rel=1e-9)

    def test_errors(self):
        with pytest.raises(DegenerateSeriesError):
            theil_u([1, 1, 1], [2, 2, 2], [1, 1], [2, 2])
        with pytest.raises(DimensionMismatchError):
            theil_u([1, 2], [2, 3], [1, 1], [2, 2])
        actual = IntervalSeries.from_bounds([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        fc = IntervalSeries.from_bounds([0.5, 1.5], [1.5, 2.5], start=(2001, 2))
        with pytest.raises(DimensionMismatchError):
            theil_u_interval(actual, fc)


class TestAnova:
    def test_hand_case(self):
        F, p = one_way_anova(groups_of([1, 2, 3], [2, 3, 4], [3, 4, 5]))
        assert F == pytest.approx(3.0, abs=1e-12)
        assert p == pytest.approx(sps.f.sf(3.0, 2, 6), abs=1e-12)

    def test_identical_groups(self):
        assert one_way_anova(groups_of([1, 2, 3], [1, 2, 3])) == (0.0, 1.0)
        assert one_way_anova(groups_of([2, 2], [2, 2], [2, 2])) == (0.0, 1.0)

    def test_two_groups_pooled_t(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=12), rng.normal(0.5, size=12)
        F, p = one_way_anova([a, b])
        t = sps.ttest_ind(a, b).statistic
        assert F == pytest.approx(t**2, abs=1e-9)

    @settings(max_examples=30)
    @given(st.integers(2, 6), st.integers(2, 8), st.integers(0, 2**16))
    def test_matches_scipy(self, k, n, seed):
        rng = np.random.default_rng(seed)
        data = [rng.normal(rng.normal(), 1, n) for _ in range(k)]
        F, p = one_way_anova(data)
        ref = sps.f_oneway(*data)
        assert F >= 0 and 0 <= p <= 1
        assert F == pytest.approx(ref.statistic, rel=1e-9)
        assert p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-14)

    def test_zero_within_variance(self):
        assert one_way_anova(groups_of([1, 1], [2, 2])) == (math.inf, 0.0)

    def test_f_tail(self):
        assert f_sf(0.0, 2, 6) == 1.0
        assert f_sf(math.inf, 2, 6) == 0.0

    def test_design_errors(self):
        with pytest.raises(UnsupportedDesignError):
            one_way_anova(groups_of([1, 2, 3]))
        with pytest.raises(UnsupportedDesignError):
            one_way_anova(groups_of([1], [2, 3]))

    def test_negative_accuracy_rejected(self):
        with pytest.raises(ValueError):
            AccuracySample("m", [0.5, -0.1])


class TestTukey:
    def test_q_crit_table(self):
        assert q_crit(0.05, 3, 6) == pytest.approx(4.339, abs=1e-3)
        assert q_crit(0.05, 2, math.inf) == pytest.approx(2.772, abs=1e-3)
        assert q_crit(0.01, 4, 20) == pytest.approx(5.018, abs=1e-3)

    @pytest.mark.parametrize("df", [21, 27, 35, 50, 90, 200, 1000])
    @pytest.mark.parametrize("k", [2, 5, 10])
    def test_q_crit_interpolation(self, k, df):
        exact = sps.studentized_range.ppf(0.95, k, df)
        assert q_crit(0.05, k, df) == pytest.approx(exact, abs=0.01)

    def test_q_crit_errors(self):
        with pytest.raises(UnsupportedDesignError):
            q_crit(0.1, 3, 10)
        with pytest.raises(UnsupportedDesignError):
            q_crit(0.05, 11, 10)
        with pytest.raises(UnsupportedDesignError):
            q_crit(0.05, 3, 1)

    def test_hand_case_not_significant(self):
        rep = tukey_hsd(groups_of([1, 2, 3], [2, 3, 4], [3, 4, 5]))
        q = {(p.model_a, p.model_b): p.q for p in rep.pairs}
        assert q[("m0", "m2")] == pytest.approx(2 / math.sqrt(1 / 3), abs=1e-12)
        assert not any(p.significant for p in rep.pairs)
        assert rep.ranking_line() == "m0 < m1 < m2"

    def test_identical_groups(self):
        rep = tukey_hsd(groups_of([1, 2, 3], [1, 2, 3], [1, 2, 3]))
        assert rep.F == 0 and rep.p == 1
        assert not any(p.significant for p in rep.pairs)

    def test_separated_groups(self):
        j = [1e-6, 2e-6, 0.0]
        rep = tukey_hsd(groups_of([0 + x for x in j], [10 + x for x in j], [20 + x for x in j]))
        assert all(p.significant for p in rep.pairs)
        assert rep.ranking_line() == "m0 <* m1 <* m2"

    @settings(max_examples=25)
    @given(st.integers(2, 6), st.integers(3, 10), st.integers(0, 2**16))
    def test_against_scipy(self, k, n, seed):
        rng = np.random.default_rng(seed)
        data = [rng.normal(rng.normal(0, 1.5), 1, n) for _ in range(k)]
        rep = tukey_hsd(data)
        rep01 = tukey_hsd(data, alpha=0.01)
        ref = sps.tukey_hsd(*data)
        names = [f"g{i + 1}" for i in range(k)]
        for pc, pc01 in zip(rep.pairs, rep01.pairs):
            a, b = names.index(pc.model_a), names.index(pc.model_b)
            assert rep.significant(pc.model_b, pc.model_a) == pc.significant
            if pc01.significant:
                assert pc.significant
            pval = ref.pvalue[a, b]
            if abs(pval - 0.05) > 0.005:
                assert pc.significant == (pval < 0.05)
        assert list(rep.ranking) == [names[i] for i in np.argsort([d.mean() for d in data], kind="stable")]

    def test_unequal_sizes(self):
        with pytest.raises(UnsupportedDesignError):
            tukey_hsd(groups_of([1, 2, 3], [1, 2]))

    def test_rendering(self):
        rep = tukey_hsd(
            [AccuracySample("BEMD", [0.5, 0.6, 0.55]), AccuracySample("Naive", [1.0, 1.0, 1.0])]
        )
        text = rep.render_text()
        assert "BEMD <* Naive" in text and "ANOVA F" in text
        rows = rep.to_csv().splitlines()
        assert rows[0] == "model_a,model_b,mean_diff,q,significant"
        assert rows[1].startswith("BEMD,Naive,") and rows[1].endswith(",1")
