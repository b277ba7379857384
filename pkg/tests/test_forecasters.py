import dataclasses

import numpy as np
import pytest

from bemdsvr.errors import InsufficientHistoryError, RankDeficientError
from bemdsvr.forecasters import (
    ComponentStack,
    EmdSvrForecaster,
    HoltIntervalForecaster,
    PipelineConfig,
    VecForecaster,
    bemd_svr_forecast,
    build_models,
    desk_grids,
    emd_svr_forecast,
    holt_interval_forecast,
    lag_embed,
    naive_forecast,
    repair_interval,
    rolling_evaluation,
    vec_forecast,
)
from bemdsvr.interval_ts import TRANS2, Interval, IntervalSeries, log_transform
from bemdsvr.stats import theil_u
from bemdsvr.synthetic import gen_synthetic
from oracles import simple_ols

DESK = PipelineConfig(**desk_grids())


def series(lower, upper, **kw):
    return IntervalSeries.from_bounds(np.asarray(lower, float), np.asarray(upper, float), **kw)


def const(n, a=3.0, b=4.5):
    return series(np.full(n, a), np.full(n, b))


class TestNaive:
    def test_last_interval(self):
        assert naive_forecast(series([1, 2, 3], [2, 3, 4])) == Interval(3, 4)
        assert naive_forecast(series([7], [9])) == Interval(7, 9)


class TestSvrPipelines:
    def test_constant_history(self):
        s = const(36)
        for fc in (bemd_svr_forecast(s, DESK), emd_svr_forecast(s, DESK)):
            assert fc.lower == pytest.approx(3.0, abs=1e-3)
            assert fc.upper == pytest.approx(4.5, abs=1e-3)

    def test_trans2_constant(self):
        fc = bemd_svr_forecast(const(30), dataclasses.replace(DESK, mode=TRANS2))
        assert (fc.lower, fc.upper) == pytest.approx((3.0, 4.5), abs=1e-3)

    def test_zero_radius_bounds_identical(self):
        rng = np.random.default_rng(4)
        x = 10 + np.cumsum(rng.normal(size=40))
        fc = emd_svr_forecast(series(x, x), DESK)
        assert abs(fc.lower - fc.upper) <= 1e-9

    def test_insufficient_history(self):
        with pytest.raises(InsufficientHistoryError):
            bemd_svr_forecast(const(23), DESK)
        with pytest.raises(InsufficientHistoryError):
            emd_svr_forecast(const(23), DESK)

    def test_log_scale_is_unlogged(self):
        s = log_transform(const(30, 100.0, 150.0))
        fc = bemd_svr_forecast(s, DESK)
        assert (fc.lower, fc.upper) == pytest.approx((100.0, 150.0), rel=1e-3)

    def test_synthetic_beats_naive(self):
        s = gen_synthetic(length=144, seed=0)
        res = rolling_evaluation(s, 24, build_models(["bemd-svr-trans1"], DESK))
        assert res.u["BEMD-SVR (Trans1)"][0] < 1

    def test_ensemble_wiring_with_oracle_components(self):
        # true next component values fed to the ensemble reproduce the bound
        s = gen_synthetic(length=100, seed=2)
        from bemdsvr.forecasters import BemdSvrForecaster

        model = BemdSvrForecaster(DESK)
        lower_c, _ = model._components(s)
        stack = ComponentStack.fit(lower_c, s.lower, DESK, seed=0)
        eps = stack.chosen[-1].epsilon
        fitted = stack.ensemble_model.predict(lower_c.T)
        rmse = np.sqrt(np.mean((fitted - s.lower) ** 2))
        assert rmse <= eps + 1e-3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(mode="Trans3")
        with pytest.raises(ValueError):
            PipelineConfig(imf_grid=())
        with pytest.raises(ValueError):
            PipelineConfig(repair="clamp")
        with pytest.raises(ValueError):
            PipelineConfig(lags=0)

    def test_lag_embed(self):
        X, y = lag_embed(np.arange(6.0), 3)
        np.testing.assert_array_equal(X, [[0, 1, 2], [1, 2, 3], [2, 3, 4]])
        np.testing.assert_array_equal(y, [3, 4, 5])
        with pytest.raises(InsufficientHistoryError):
            lag_embed(np.arange(3.0), 3)

    def test_emd_components_capped_during_walk_forward(self):
        s = gen_synthetic(length=80, seed=5)
        m = EmdSvrForecaster(DESK).fit(s.head(60), seed=0)
        for t in range(60, 66):
            lo, up = m.predict_next(s.head(t))
            assert np.isfinite(lo) and np.isfinite(up)


class TestHolt:
    def test_constant(self):
        fc = holt_interval_forecast(const(20), seed=1)
        assert (fc.lower, fc.upper) == pytest.approx((3.0, 4.5), abs=1e-6)

    def test_linear_trend(self):
        n = 30
        t = np.arange(n, dtype=float)
        fc = holt_interval_forecast(series(t, t + 1), seed=0)
        assert fc.lower == pytest.approx(n, abs=1e-3)
        assert fc.upper == pytest.approx(n + 1, abs=1e-3)

    def test_parameters_inside_unit_interval_and_trace(self):
        m = HoltIntervalForecaster().fit(gen_synthetic(length=60, seed=3), seed=2)
        for mat in (m.level_matrix, m.trend_matrix):
            assert mat.shape == (2, 2)
            assert np.all((mat > 0) & (mat < 1))
        assert len(m.best_trace) == m.n_starts
        assert np.all(np.diff(m.best_trace) <= 0)
        assert m.best_trace[-1] == min(m.start_objectives) == m.objective

    def test_seeded(self):
        s = gen_synthetic(length=60, seed=3)
        assert holt_interval_forecast(s, 5) == holt_interval_forecast(s, 5)

    def test_short(self):
        with pytest.raises(InsufficientHistoryError):
            holt_interval_forecast(const(5))


class TestVec:
    def test_linear_trend(self):
        n = 40
        t = np.arange(n, dtype=float)
        fc = vec_forecast(series(t, t + 1), max_lag=3)
        assert fc.lower == pytest.approx(n, abs=1e-6)
        assert fc.upper == pytest.approx(n + 1, abs=1e-6)

    def test_zero_radius_random_walk(self):
        x = 50 + np.cumsum(np.random.default_rng(1).normal(size=60))
        fc = vec_forecast(series(x, x), max_lag=2)
        assert abs(fc.lower - fc.upper) <= 1e-9

    def test_constant_is_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            vec_forecast(const(30), max_lag=2)

    def test_short(self):
        with pytest.raises(InsufficientHistoryError):
            vec_forecast(const(21), max_lag=4)

    def test_reduces_to_ar_regressions(self):
        rng = np.random.default_rng(8)
        n = 80
        lo = np.cumsum(rng.normal(size=n))
        up = lo + 1 + np.abs(np.cumsum(rng.normal(size=n)) * 0.1)
        s = series(lo, up)
        m = VecForecaster(max_lag=1, include_ec=False, cross_lags=False).fit(s)
        assert m.p == 1
        for bound, coef in ((lo, m.coef_lower), (up, m.coef_upper)):
            d = np.diff(bound)
            a, b = simple_ols(d[:-1], d[1:])
            np.testing.assert_allclose(coef, [a, b], rtol=1e-9, atol=1e-12)
        pl, pu = m.predict_next(s)
        a, b = simple_ols(np.diff(lo)[:-1], np.diff(lo)[1:])
        assert pl == pytest.approx(lo[-1] + a + b * (lo[-1] - lo[-2]), abs=1e-10)

    def test_bic_picks_a_lag(self):
        s = gen_synthetic(length=120, seed=6)
        m = VecForecaster(max_lag=4).fit(s)
        assert 1 <= m.p <= 4
        assert set(m.bic) == {1, 2, 3, 4}
        assert m.p == min(m.bic, key=lambda p: (m.bic[p], p))


class TestRepairAndEvaluation:
    def test_repair(self):
        assert repair_interval(2.0, 1.0) == (1.0, 2.0, True)
        assert repair_interval(1.0, 2.0) == (1.0, 2.0, False)
        assert repair_interval(2.0, 1.0, "none") == (2.0, 1.0, False)

    def test_naive_u_is_one_and_counts(self):
        s = gen_synthetic(length=60, seed=1)
        res = rolling_evaluation(s, 24, {}, replications=3)
        assert res.models == ["Naive"]
        assert all(abs(u - 1) <= 1e-12 for u in res.u["Naive"])
        assert len(res.records) == 3 * 24

    def test_records_and_u_consistent(self):
        s = gen_synthetic(length=72, seed=2)
        models = build_models(["holt", "vec"])
        res = rolling_evaluation(s, 12, models, replications=2, base_seed=5)
        for name in ("HoltI", "VEC", "Naive"):
            for r in range(2):
                recs = [x for x in res.records if x.model == name and x.replication == r]
                assert len(recs) == 12
                assert [x.period for x in recs] == list(s.periods[-12:])
                assert all(x.pred_lower <= x.pred_upper for x in recs)
                u = theil_u(s.lower[-13:], s.upper[-13:], [x.pred_lower for x in recs],
                            [x.pred_upper for x in recs])
                assert u == res.u[name][r]
        keys = [(x.replication, x.period, x.model) for x in res.records]
        assert keys == sorted(keys)

    def test_equal_seeds_identical(self, tmp_path):
        s = gen_synthetic(length=60, seed=3)
        models = build_models(["emd-svr", "holt"], DESK)
        a = rolling_evaluation(s, 6, models, replications=1, base_seed=9)
        b = rolling_evaluation(s, 6, models, replications=1, base_seed=9)
        a.write_records_csv(tmp_path / "a.csv")
        b.write_records_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert a.u == b.u

    def test_log_series_evaluated_on_raw_scale(self):
        raw = gen_synthetic(length=60, seed=4)
        res = rolling_evaluation(log_transform(raw), 6, {}, replications=1)
        rec = res.records[0]
        assert rec.actual_lower == pytest.approx(raw.lower[54], rel=1e-12)
        assert rec.pred_upper == pytest.approx(raw.upper[53], rel=1e-12)

    def test_split_errors(self):
        s = gen_synthetic(length=60, seed=1)
        from bemdsvr.errors import DataError

        with pytest.raises(DataError):
            rolling_evaluation(s, 1, {})
        with pytest.raises(DataError):
            rolling_evaluation(s, 60, {})

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            build_models(["arima"])

    def test_record_accessors(self):
        s = gen_synthetic(length=50, seed=1)
        rec = rolling_evaluation(s, 2, {}).records[0]
        assert rec.predicted == Interval(rec.pred_lower, rec.pred_upper)
        assert rec.actual == s[48]
