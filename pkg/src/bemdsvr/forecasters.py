"""One-step-ahead interval forecasters and the rolling hold-out evaluation.

Models
------
BEMD-SVR
    Build the complex series (Trans1 or Trans2), decompose it with bivariate
    EMD, fit one SVR per component per bound on lagged values of that
    component (RBF kernel for IMFs, linear for the residual), then combine
    the component forecasts with a linear-kernel SVR trained to map the
    in-sample component values to the bound.
EMD-SVR
    The same component/ensemble machinery run separately on each bound after
    classical EMD; nothing is shared between the bounds.
Interval Holt
    Level and trend recursions on the (lower, upper) vector with 2x2
    smoothing matrices whose entries lie in (0, 1).
VEC
    OLS on differenced bounds with the interval range as error-correction
    term, lag order picked by BIC.
Naive
    The last observed interval.

Every model is fitted once on the estimation sample; during the hold-out
walk-forward the fitted parameters are re-applied to the growing history.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .bemd import SiftConfig, bemd_decompose, emd_decompose
from .errors import (
    DataError,
    InsufficientHistoryError,
    RankDeficientError,
)
from .interval_ts import (
    LOG,
    MODES,
    TRANS1,
    TRANS2,
    Interval,
    IntervalSeries,
    fmt,
    split_complex,
    to_complex,
)
from .stats import theil_u
from .svr import LINEAR, RBF, default_grid, grid_search_cv, train

log = logging.getLogger(__name__)

SWAP = "swap"
NO_REPAIR = "none"


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = TRANS1
    sift: SiftConfig = SiftConfig()
    lags: int = 12
    imf_grid: tuple = tuple(default_grid(RBF))
    residue_grid: tuple = tuple(default_grid(LINEAR))
    ensemble_grid: tuple = tuple(default_grid(LINEAR))
    folds: int = 5
    repair: str = SWAP
    seed: int = 0
    retune_each_step: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lags < 1:
            raise ValueError("lag order must be >= 1")
        for name in ("imf_grid", "residue_grid", "ensemble_grid"):
            grid = tuple(getattr(self, name))
            if not grid:
                raise ValueError(f"{name} is empty")
            object.__setattr__(self, name, grid)
        if self.repair not in (SWAP, NO_REPAIR):
            raise ValueError(f"unknown repair rule {self.repair!r}")


def desk_grids():
    """Small exponential grids that keep replicated runs at desk scale."""
    from .svr import make_grid

    eps = [2.0**-6, 2.0**-3]
    return dict(
        imf_grid=tuple(make_grid([2.0**0, 2.0**3, 2.0**6], eps, [2.0**-6, 2.0**-3])),
        residue_grid=tuple(make_grid([2.0**-2, 2.0**0, 2.0**2], eps)),
        ensemble_grid=tuple(make_grid([2.0**-2, 2.0**0, 2.0**2], eps)),
    )


@dataclass(frozen=True)
class ForecastRecord:
    """One hold-out forecast; bounds may be inverted only when repair is off."""

    period: tuple
    pred_lower: float
    pred_upper: float
    actual_lower: float
    actual_upper: float
    model: str
    replication: int
    repaired: bool = False

    @property
    def predicted(self) -> Interval:
        return Interval(self.pred_lower, self.pred_upper)

    @property
    def actual(self) -> Interval:
        return Interval(self.actual_lower, self.actual_upper)


# lag embedding and the component / ensemble SVR stack

def lag_embed(x, d):
    """Rows ``[x[t-d], ..., x[t-1]]`` with target ``x[t]`` for ``t = d..n-1``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n <= d:
        raise InsufficientHistoryError(f"{n} samples cannot embed {d} lags")
    X = np.lib.stride_tricks.sliding_window_view(x, d)[:-1]
    return np.ascontiguousarray(X), x[d:].copy()


@dataclass
class ComponentStack:
    """Per-component SVRs plus the ensemble SVR for one bound."""

    component_models: list = field(default_factory=list)
    ensemble_model: object = None
    chosen: list = field(default_factory=list)

    @classmethod
    def fit(cls, components, target, cfg: PipelineConfig, seed):
        components = np.atleast_2d(np.asarray(components, dtype=float))
        stack = cls()
        last = components.shape[0] - 1
        for i, comp in enumerate(components):
            X, y = lag_embed(comp, cfg.lags)
            grid = cfg.residue_grid if i == last else cfg.imf_grid
            best, _ = grid_search_cv(X, y, grid, k=cfg.folds, seed=seed)
            stack.component_models.append(train(X, y, best))
            stack.chosen.append(best)
        Xe = components.T
        best, _ = grid_search_cv(Xe, target, cfg.ensemble_grid, k=cfg.folds, seed=seed)
        stack.ensemble_model = train(Xe, target, best)
        stack.chosen.append(best)
        return stack

    def component_forecasts(self, components, lags):
        components = np.atleast_2d(np.asarray(components, dtype=float))
        return np.array(
            [m.predict(comp[-lags:]) for m, comp in zip(self.component_models, components)]
        )

    def forecast(self, components, lags):
        return self.ensemble_model.predict(self.component_forecasts(components, lags))


@lru_cache(maxsize=8192)
def _bemd_cached(re_bytes, im_bytes, cfg):
    re = np.frombuffer(re_bytes)
    im = np.frombuffer(im_bytes)
    return bemd_decompose(re + 1j * im, cfg)


@lru_cache(maxsize=8192)
def _emd_cached(x_bytes, cfg):
    return emd_decompose(np.frombuffer(x_bytes), cfg)


def cached_bemd(c, cfg):
    c = np.asarray(c, dtype=complex)
    return _bemd_cached(
        np.ascontiguousarray(c.real).tobytes(), np.ascontiguousarray(c.imag).tobytes(), cfg
    )


def cached_emd(x, cfg):
    return _emd_cached(np.ascontiguousarray(x, dtype=float).tobytes(), cfg)


def _fixed_count(components, n_imfs):
    """Pad with zero IMFs (ahead of the residual) up to ``n_imfs``."""
    have = components.shape[0] - 1
    if have >= n_imfs:
        return components
    pad = np.zeros((n_imfs - have, components.shape[1]), dtype=components.dtype)
    return np.vstack([components[:-1], pad, components[-1:]])


def _limited(cfg: SiftConfig, n_imfs):
    return dataclasses.replace(cfg, max_imfs=n_imfs)


# forecasters

class Forecaster:
    """Fit on an estimation sample, then forecast one step from any history."""

    name = "model"
    min_history = 1

    def fit(self, history: IntervalSeries, seed: int = 0):
        self._check(history)
        return self

    def predict_next(self, history: IntervalSeries) -> tuple[float, float]:
        raise NotImplementedError

    def _check(self, history):
        if len(history) < self.min_history:
            raise InsufficientHistoryError(
                f"{self.name} needs at least {self.min_history} periods, got {len(history)}"
            )


class NaiveForecaster(Forecaster):
    name = "Naive"

    def predict_next(self, history):
        return float(history.lower[-1]), float(history.upper[-1])


class BemdSvrForecaster(Forecaster):
    def __init__(self, cfg: PipelineConfig | None = None):
        self.cfg = cfg or PipelineConfig()
        self.name = f"BEMD-SVR ({self.cfg.mode})"
        self.min_history = max(self.cfg.lags + 2, 24)

    def _components(self, history, n_imfs=None):
        c = to_complex(history, self.cfg.mode).samples
        if n_imfs == 0:
            comps = c[None, :]
        else:
            sift = self.cfg.sift if n_imfs is None else _limited(self.cfg.sift, n_imfs)
            comps = cached_bemd(c, sift).components()
            if n_imfs is not None:
                comps = _fixed_count(comps, n_imfs)
        return split_complex(comps, self.cfg.mode)

    def fit(self, history, seed=None):
        self._check(history)
        seed = self.cfg.seed if seed is None else seed
        self._seed = seed
        lower_c, upper_c = self._components(history)
        self.n_imfs = lower_c.shape[0] - 1
        self.lower_stack = ComponentStack.fit(lower_c, history.lower, self.cfg, seed)
        self.upper_stack = ComponentStack.fit(upper_c, history.upper, self.cfg, seed)
        return self

    def predict_next(self, history):
        self._check(history)
        if self.cfg.retune_each_step:
            self.fit(history, self._seed)
        lower_c, upper_c = self._components(history, self.n_imfs)
        d = self.cfg.lags
        return self.lower_stack.forecast(lower_c, d), self.upper_stack.forecast(upper_c, d)


class EmdSvrForecaster(Forecaster):
    name = "EMD-SVR"

    def __init__(self, cfg: PipelineConfig | None = None):
        self.cfg = cfg or PipelineConfig()
        self.min_history = max(self.cfg.lags + 2, 24)

    def _components(self, x, n_imfs=None):
        if n_imfs == 0:
            return np.asarray(x, dtype=float)[None, :]
        sift = self.cfg.sift if n_imfs is None else _limited(self.cfg.sift, n_imfs)
        comps = cached_emd(x, sift).components()
        return comps if n_imfs is None else _fixed_count(comps, n_imfs)

    def fit(self, history, seed=None):
        self._check(history)
        seed = self.cfg.seed if seed is None else seed
        self._seed = seed
        self.stacks, self.n_imfs = [], []
        for bound in (history.lower, history.upper):
            comps = self._components(bound)
            self.n_imfs.append(comps.shape[0] - 1)
            self.stacks.append(ComponentStack.fit(comps, bound, self.cfg, seed))
        return self

    def predict_next(self, history):
        self._check(history)
        if self.cfg.retune_each_step:
            self.fit(history, self._seed)
        out = []
        for bound, stack, k in zip((history.lower, history.upper), self.stacks, self.n_imfs):
            out.append(stack.forecast(self._components(bound, k), self.cfg.lags))
        return out[0], out[1]


@njit(cache=True)
def _holt_run(y, A, B):
    """One-step errors (sum of squares) and the final level + trend."""
    l0, l1 = y[0, 0], y[0, 1]
    b0, b1 = y[1, 0] - y[0, 0], y[1, 1] - y[0, 1]
    sse = 0.0
    for t in range(1, y.shape[0]):
        f0, f1 = l0 + b0, l1 + b1
        e0, e1 = y[t, 0] - f0, y[t, 1] - f1
        sse += e0 * e0 + e1 * e1
        # level: A y + (I - A) f  ==  f + A (y - f)
        n0 = f0 + A[0, 0] * e0 + A[0, 1] * e1
        n1 = f1 + A[1, 0] * e0 + A[1, 1] * e1
        d0, d1 = n0 - l0 - b0, n1 - l1 - b1
        # trend: B (l_t - l_{t-1}) + (I - B) b  ==  b + B (l_t - l_{t-1} - b)
        b0, b1 = b0 + B[0, 0] * d0 + B[0, 1] * d1, b1 + B[1, 0] * d0 + B[1, 1] * d1
        l0, l1 = n0, n1
    return sse, l0 + b0, l1 + b1


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def holt_matrices(theta):
    """Smoothing matrices (level, trend) from 8 unconstrained parameters."""
    w = _logistic(np.asarray(theta, dtype=float))
    return w[:4].reshape(2, 2), w[4:].reshape(2, 2)


class HoltIntervalForecaster(Forecaster):
    name = "HoltI"
    min_history = 6
    n_starts = 8
    logit_bound = 15.0

    def fit(self, history, seed=0):
        self._check(history)
        y = np.column_stack([history.lower, history.upper])
        rng = np.random.default_rng(seed)

        def sse(theta):
            A, B = holt_matrices(theta)
            return _holt_run(y, A, B)[0]

        bounds = [(-self.logit_bound, self.logit_bound)] * 8
        best = None
        self.start_objectives, self.best_trace = [], []
        for _ in range(self.n_starts):
            x0 = rng.uniform(-3, 3, size=8)
            res = minimize(sse, x0, method="L-BFGS-B", bounds=bounds)
            self.start_objectives.append(float(res.fun))
            if best is None or res.fun < best.fun:
                best = res
            self.best_trace.append(float(best.fun))
        self.theta = best.x
        self.level_matrix, self.trend_matrix = holt_matrices(best.x)
        self.objective = float(best.fun)
        return self

    def predict_next(self, history):
        self._check(history)
        y = np.column_stack([history.lower, history.upper])
        _, lo, up = _holt_run(y, self.level_matrix, self.trend_matrix)
        return float(lo), float(up)


class VecForecaster(Forecaster):
    """VEC with the range ``U - L`` as error-correction term.

    ``include_ec=False`` drops the error-correction regressor and
    ``cross_lags=False`` keeps only own-bound lags, which turns the system
    into two separate AR regressions on differences.
    """

    name = "VEC"

    def __init__(self, max_lag=4, include_ec=True, cross_lags=True):
        self.max_lag = max_lag
        self.include_ec = include_ec
        self.cross_lags = cross_lags
        self.min_history = 3 * max_lag + 10

    def _design(self, lower, upper, p, start):
        dl, du = np.diff(lower), np.diff(upper)
        rng_ = upper - lower
        # row for target time t uses diffs at t-1..t-p (diff index t-1 is y_t - y_{t-1})
        rows_l, rows_u = [], []
        for t in range(start, len(lower) + 1):
            lag_l = [dl[t - 1 - j] for j in range(1, p + 1)]
            lag_u = [du[t - 1 - j] for j in range(1, p + 1)]
            ec = [rng_[t - 1]] if self.include_ec else []
            if self.cross_lags:
                row = [1.0] + lag_l + lag_u + ec
                rows_l.append(row)
                rows_u.append(row)
            else:
                rows_l.append([1.0] + lag_l + ec)
                rows_u.append([1.0] + lag_u + ec)
        return np.array(rows_l), np.array(rows_u)

    def _ols(self, lower, upper, p, start):
        Xl, Xu = self._design(lower, upper, p, start)
        n = len(lower)
        Xl_fit, Xu_fit = Xl[: n - start], Xu[: n - start]
        yl = np.diff(lower)[start - 1:]
        yu = np.diff(upper)[start - 1:]
        cl = np.linalg.lstsq(Xl_fit, yl, rcond=None)[0]
        cu = np.linalg.lstsq(Xu_fit, yu, rcond=None)[0]
        resid = np.column_stack([yl - Xl_fit @ cl, yu - Xu_fit @ cu])
        return cl, cu, resid, Xl[-1], Xu[-1]

    def fit(self, history, seed=0):
        self._check(history)
        lo, up = history.lower, history.upper
        if not (np.any(np.diff(lo)) or np.any(np.diff(up))):
            raise RankDeficientError("all differenced regressors are zero")
        common = self.max_lag + 1
        self.bic = {}
        for p in range(1, self.max_lag + 1):
            _, _, resid, _, _ = self._ols(lo, up, p, common)
            T = resid.shape[0]
            sign, logdet = np.linalg.slogdet(resid.T @ resid / T)
            k = 2 * (1 + (2 if self.cross_lags else 1) * p + int(self.include_ec))
            self.bic[p] = (logdet if sign > 0 else -math.inf) + k * math.log(T) / T
        self.p = min(self.bic, key=lambda p: (self.bic[p], p))
        self.coef_lower, self.coef_upper, _, _, _ = self._ols(lo, up, self.p, self.p + 1)
        return self

    def predict_next(self, history):
        self._check(history)
        lo, up = history.lower, history.upper
        _, _, _, xl, xu = self._ols(lo, up, self.p, self.p + 1)
        return float(lo[-1] + xl @ self.coef_lower), float(up[-1] + xu @ self.coef_upper)


# one-shot forecasts and repair

def repair_interval(lower, upper, rule=SWAP):
    """Returns ``(lower, upper, repaired)``."""
    if rule == SWAP and lower > upper:
        log.info("forecast lower %r > upper %r, swapping", lower, upper)
        return upper, lower, True
    return lower, upper, False


def _emit(history, pair, rule):
    lower, upper, _ = repair_interval(pair[0], pair[1], rule)
    if history.scale == LOG:
        lower, upper = math.exp(lower), math.exp(upper)
    if lower > upper:
        raise DataError(f"forecast [{lower}, {upper}] is inverted and repair is disabled")
    return Interval(lower, upper)


def naive_forecast(history: IntervalSeries) -> Interval:
    if len(history) < 1:
        raise InsufficientHistoryError("empty history")
    return history[len(history) - 1]


def bemd_svr_forecast(history: IntervalSeries, cfg: PipelineConfig | None = None) -> Interval:
    cfg = cfg or PipelineConfig()
    model = BemdSvrForecaster(cfg).fit(history, cfg.seed)
    return _emit(history, model.predict_next(history), cfg.repair)


def emd_svr_forecast(history: IntervalSeries, cfg: PipelineConfig | None = None) -> Interval:
    cfg = cfg or PipelineConfig()
    model = EmdSvrForecaster(cfg).fit(history, cfg.seed)
    return _emit(history, model.predict_next(history), cfg.repair)


def holt_interval_forecast(history: IntervalSeries, seed: int = 0) -> Interval:
    model = HoltIntervalForecaster().fit(history, seed)
    return _emit(history, model.predict_next(history), SWAP)


def vec_forecast(history: IntervalSeries, max_lag: int = 4) -> Interval:
    model = VecForecaster(max_lag).fit(history)
    return _emit(history, model.predict_next(history), SWAP)


# model registry

MODEL_KEYS = ("bemd-svr-trans1", "bemd-svr-trans2", "emd-svr", "holt", "vec", "naive")


def build_models(keys, cfg: PipelineConfig | None = None, max_lag=4) -> dict:
    """Map display name to a zero-argument factory for each model key."""
    cfg = cfg or PipelineConfig()
    factories = {
        "bemd-svr-trans1": lambda: BemdSvrForecaster(dataclasses.replace(cfg, mode=TRANS1)),
        "bemd-svr-trans2": lambda: BemdSvrForecaster(dataclasses.replace(cfg, mode=TRANS2)),
        "emd-svr": lambda: EmdSvrForecaster(cfg),
        "holt": HoltIntervalForecaster,
        "vec": lambda: VecForecaster(max_lag),
        "naive": NaiveForecaster,
    }
    out = {}
    for key in keys:
        if key not in factories:
            raise ValueError(f"unknown model {key!r}; choose from {', '.join(MODEL_KEYS)}")
        out[factories[key]().name] = factories[key]
    return out


# rolling evaluation

@dataclass
class EvaluationResult:
    records: list
    u: dict  # model name -> U^I per replication
    holdout: int
    replications: int

    @property
    def models(self):
        return list(self.u)

    @property
    def repairs(self):
        return sum(r.repaired for r in self.records)

    def mean_u(self):
        return {m: float(np.mean(v)) for m, v in self.u.items()}

    def write_records_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "model", "year", "month", "pred_lower", "pred_upper",
                        "actual_lower", "actual_upper", "repaired"])
            for r in self.records:
                w.writerow([r.replication, r.model, r.period[0], r.period[1],
                            fmt(r.pred_lower), fmt(r.pred_upper),
                            fmt(r.actual_lower), fmt(r.actual_upper), int(r.repaired)])


def rolling_evaluation(
    series: IntervalSeries,
    holdout: int,
    models: Mapping[str, Callable[[], Forecaster]],
    replications: int = 1,
    base_seed: int = 0,
    repair: str = SWAP,
) -> EvaluationResult:
    """Fit every model on the estimation sample, forecast each hold-out period.

    Replication ``r`` uses seed ``base_seed + r``. Forecasts and actuals are
    reported on the raw scale. The naive model is always included.
    """
    n = len(series)
    if holdout < 2 or holdout > n - 1:
        raise DataError(f"hold-out length {holdout} out of range for {n} periods")
    if replications < 1:
        raise ValueError("need at least one replication")
    models = dict(models)
    if NaiveForecaster.name not in models:
        models[NaiveForecaster.name] = NaiveForecaster
    n_est = n - holdout
    unlog = np.exp if series.scale == LOG else (lambda a: np.asarray(a, dtype=float))
    act_lo, act_up = unlog(series.lower), unlog(series.upper)

    records, u = [], {m: [] for m in sorted(models)}
    for r in range(replications):
        seed = base_seed + r
        rep_records = []
        for name in sorted(models):
            model = models[name]().fit(series.head(n_est), seed)
            pl, pu = [], []
            for t in range(n_est, n):
                lo, up, fixed = repair_interval(*model.predict_next(series.head(t)), repair)
                lo, up = float(unlog(lo)), float(unlog(up))
                pl.append(lo)
                pu.append(up)
                rep_records.append(ForecastRecord(
                    series.periods[t], lo, up, float(act_lo[t]), float(act_up[t]), name, r, fixed
                ))
            u[name].append(theil_u(act_lo[n_est - 1:], act_up[n_est - 1:], pl, pu))
        rep_records.sort(key=lambda rec: (rec.period, rec.model))
        records.extend(rep_records)
    return EvaluationResult(records, u, holdout, replications)
