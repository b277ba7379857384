"""Interval Theil's U and model comparison (one-way ANOVA, Tukey HSD)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

from ._qtable import DF, Q_TABLE
from .errors import DegenerateSeriesError, DimensionMismatchError, UnsupportedDesignError
from .interval_ts import IntervalSeries


@dataclass(frozen=True)
class AccuracySample:
    model: str
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ValueError("accuracy values must be non-negative")
        object.__setattr__(self, "values", vals)

    @property
    def mean(self):
        return float(np.mean(self.values))


def theil_u(actual_lower, actual_upper, pred_lower, pred_upper) -> float:
    """Interval U from arrays.

    ``actual_*`` carry one more element than ``pred_*``: the interval just
    before the first forecast, which the random-walk denominator needs.
    """
    al, au = np.asarray(actual_lower, float), np.asarray(actual_upper, float)
    pl, pu = np.asarray(pred_lower, float), np.asarray(pred_upper, float)
    n = pl.shape[0]
    if n < 1 or pu.shape[0] != n or al.shape[0] != n + 1 or au.shape[0] != n + 1:
        raise DimensionMismatchError(
            f"need n forecasts and n+1 actuals, got {pl.shape[0]}/{pu.shape[0]} "
            f"and {al.shape[0]}/{au.shape[0]}"
        )
    num = np.sum((au[1:] - pu) ** 2) + np.sum((al[1:] - pl) ** 2)
    den = np.sum(np.diff(au) ** 2) + np.sum(np.diff(al) ** 2)
    if den == 0:
        raise DegenerateSeriesError("actual intervals are constant over the window")
    return float(np.sqrt(num / den))


def theil_u_interval(actuals: IntervalSeries, forecasts: IntervalSeries) -> float:
    """Interval U of ``forecasts`` against ``actuals``.

    ``actuals`` starts one period before ``forecasts`` and is otherwise
    aligned with it.
    """
    if len(actuals) != len(forecasts) + 1:
        raise DimensionMismatchError(
            f"actuals must hold one more period than forecasts "
            f"({len(actuals)} vs {len(forecasts)})"
        )
    if actuals.periods[1:] != forecasts.periods:
        raise DimensionMismatchError("forecast periods are not aligned with actuals")
    return theil_u(actuals.lower, actuals.upper, forecasts.lower, forecasts.upper)


def _values(g):
    return np.asarray(getattr(g, "values", g), dtype=float)


def _names(groups):
    return [getattr(g, "model", f"g{i + 1}") for i, g in enumerate(groups)]


def _anova_parts(groups):
    data = [_values(g) for g in groups]
    if len(data) < 2 or any(d.size < 2 for d in data):
        raise UnsupportedDesignError("ANOVA needs at least 2 groups of at least 2 values")
    allv = np.concatenate(data)
    grand = allv.mean()
    ssb = sum(d.size * (d.mean() - grand) ** 2 for d in data)
    ssw = sum(np.sum((d - d.mean()) ** 2) for d in data)
    df_b = len(data) - 1
    df_w = allv.size - len(data)
    return data, float(ssb), float(ssw), df_b, df_w


def f_sf(f, df1, df2):
    """Upper tail of the F distribution."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(betainc(df2 / 2, df1 / 2, df2 / (df2 + df1 * f)))


def one_way_anova(groups: Sequence) -> tuple[float, float]:
    """``(F, p)`` for equality of group means."""
    _, ssb, ssw, df_b, df_w = _anova_parts(groups)
    if df_w < 1:
        raise UnsupportedDesignError("no within-group degrees of freedom")
    if ssb == 0:
        return 0.0, 1.0
    if ssw == 0:
        return math.inf, 0.0
    f = (ssb / df_b) / (ssw / df_w)
    return f, f_sf(f, df_b, df_w)


def q_crit(alpha: float, k: int, df: float) -> float:
    """Studentized-range critical value, interpolated from the table.

    Linear in ``log(df)`` between tabulated rows; between 120 and infinity
    linear in ``1/df``.
    """
    if alpha not in Q_TABLE:
        raise UnsupportedDesignError(f"alpha must be one of {sorted(Q_TABLE)}")
    if not 2 <= k <= 10:
        raise UnsupportedDesignError(f"tabulated for 2..10 groups, got {k}")
    if df < DF[0]:
        raise UnsupportedDesignError(f"need at least {DF[0]} within-group df, got {df}")
    col = [row[k - 2] for row in Q_TABLE[alpha]]
    finite = DF[:-1]
    if df in finite:
        return col[finite.index(df)]
    if math.isinf(df) or df > finite[-1]:
        if math.isinf(df):
            return col[-1]
        w = (1 / finite[-1] - 1 / df) / (1 / finite[-1])
        return col[-2] + w * (col[-1] - col[-2])
    hi = next(i for i, d in enumerate(finite) if d > df)
    lo = hi - 1
    w = (math.log(df) - math.log(finite[lo])) / (math.log(finite[hi]) - math.log(finite[lo]))
    return col[lo] + w * (col[hi] - col[lo])


@dataclass(frozen=True)
class PairComparison:
    model_a: str
    model_b: str
    mean_diff: float
    q: float
    significant: bool


@dataclass(frozen=True)
class ComparisonReport:
    F: float
    p: float
    alpha: float
    q_critical: float
    models: tuple
    means: tuple
    pairs: tuple
    ranking: tuple  # model names, best (lowest mean) first
    gaps: tuple  # significance of each adjacent gap in ``ranking``

    def significant(self, a, b):
        for pc in self.pairs:
            if {pc.model_a, pc.model_b} == {a, b}:
                return pc.significant
        raise KeyError((a, b))

    def ranking_line(self):
        out = [self.ranking[0]]
        for name, sig in zip(self.ranking[1:], self.gaps):
            out += ["<*" if sig else "<", name]
        return " ".join(out)

    def render_text(self):
        width = max(len(m) for m in self.models)
        lines = [
            f"ANOVA F = {self.F:.4f}, p = {self.p:.4g}",
            f"Tukey HSD, alpha = {self.alpha}, q_crit = {self.q_critical:.3f}",
            "",
            f"{'model':<{width}}  mean",
        ]
        for m, mu in sorted(zip(self.models, self.means), key=lambda t: t[1]):
            lines.append(f"{m:<{width}}  {mu:.4f}")
        lines += ["", f"{'model_a':<{width}}  {'model_b':<{width}}  mean_diff        q  sig"]
        for pc in self.pairs:
            lines.append(
                f"{pc.model_a:<{width}}  {pc.model_b:<{width}}  {pc.mean_diff:9.4f}"
                f"  {pc.q:7.3f}  {'*' if pc.significant else ''}"
            )
        lines += ["", self.ranking_line()]
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model_a", "model_b", "mean_diff", "q", "significant"])
        for pc in self.pairs:
            w.writerow([pc.model_a, pc.model_b, repr(pc.mean_diff), repr(pc.q), int(pc.significant)])
        return buf.getvalue()


def tukey_hsd(groups: Sequence, alpha: float = 0.05) -> ComparisonReport:
    """All-pairs Tukey HSD for equal-sized groups."""
    data, ssb, ssw, df_b, df_w = _anova_parts(groups)
    sizes = {d.size for d in data}
    if len(sizes) != 1:
        raise UnsupportedDesignError("Tukey HSD here needs equal group sizes")
    n = sizes.pop()
    names = _names(groups)
    means = [float(d.mean()) for d in data]
    F, p = one_way_anova(groups)
    qc = q_crit(alpha, len(data), df_w)
    se = math.sqrt((ssw / df_w) / n)
    pairs = []
    for a in range(len(data)):
        for b in range(a + 1, len(data)):
            diff = means[a] - means[b]
            if se > 0:
                q = abs(diff) / se
            else:
                q = math.inf if diff != 0 else 0.0
            pairs.append(PairComparison(names[a], names[b], diff, q, q > qc))
    order = sorted(range(len(data)), key=lambda i: means[i])
    sig = {frozenset((pc.model_a, pc.model_b)): pc.significant for pc in pairs}
    gaps = tuple(
        sig[frozenset((names[order[i]], names[order[i + 1]]))] for i in range(len(order) - 1)
    )
    return ComparisonReport(
        F, p, alpha, qc, tuple(names), tuple(means), tuple(pairs),
        tuple(names[i] for i in order), gaps,
    )
