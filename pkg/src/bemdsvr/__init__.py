"""Interval-valued demand forecasting with bivariate EMD and support vector regression."""

from .bemd import Decomposition, SiftConfig, bemd_decompose, emd_decompose
from .forecasters import (
    PipelineConfig,
    bemd_svr_forecast,
    emd_svr_forecast,
    holt_interval_forecast,
    naive_forecast,
    rolling_evaluation,
    vec_forecast,
)
from .interval_ts import Interval, IntervalSeries, from_complex, to_complex
from .stats import one_way_anova, theil_u, theil_u_interval, tukey_hsd
from .svr import SvrHyper, grid_search_cv, train
from .synthetic import SyntheticConfig, gen_synthetic

__version__ = "0.1.0"
