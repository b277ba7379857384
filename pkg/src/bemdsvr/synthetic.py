"""Synthetic monthly interval series with trend, seasonality and an AR(1) range."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval_ts import RAW, IntervalSeries

RADIUS_FLOOR = 0.01
MIN_LENGTH = 48


@dataclass(frozen=True)
class SyntheticConfig:
    slope: float = 0.05
    seasonal_amplitude: float = 2.0
    radius_ar: float = 0.6
    noise_std: float = 0.1
    length: int = 144
    seed: int = 0
    level: float = 10.0
    radius_mean: float = 1.0
    radius_noise_std: float | None = None  # defaults to noise_std

    def __post_init__(self):
        if self.length < MIN_LENGTH:
            raise ValueError(f"length must be >= {MIN_LENGTH}")
        if not 0 <= self.radius_ar < 1:
            raise ValueError("radius AR coefficient must lie in [0, 1)")
        if self.noise_std < 0 or (self.radius_noise_std or 0) < 0:
            raise ValueError("noise levels must be non-negative")
        if self.radius_mean < RADIUS_FLOOR:
            raise ValueError(f"radius_mean must be >= {RADIUS_FLOOR}")


def gen_synthetic(cfg: SyntheticConfig | None = None, **overrides) -> IntervalSeries:
    """Lower bound ``level + slope*t + A*sin(2 pi t / 12) + noise``; upper = lower + range.

    The range follows ``mu + phi (R[t-1] - mu) + noise`` floored at 0.01 and
    started at ``mu``. Periods start at 2000-01.
    """
    if cfg is None:
        cfg = SyntheticConfig(**overrides)
    elif overrides:
        raise TypeError("pass either a config or keyword overrides, not both")
    rng = np.random.default_rng(cfg.seed)
    n = cfg.length
    t = np.arange(n, dtype=float)
    eps = rng.normal(0.0, cfg.noise_std, n)
    r_std = cfg.noise_std if cfg.radius_noise_std is None else cfg.radius_noise_std
    eta = rng.normal(0.0, r_std, n)
    lower = cfg.level + cfg.slope * t + cfg.seasonal_amplitude * np.sin(2 * np.pi * t / 12) + eps
    radius = np.empty(n)
    prev = cfg.radius_mean
    for k in range(n):
        prev = max(cfg.radius_mean + cfg.radius_ar * (prev - cfg.radius_mean) + eta[k], RADIUS_FLOOR)
        radius[k] = prev
    return IntervalSeries.from_bounds(lower, lower + radius, scale=RAW)
