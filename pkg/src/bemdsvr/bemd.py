"""Bivariate (complex) and classical empirical mode decomposition.

The bivariate sift projects the complex signal onto ``M`` directions
``phi_m = 2*pi*m/M``, finds the local maxima of every projection, fits a
natural cubic spline through the *complex* signal values at those times and
averages the ``M`` envelope curves. The average is the local mean that one
sifting step subtracts.

Classical EMD falls out of the same machinery: a real signal projected on
``phi = 0`` and ``phi = pi`` gives the maxima and minima, and the mean of the
two envelopes is the usual ``(upper + lower) / 2``.

Everything here is deterministic. The mean over directions is taken in
value-sorted order so that relabelling the directions, which is what the
Trans1/Trans2 swap does, leaves the result bit-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import InsufficientExtremaError, TooShortError
from .interval_ts import ComplexSeries, fmt

MIN_LENGTH = 8
# residual variation, relative to the input magnitude, below which the
# residual counts as constant and nothing is left to sift
NEGLIGIBLE_VARIATION = 1e-10
# projection differences below this fraction of max|p| are rounding ties
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SiftConfig:
    num_directions: int = 64
    max_sift_iterations: int = 100
    sd_threshold: float = 0.04
    max_imfs: int | None = None
    boundary_extension: str = "mirror"

    def __post_init__(self):
        m = self.num_directions
        if m < 4 or m % 4:
            raise ValueError(f"num_directions must be a positive multiple of 4, got {m}")
        if self.max_sift_iterations < 1:
            raise ValueError("max_sift_iterations must be >= 1")
        if not self.sd_threshold > 0:
            raise ValueError("sd_threshold must be > 0")
        if self.max_imfs is not None and self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1 or None")
        if self.boundary_extension != "mirror":
            raise ValueError(f"unsupported boundary extension {self.boundary_extension!r}")


@dataclass(frozen=True)
class Decomposition:
    """IMFs (rows of ``imfs``) plus residual; complex for BEMD, real for EMD."""

    imfs: np.ndarray
    residual: np.ndarray
    sift_counts: tuple = ()

    def __post_init__(self):
        for name in ("imfs", "residual"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_imfs(self):
        return self.imfs.shape[0]

    def components(self):
        """IMFs followed by the residual, shape ``(n_imfs + 1, n)``."""
        return np.vstack([self.imfs, self.residual[None, :]])

    def reconstruct(self):
        return self.imfs.sum(axis=0) + self.residual


def directions(m: int):
    """Angles ``2*pi*k/m`` for ``k = 1..m`` with their cosines and sines.

    The sine table is read off the cosine table at the reflected angle
    ``pi/2 - phi`` so that projections of ``c`` and of ``i*conj(c)`` match
    exactly.
    """
    k = np.arange(1, m + 1)
    phi = 2 * np.pi * k / m
    cos = np.cos(phi)
    reflected = (m // 4 - k) % m  # index k' in 0..m-1, 0 meaning k' = m
    reflected[reflected == 0] = m
    sin = cos[reflected - 1]
    return phi, cos, sin


def project(c, phi: float) -> np.ndarray:
    c = np.asarray(getattr(c, "samples", c))
    return c.real * np.cos(phi) + c.imag * np.sin(phi)


def find_local_maxima(p):
    """Interior maxima of ``p`` as ``(indices, values)``.

    ``t`` qualifies when ``p[t-1] < p[t] >= p[t+1]``; a flat top therefore
    reports its first sample. Differences within ``TIE_RTOL * max|p|`` count
    as ties, so a plateau that is flat only up to rounding behaves like an
    exact one. End points are never returned.
    """
    p = np.asarray(p, dtype=float)
    if p.shape[0] < 3:
        raise TooShortError("need at least 3 samples to find maxima")
    tol = TIE_RTOL * np.max(np.abs(p))
    rise = p[1:-1] - p[:-2]
    fall = p[1:-1] - p[2:]
    idx = np.flatnonzero((rise > tol) & (fall >= -tol)) + 1
    return idx, p[idx]


def natural_cubic_spline(x, y, t):
    """Evaluate the natural cubic spline through ``(x, y)`` at ``t``.

    ``y`` may be 1-d or 2-d (knots along axis 0, columns fitted
    independently). Needs at least two strictly increasing knots.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    k = x.shape[0]
    if k < 2:
        raise ValueError("natural spline needs at least 2 knots")
    h = np.diff(x)
    slope = np.diff(y, axis=0) / (h[:, None] if y.ndim == 2 else h)
    second = np.zeros_like(y)
    if k > 2:
        ab = np.zeros((3, k - 2))
        ab[0, 1:] = h[1:-1]
        ab[1] = 2 * (h[:-1] + h[1:])
        ab[2, :-1] = h[1:-1]
        second[1:-1] = solve_banded((1, 1), ab, 6 * np.diff(slope, axis=0), check_finite=False)
    i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, k - 2)
    hi = h[i]
    a = (x[i + 1] - t) / hi
    b = 1.0 - a
    ca = (a**3 - a) * hi**2 / 6
    cb = (b**3 - b) * hi**2 / 6
    if y.ndim == 2:
        a, b, ca, cb = a[:, None], b[:, None], ca[:, None], cb[:, None]
    return a * y[i] + b * y[i + 1] + ca * second[i] + cb * second[i + 1]


def _mirror_knots(idx, n):
    """Maxima times plus two reflections about each end of the series."""
    last = 2 * (n - 1)
    left = -idx[:2][::-1]
    right = last - idx[-2:][::-1]
    return np.concatenate([left, idx, right]), np.concatenate([idx[:2][::-1], idx, idx[-2:][::-1]])


def _envelope_parts(parts, p, grid):
    """Spline through the signal ``parts`` (n, 2) at the maxima of ``p``."""
    idx, _ = find_local_maxima(p)
    if idx.size < 2:
        raise InsufficientExtremaError(f"projection has {idx.size} interior maxima, need 2")
    times, src = _mirror_knots(idx, len(p))
    return natural_cubic_spline(times, parts[src], grid)


def _mean_envelope_parts(parts, cos, sin):
    n = parts.shape[0]
    grid = np.arange(n, dtype=float)
    envs = np.empty((len(cos), n, 2))
    for m in range(len(cos)):
        p = parts[:, 0] * cos[m] + parts[:, 1] * sin[m]
        envs[m] = _envelope_parts(parts, p, grid)
    envs.sort(axis=0)
    return envs.sum(axis=0) / len(cos)


def _count_ok(parts, cos, sin):
    """Per direction: does the projection have at least two interior maxima?"""
    out = []
    for m in range(len(cos)):
        p = parts[:, 0] * cos[m] + parts[:, 1] * sin[m]
        out.append(find_local_maxima(p)[0].size >= 2)
    return np.array(out)


def _as_parts(c):
    c = np.asarray(getattr(c, "samples", c))
    parts = np.empty((c.shape[0], 2))
    parts[:, 0] = c.real
    parts[:, 1] = c.imag if np.iscomplexobj(c) else 0.0
    return parts


def envelope(c, phi: float, cfg: SiftConfig | None = None) -> np.ndarray:
    """Complex envelope of ``c`` along direction ``phi``."""
    parts = _as_parts(c)
    p = parts[:, 0] * np.cos(phi) + parts[:, 1] * np.sin(phi)
    env = _envelope_parts(parts, p, np.arange(parts.shape[0], dtype=float))
    return env[:, 0] + 1j * env[:, 1]


def mean_envelope(c, cfg: SiftConfig | None = None) -> np.ndarray:
    cfg = cfg or SiftConfig()
    _, cos, sin = directions(cfg.num_directions)
    o = _mean_envelope_parts(_as_parts(c), cos, sin)
    return o[:, 0] + 1j * o[:, 1]


def _sift_parts(parts, cos, sin, cfg):
    h = parts
    k = 0
    while k < cfg.max_sift_iterations:
        try:
            o = _mean_envelope_parts(h, cos, sin)
        except InsufficientExtremaError:
            if k == 0:
                raise
            break
        denom = np.sum(h * h)
        h = h - o
        k += 1
        sd = np.sum(o * o) / denom if denom > 0 else np.inf
        if sd < cfg.sd_threshold:
            break
    return h, k


def sift(c, cfg: SiftConfig | None = None):
    """Extract one IMF. Returns ``(imf, iterations)``.

    Iterates ``h <- h - mean_envelope(h)`` until
    ``sum|h_k - h_{k-1}|^2 / sum|h_{k-1}|^2 < sd_threshold`` or the iteration
    cap is hit. If an intermediate ``h`` loses its extrema the current ``h``
    is returned. Raises ``InsufficientExtremaError`` only if the input itself
    cannot be sifted.
    """
    cfg = cfg or SiftConfig()
    _, cos, sin = directions(cfg.num_directions)
    h, k = _sift_parts(_as_parts(c), cos, sin, cfg)
    return h[:, 0] + 1j * h[:, 1], k


def _decompose_parts(parts, cos, sin, cfg):
    n = parts.shape[0]
    if n < MIN_LENGTH:
        raise TooShortError(f"decomposition needs at least {MIN_LENGTH} samples, got {n}")
    scale = np.max(np.hypot(parts[:, 0], parts[:, 1]))
    r = parts
    imfs, counts = [], []
    while cfg.max_imfs is None or len(imfs) < cfg.max_imfs:
        dev = r - r.mean(axis=0)
        if np.max(np.hypot(dev[:, 0], dev[:, 1])) <= NEGLIGIBLE_VARIATION * scale:
            break
        # a direction without two maxima has no envelope, so the mean
        # envelope is undefined and the residual is final
        if not _count_ok(r, cos, sin).all():
            break
        h, k = _sift_parts(r, cos, sin, cfg)
        imfs.append(h)
        counts.append(k)
        r = r - h
    return imfs, r, tuple(counts)


def bemd_decompose(c, cfg: SiftConfig | None = None) -> Decomposition:
    """Bivariate EMD of a complex series into IMFs and a residual."""
    cfg = cfg or SiftConfig()
    _, cos, sin = directions(cfg.num_directions)
    parts = _as_parts(c)
    imfs, r, counts = _decompose_parts(parts, cos, sin, cfg)
    n = parts.shape[0]
    stack = np.array([h[:, 0] + 1j * h[:, 1] for h in imfs]).reshape(len(imfs), n)
    return Decomposition(stack, r[:, 0] + 1j * r[:, 1], counts)


_REAL_COS = np.array([1.0, -1.0])
_REAL_SIN = np.array([0.0, 0.0])


def emd_decompose(x, cfg: SiftConfig | None = None) -> Decomposition:
    """Classical EMD of a real series (upper/lower spline envelopes)."""
    cfg = cfg or SiftConfig()
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("emd_decompose expects a 1-d real series")
    imfs, r, counts = _decompose_parts(_as_parts(x), _REAL_COS, _REAL_SIN, cfg)
    stack = np.array([h[:, 0] for h in imfs]).reshape(len(imfs), x.shape[0])
    return Decomposition(stack, r[:, 0].copy(), counts)


def decompose_series(c: ComplexSeries, cfg: SiftConfig | None = None) -> Decomposition:
    return bemd_decompose(c.samples, cfg)


def write_decomposition_csv(dec: Decomposition, path):
    """Dump as ``t,component,part,value`` rows (``part`` is re or im)."""
    names = [f"imf{i + 1}" for i in range(dec.n_imfs)] + ["residual"]
    comps = dec.components()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "component", "part", "value"])
        for name, comp in zip(names, comps):
            comp = np.asarray(comp)
            for part, values in (("re", comp.real), ("im", np.imag(comp))):
                for t, v in enumerate(values):
                    w.writerow([t, name, part, fmt(v)])
