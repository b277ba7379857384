"""epsilon-SVR trained by sequential minimal optimization.

The dual is solved in the 2n-variable form

    min_a  1/2 a'Qa + p'a   s.t.  z'a = 0,  0 <= a <= C

with ``a = [alpha, alpha*]``, ``z = [+1, -1]``, ``Q_st = z_s z_t K(x_s, x_t)``
and ``p = [eps - y, eps + y]``. Each step updates the maximal violating pair
and stops once the KKT gap ``m(a) - M(a)`` drops below ``tol``. The
regression function is ``f(x) = sum_i beta_i K(x_i, x) + b`` with
``beta_i = alpha_i - alpha*_i``.

Features are standardized inside the model (mean 0, unit deviation per
column); the transform is stored so callers pass raw rows.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DimensionMismatchError, EmptyInputError, NonFiniteInputError

LINEAR = "linear"
RBF = "rbf"

# curvature floor for degenerate pairs
_TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = RBF
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in (LINEAR, RBF):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == RBF and not self.gamma > 0:
            raise ValueError("rbf kernel needs gamma > 0")

    def __call__(self, a, b):
        if self.kind == LINEAR:
            return a @ b.T
        sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * (a @ b.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvrHyper:
    C: float
    epsilon: float
    kernel: KernelSpec = KernelSpec()

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class SvrModel:
    support_inputs: np.ndarray  # standardized rows
    dual_coefs: np.ndarray
    bias: float
    hyper: SvrHyper
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    iterations: int = 0
    objective_trace: tuple = field(default=(), repr=False, compare=False)

    @property
    def n_features(self):
        return self.feature_mean.shape[0]

    def decision(self, X):
        X = _as_rows(X, self.n_features)
        Xs = (X - self.feature_mean) / self.feature_scale
        if self.dual_coefs.size == 0:
            return np.full(X.shape[0], self.bias)
        return self.hyper.kernel(Xs, self.support_inputs) @ self.dual_coefs + self.bias

    def predict(self, x):
        """Prediction for one row (returns float) or a 2-d batch (returns array)."""
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return float(self.decision(x.reshape(1, -1))[0])
        return self.decision(x)

    def to_dict(self):
        k = self.hyper.kernel
        return {
            "hyper": {"C": self.hyper.C, "epsilon": self.hyper.epsilon,
                      "kernel": k.kind, "gamma": k.gamma},
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
            "support_inputs": self.support_inputs.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d):
        h = d["hyper"]
        hyper = SvrHyper(h["C"], h["epsilon"], KernelSpec(h["kernel"], h["gamma"]))
        nf = len(d["feature_mean"])
        return cls(
            np.array(d["support_inputs"], dtype=float).reshape(-1, nf),
            np.array(d["dual_coefs"], dtype=float),
            float(d["bias"]),
            hyper,
            np.array(d["feature_mean"], dtype=float),
            np.array(d["feature_scale"], dtype=float),
            int(d.get("iterations", 0)),
        )


def predict(model: SvrModel, x):
    return model.predict(x)


def save_model(model: SvrModel, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=1)


def load_model(path) -> SvrModel:
    with open(path) as fh:
        return SvrModel.from_dict(json.load(fh))


def _as_rows(X, n_features=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if n_features in (None, 1) else X.reshape(1, -1)
    if X.ndim != 2:
        raise DimensionMismatchError("feature rows must be 1-d or 2-d")
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionMismatchError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def _standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


@njit(cache=True)
def _smo(Q, p, z, C, tol, max_iter, record):
    m = p.shape[0]
    a = np.zeros(m)
    G = p.copy()
    trace = np.zeros(max_iter + 1 if record else 1)
    it = 0
    while it < max_iter:
        # i: maximal -z*G over I_up, j: minimal -z*G over I_low
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(m):
            v = -z[t] * G[t]
            if (z[t] > 0 and a[t] < C) or (z[t] < 0 and a[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (z[t] > 0 and a[t] > 0) or (z[t] < 0 and a[t] < C):
                if v < gmin:
                    gmin = v
                    j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            break
        it += 1
        ai = a[i]
        aj = a[j]
        if z[i] != z[j]:
            quad = max(Q[i, i] + Q[j, j] + 2 * Q[i, j], _TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni = ai + delta
            nj = aj + delta
            if diff > 0:
                if nj < 0:
                    nj = 0.0
                    ni = diff
            elif ni < 0:
                ni = 0.0
                nj = -diff
            if diff > 0:
                if ni > C:
                    ni = C
                    nj = C - diff
            elif nj > C:
                nj = C
                ni = C + diff
        else:
            quad = max(Q[i, i] + Q[j, j] - 2 * Q[i, j], _TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni = ai - delta
            nj = aj + delta
            if total > C:
                if ni > C:
                    ni = C
                    nj = total - C
            elif nj < 0:
                nj = 0.0
                ni = total
            if total > C:
                if nj > C:
                    nj = C
                    ni = total - C
            elif ni < 0:
                ni = 0.0
                nj = total
        a[i] = ni
        a[j] = nj
        di = ni - ai
        dj = nj - aj
        for t in range(m):
            G[t] += Q[i, t] * di + Q[j, t] * dj
        if record:
            f = 0.0
            for t in range(m):
                f += a[t] * (G[t] + p[t])
            trace[it] = -0.5 * f
    return a, G, it, trace[: it + 1]


def solve_dual(K, y, C, epsilon, tol=1e-3, max_iter=1_000_000, record_objective=False):
    """SMO on the epsilon-SVR dual. Returns ``(beta, bias, iterations, trace)``.

    ``trace`` holds the dual objective (the maximized form, i.e. minus the
    quantity above) before the first and after every step when
    ``record_objective`` is set.
    """
    n = y.shape[0]
    z = np.concatenate([np.ones(n), -np.ones(n)])
    Q = np.ascontiguousarray(np.block([[K, -K], [-K, K]]))
    p = np.concatenate([epsilon - y, epsilon + y])
    a, G, it, trace = _smo(Q, p, z, float(C), float(tol), int(max_iter), record_objective)
    if it >= max_iter:
        warnings.warn(f"SMO stopped at the iteration cap ({max_iter})", stacklevel=2)

    # bias from free variables, midpoint of the feasible range otherwise
    pos = z > 0
    zg = z * G
    at_ub = a >= C
    at_lb = a <= 0
    free = ~(at_ub | at_lb)
    if free.any():
        rho = float(zg[free].mean())
    else:
        ub_mask = (at_ub & ~pos) | (at_lb & pos)
        lb_mask = (at_ub & pos) | (at_lb & ~pos)
        ub = zg[ub_mask].min() if ub_mask.any() else np.inf
        lb = zg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2)
    beta = a[:n] - a[n:]
    return beta, -rho, it, tuple(trace.tolist()) if record_objective else ()


def train(X, y, h: SvrHyper, tol=1e-3, record_objective=False) -> SvrModel:
    X = _as_rows(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1:
        raise EmptyInputError("need at least one training row")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise NonFiniteInputError("training data contains NaN or inf")
    mean, scale = _standardize(X)
    Xs = (X - mean) / scale
    K = h.kernel(Xs, Xs)
    beta, bias, it, trace = solve_dual(
        K, y, h.C, h.epsilon, tol=tol, record_objective=record_objective
    )
    keep = beta != 0
    return SvrModel(Xs[keep], beta[keep], bias, h, mean, scale, it, trace)


# model selection

def exp_grid(lo, hi, step=2):
    """Powers of two ``2**lo, 2**(lo+step), ...`` not exceeding ``2**hi``."""
    return [2.0**e for e in range(lo, hi + 1, step)]


def default_grid(kind=RBF):
    """Exponential (C, epsilon[, gamma]) grid, factor 4 between neighbours."""
    Cs = exp_grid(-4, 10)
    eps = exp_grid(-8, -1)
    if kind == LINEAR:
        return [SvrHyper(c, e, KernelSpec(LINEAR)) for c, e in itertools.product(Cs, eps)]
    gammas = exp_grid(-6, 4)
    return [
        SvrHyper(c, e, KernelSpec(RBF, g)) for c, e, g in itertools.product(Cs, eps, gammas)
    ]


def make_grid(Cs, epsilons, gammas=None):
    if gammas is None:
        return [SvrHyper(c, e, KernelSpec(LINEAR)) for c, e in itertools.product(Cs, epsilons)]
    return [
        SvrHyper(c, e, KernelSpec(RBF, g))
        for c, e, g in itertools.product(Cs, epsilons, gammas)
    ]


def kfold_indices(n, k, seed):
    """Seeded shuffle, then ``k`` contiguous folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def cv_score(X, y, h, folds):
    errs = []
    for test in folds:
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test] = False
        model = train(X[train_mask], y[train_mask], h)
        resid = model.decision(X[test]) - y[test]
        errs.append(np.sqrt(np.mean(resid**2)))
    return float(np.mean(errs))


def grid_search_cv(X, y, grid, k=5, seed=0):
    """Grid point with the lowest mean fold RMSE; earlier points win ties.

    Returns ``(best_hyper, scores)`` with one score per grid point.
    """
    grid = list(grid)
    if not grid:
        raise EmptyInputError("empty hyperparameter grid")
    if k < 2:
        raise ValueError("need at least 2 folds")
    X = _as_rows(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if X.shape[0] < k:
        raise EmptyInputError(f"{X.shape[0]} rows cannot form {k} folds")
    folds = kfold_indices(X.shape[0], k, seed)
    scores = [cv_score(X, y, h, folds) for h in grid]
    best = int(np.argmin(scores))  # first minimum
    return grid[best], scores
