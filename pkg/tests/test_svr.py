import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bemdsvr.errors import DimensionMismatchError, EmptyInputError, NonFiniteInputError
from bemdsvr.svr import (
    KernelSpec,
    SvrHyper,
    default_grid,
    exp_grid,
    grid_search_cv,
    kfold_indices,
    load_model,
    make_grid,
    save_model,
    train,
)
from oracles import gram, standardize, svr_bias, svr_dual_qp

LIN = KernelSpec("linear")


def oracle_predict(X, y, h, Xq):
    Xs, mu, sd = standardize(X)
    K = gram(Xs, Xs, h.kernel.kind, h.kernel.gamma)
    beta = svr_dual_qp(K, y, h.C, h.epsilon)
    b = svr_bias(K, y, beta, h.C, h.epsilon)
    return gram((np.asarray(Xq) - mu) / sd, Xs, h.kernel.kind, h.kernel.gamma) @ beta + b


class TestTrain:
    def test_three_points(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([0.0, 1.0, 2.0])
        h = SvrHyper(100.0, 0.01, LIN)
        m = train(X, y, h)
        assert np.abs(m.predict(X) - y).max() <= 0.02
        np.testing.assert_allclose(m.predict(X), oracle_predict(X, y, h, X), atol=1e-3)

    @pytest.mark.parametrize("kernel", [LIN, KernelSpec("rbf", 0.5)])
    def test_single_point(self, kernel):
        m = train([[3.0, -1.0]], [7.5], SvrHyper(1.0, 0.1, kernel))
        assert m.predict([3.0, -1.0]) == 7.5

    def test_constant_targets(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 3))
        m = train(X, np.full(20, 4.2), SvrHyper(10.0, 0.01, KernelSpec("rbf", 1.0)))
        np.testing.assert_allclose(m.predict(rng.normal(size=(5, 3))), 4.2, atol=1e-12)

    def test_rbf_self_kernel(self):
        assert KernelSpec("rbf", 3.0)(np.ones((1, 2)), np.ones((1, 2)))[0, 0] == 1.0

    def test_errors(self):
        h = SvrHyper(1.0, 0.1, LIN)
        with pytest.raises(DimensionMismatchError):
            train(np.zeros((3, 1)), np.zeros(2), h)
        with pytest.raises(NonFiniteInputError):
            train(np.array([[0.0], [np.nan]]), np.zeros(2), h)
        with pytest.raises(EmptyInputError):
            train(np.zeros((0, 1)), np.zeros(0), h)
        m = train(np.zeros((3, 2)), np.arange(3.0), h)
        with pytest.raises(DimensionMismatchError):
            m.predict([1.0, 2.0, 3.0])

    def test_hyper_validation(self):
        with pytest.raises(ValueError):
            SvrHyper(0.0, 0.1, LIN)
        with pytest.raises(ValueError):
            SvrHyper(1.0, -0.1, LIN)
        with pytest.raises(ValueError):
            KernelSpec("rbf", 0.0)

    @settings(max_examples=25)
    @given(
        st.integers(2, 25),
        st.sampled_from(["linear", "rbf"]),
        st.sampled_from([0.1, 1.0, 10.0, 100.0]),
        st.sampled_from([0.0, 0.01, 0.2]),
        st.integers(0, 2**16),
    )
    def test_dual_feasibility_and_tube(self, n, kind, C, eps, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 2))
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=n)
        m = train(X, y, SvrHyper(C, eps, KernelSpec(kind, 0.5)))
        beta = m.dual_coefs
        assert abs(beta.sum()) <= 1e-8 * C
        assert np.abs(beta).max(initial=0) <= C * (1 + 1e-12)
        # points strictly inside the box sit inside the tube
        resid = np.abs(y - m.predict(X))
        Xs = (X - m.feature_mean) / m.feature_scale
        coef = np.zeros(n)
        for i, row in enumerate(Xs):
            hit = np.flatnonzero((m.support_inputs == row).all(axis=1))
            if hit.size:
                coef[i] = m.dual_coefs[hit[0]]
        inside = np.abs(coef) < C - 1e-6
        assert np.all(resid[inside] <= eps + 1e-3)

    @settings(max_examples=15)
    @given(st.integers(2, 12), st.sampled_from(["linear", "rbf"]), st.integers(0, 2**16))
    def test_matches_qp_oracle(self, n, kind, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 2))
        y = rng.normal(size=n)
        h = SvrHyper(float(rng.choice([0.5, 5.0])), 0.05, KernelSpec(kind, 0.7))
        m = train(X, y, h, tol=1e-6)
        Xq = rng.normal(size=(4, 2))
        np.testing.assert_allclose(m.predict(Xq), oracle_predict(X, y, h, Xq), atol=1e-3)

    def test_objective_non_decreasing(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(30, 3))
        y = X @ [1.0, -2.0, 0.5] + 0.1 * rng.normal(size=30)
        m = train(X, y, SvrHyper(10.0, 0.05, KernelSpec("rbf", 0.3)), record_objective=True)
        tr = np.array(m.objective_trace)
        assert tr.size == m.iterations + 1
        assert np.all(np.diff(tr) >= -1e-12 * np.abs(tr).max())

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X, y = rng.normal(size=(15, 2)), rng.normal(size=15)
        h = SvrHyper(1.0, 0.05, KernelSpec("rbf", 1.0))
        a, b = train(X, y, h), train(X, y, h)
        np.testing.assert_array_equal(a.dual_coefs, b.dual_coefs)
        assert a.bias == b.bias

    def test_serialization_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        X, y = rng.normal(size=(15, 2)), rng.normal(size=15)
        m = train(X, y, SvrHyper(2.0, 0.05, KernelSpec("rbf", 0.8)))
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        Xq = rng.normal(size=(6, 2))
        np.testing.assert_allclose(back.predict(Xq), m.predict(Xq), rtol=0, atol=1e-12)


class TestGridSearch:
    def test_grid_of_one(self):
        h = SvrHyper(1.0, 0.1, LIN)
        best, scores = grid_search_cv(np.arange(10.0)[:, None], np.arange(10.0), [h], k=5)
        assert best is h and len(scores) == 1

    def test_duplicates_first_wins(self):
        a = SvrHyper(1.0, 0.1, LIN)
        b = SvrHyper(1.0, 0.1, LIN)
        best, _ = grid_search_cv(np.arange(10.0)[:, None], np.arange(10.0), [a, b], k=5)
        assert best is a

    def test_linear_beats_narrow_rbf(self):
        x = np.linspace(0, 10, 40)[:, None]
        y = 3 * x[:, 0] + 1
        lin = SvrHyper(100.0, 0.01, LIN)
        rbf = SvrHyper(0.01, 1.0, KernelSpec("rbf", 1000.0))
        best, scores = grid_search_cv(x, y, [rbf, lin], k=5, seed=1)
        assert best is lin and scores[1] < scores[0]

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            grid_search_cv(np.zeros((5, 1)), np.zeros(5), [])
        with pytest.raises(EmptyInputError):
            grid_search_cv(np.zeros((3, 1)), np.zeros(3), [SvrHyper(1, 0.1, LIN)], k=5)
        with pytest.raises(ValueError):
            grid_search_cv(np.zeros((5, 1)), np.zeros(5), [SvrHyper(1, 0.1, LIN)], k=1)

    def test_folds_partition(self):
        folds = kfold_indices(23, 5, seed=4)
        assert sorted(np.concatenate(folds).tolist()) == list(range(23))
        assert [len(f) for f in folds] == [5, 5, 5, 4, 4]
        np.testing.assert_array_equal(np.concatenate(folds), np.concatenate(kfold_indices(23, 5, 4)))

    def test_default_grids(self):
        assert exp_grid(-8, -1) == [2.0**-8, 2.0**-6, 2.0**-4, 2.0**-2]
        rbf = default_grid("rbf")
        lin = default_grid("linear")
        assert len(rbf) == 8 * 4 * 6 and len(lin) == 8 * 4
        assert min(h.C for h in rbf) == 2.0**-4 and max(h.C for h in rbf) == 2.0**10
        assert {h.kernel.gamma for h in rbf} == set(exp_grid(-6, 4))
        assert len(make_grid([1, 2], [0.1])) == 2
