import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vfwforecast.baselines import (GnbModel, KnnModel, fit_gnb, fit_knn, predict_gnb,
                                   predict_knn)
from vfwforecast.errors import ArityMismatch, EmptyGrid, InsufficientData


def knn_oracle(m, q):
    """Exhaustive distances, ordered by (distance, row index)."""
    z = (q - m.x_mean) / m.x_scale
    d = np.zeros(len(m.train_y))
    for j in range(m.train_X.shape[1]):
        d += (m.train_X[:, j] - z[j]) ** 2
    idx = np.lexsort((np.arange(len(d)), d))[:m.k]
    return m.train_y[idx].mean(), idx


@given(seed=st.integers(0, 10**6), n=st.integers(3, 300), k=st.integers(1, 10))
def test_knn_matches_oracle(seed, n, k):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, 2)).astype(float)   # many exact ties
    y = rng.normal(size=n)
    k = min(k, n)
    m = fit_knn(X, y, [k])
    Q = rng.integers(0, 4, size=(20, 2)).astype(float)
    nb = m.neighbors(Q)
    for i, q in enumerate(Q):
        val, idx = knn_oracle(m, q)
        assert nb[i].tolist() == idx.tolist()
        assert predict_knn(m, q) == pytest.approx(val, rel=1e-12, abs=1e-12)


def test_knn_ten_row_brute_force():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(10, 3)), rng.normal(size=10)
    m = fit_knn(X, y, [3])
    for q in rng.normal(size=(5, 3)):
        assert m.predict(q) == pytest.approx(knn_oracle(m, q)[0], rel=1e-12)


def test_knn_trivial_cases():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    assert fit_knn(X, y, [1]).k == 1
    assert fit_knn(X, y, [1]).predict(X[7]) == y[7]
    full = fit_knn(X, y, [30])
    assert full.predict(rng.normal(size=2)) == pytest.approx(y.mean(), rel=1e-12)
    with pytest.raises(EmptyGrid):
        fit_knn(X, y, [])
    with pytest.raises(InsufficientData):
        fit_knn(X, y, [1, 40])
    with pytest.raises(ArityMismatch):
        full.predict(np.zeros(3))


def test_knn_cv_small_k_on_noiseless_linear():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(500, 2))
    y = X @ [2.0, -1.0]
    a = fit_knn(X, y, seed=4)
    assert a.k <= 5
    assert fit_knn(X, y, seed=4).k == a.k


def test_knn_affine_invariance():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(100, 3)), rng.normal(size=100)
    Q = rng.normal(size=(20, 3))
    a = fit_knn(X, y, [4]).predict(Q)
    X2, Q2 = X.copy(), Q.copy()
    X2[:, 1] = 8 * X2[:, 1] + 3
    Q2[:, 1] = 8 * Q2[:, 1] + 3
    assert np.allclose(fit_knn(X2, y, [4]).predict(Q2), a, rtol=1e-12)


def test_gnb_separable_bimodal():
    rng = np.random.default_rng(6)
    x = np.concatenate([rng.normal(0, 1, 100), rng.normal(20, 1, 100)])
    y = np.concatenate([rng.normal(0, 0.5, 100), rng.normal(100, 0.5, 100)])
    m = fit_gnb(x[:, None], y, n_bins=2)
    assert abs(m.representatives[0]) < 1 and abs(m.representatives[1] - 100) < 1
    assert abs(predict_gnb(m, [20.0]) - 100) < 1
    # hand posterior
    mu, sd, pr = m.means[:, 0], m.sds[:, 0], m.priors
    lik = pr * np.exp(-0.5 * ((20.0 - mu) / sd) ** 2) / sd
    assert predict_gnb(m, [20.0]) == pytest.approx(lik @ m.representatives / lik.sum(), rel=1e-9)


def test_gnb_invariants():
    rng = np.random.default_rng(7)
    X = np.column_stack([rng.normal(size=200), np.full(200, 3.0)])   # constant column
    y = rng.exponential(size=200)
    m = fit_gnb(X, y)
    assert m.priors.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(m.sds > 0)
    Q = rng.normal(size=(50, 2)) * 3
    post = m.posterior(Q)
    assert np.allclose(post.sum(axis=1), 1.0, atol=1e-12)
    p = m.predict(Q)
    assert np.all(np.isfinite(p))
    assert np.all((p >= m.representatives.min() - 1e-9) & (p <= m.representatives.max() + 1e-9))
    single = fit_gnb(X, y, n_bins=1)
    assert single.predict(Q[0]) == pytest.approx(y.mean(), rel=1e-12)
    with pytest.raises(InsufficientData):
        fit_gnb(X[:5], y[:5], n_bins=20)


def test_json_round_trips():
    rng = np.random.default_rng(8)
    X, y = rng.normal(size=(60, 2)), rng.normal(size=60)
    for m, cls in ((fit_knn(X, y, [1, 3]), KnnModel), (fit_gnb(X, y, 4), GnbModel)):
        back = cls.from_dict(json.loads(json.dumps(m.to_dict())))
        assert np.array_equal(back.predict(X), m.predict(X))
