import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vfwforecast.cart import RegressionTree, TreeHyperparams, fit_tree, predict_tree
from vfwforecast.errors import ArityMismatch, EmptyTrainingSet

DEFAULT_HP = TreeHyperparams(max_depth=8, min_samples_leaf=20, max_leaf_nodes=100, seed=0)


def brute_force_split(X, y, min_leaf):
    """Exhaustive search over (feature, midpoint) minimising n_L Var_L + n_R Var_R."""
    best = None
    n, p = X.shape
    for f in range(p):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (a + b)
            if not thr > a:
                thr = b
            left = X[:, f] < thr
            nl, nr = left.sum(), (~left).sum()
            if nl < min_leaf or nr < min_leaf:
                continue
            imp = nl * y[left].var() + nr * y[~left].var()
            if best is None or imp < best[2] * (1 - 1e-12):
                best = (f, thr, imp)
    return best


def _datasets(count, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(5, 201))
        p = int(rng.integers(1, 5))
        if i % 3 == 0:
            X = rng.integers(0, 8, size=(n, p)).astype(float)   # repeated values
        else:
            X = rng.normal(size=(n, p))
        y = np.sin(X[:, 0]) * 3 + rng.normal(size=n)
        yield X, y, int(rng.integers(1, 6))


def test_root_split_matches_brute_force_on_100_datasets():
    checked = 0
    for X, y, leaf in _datasets(100):
        t = fit_tree(X, y, TreeHyperparams(max_depth=1, min_samples_leaf=leaf, max_leaf_nodes=2))
        bf = brute_force_split(X, y, leaf)
        if bf is None:
            assert t.n_nodes == 1
            continue
        f, thr, imp = bf
        assert t.feature[0] == f
        assert t.threshold[0] == thr
        assert np.isclose(t.impurity[1] + t.impurity[2], imp, rtol=1e-9, atol=1e-9)
        checked += 1
    assert checked > 80


def test_every_split_is_locally_optimal():
    # with no leaf cap, each internal node's split is the brute-force best for its rows
    for X, y, leaf in _datasets(20, seed=1):
        hp = TreeHyperparams(max_depth=4, min_samples_leaf=leaf, max_leaf_nodes=10**6)
        t = fit_tree(X, y, hp)
        reach = t.apply(X)
        # rows reaching each node, by replaying the path from the root
        rows = {0: np.arange(len(y))}
        for k in range(t.n_nodes):
            if t.feature[k] < 0:
                continue
            r = rows[k]
            go = X[r, t.feature[k]] < t.threshold[k]
            rows[t.left[k]], rows[t.right[k]] = r[go], r[~go]
            f, thr, imp = brute_force_split(X[r], y[r], leaf)
            assert (t.feature[k], t.threshold[k]) == (f, thr)
        for k, r in rows.items():
            if t.feature[k] < 0:
                assert np.all(reach[r] == k)


def test_constant_target_single_leaf():
    X = np.random.default_rng(0).normal(size=(50, 3))
    t = fit_tree(X, np.full(50, 7.5), TreeHyperparams(min_samples_leaf=1))
    assert t.n_nodes == 1 and t.value[0] == 7.5
    assert predict_tree(t, X[0]) == 7.5


def test_step_data():
    x = np.round(np.arange(0.0, 10.0, 0.1), 10)
    y = np.where(x < 5, 0.0, 10.0)
    t = fit_tree(x[:, None], y, TreeHyperparams(min_samples_leaf=1))
    assert t.n_leaves == 2
    assert x[x < 5].max() < t.threshold[0] < x[x >= 5].min()
    assert sorted(t.value[t.is_leaf].tolist()) == [0.0, 10.0]
    assert predict_tree(t, [4.9]) == 0.0 and predict_tree(t, [5.1]) == 10.0
    assert brute_force_split(x[:, None], y, 1)[:2] == (0, t.threshold[0])


def test_interpolation_zero_training_error():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(50, 2))
    y = rng.normal(size=50)
    t = fit_tree(X, y, TreeHyperparams(max_depth=10**6, min_samples_leaf=1, max_leaf_nodes=50))
    assert np.sqrt(np.mean((t.predict(X) - y) ** 2)) == 0.0


@given(seed=st.integers(0, 2**31), power=st.floats(0.2, 5.0), shift=st.floats(-10, 10))
def test_monotone_rescaling_invariance(seed, power, shift):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.1, 3.0, size=(120, 3))
    y = X[:, 0] ** 2 - X[:, 1] + rng.normal(scale=0.1, size=120)
    hp = TreeHyperparams(max_depth=5, min_samples_leaf=3, max_leaf_nodes=20)
    Xt = np.column_stack([X[:, 0] ** power, np.exp(X[:, 1]) + shift, 3 * X[:, 2]])
    a = fit_tree(X, y, hp).predict(X)
    b = fit_tree(Xt, y, hp).predict(Xt)
    assert np.array_equal(a, b)


def test_positive_scale_invariance():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(300, 4))
    y = X @ [1.0, -2.0, 0.5, 0.0] + rng.normal(scale=0.2, size=300)
    s = np.array([1e-3, 7.0, 0.37, 250.0])
    Q = rng.normal(size=(500, 4))
    a = fit_tree(X, y, DEFAULT_HP).predict(Q)
    b = fit_tree(X * s, y, DEFAULT_HP).predict(Q * s)
    assert np.array_equal(a, b)


def test_default_bounds_and_leaf_means():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(5000, 5))
    y = np.sin(2 * X[:, 0]) + X[:, 1] * X[:, 2] + rng.normal(scale=0.3, size=5000)
    t = fit_tree(X, y, DEFAULT_HP)
    leaves = t.is_leaf
    assert t.max_depth <= 8
    assert t.n_leaves <= 100
    assert t.n_samples[leaves].min() >= 20
    internal = ~leaves
    assert np.all(t.gain[internal] >= 0)
    assert np.all((t.left[internal] >= 0) & (t.right[internal] >= 0))
    # prediction equals the mean of training targets in the reached leaf
    reach = t.apply(X)
    for k in np.flatnonzero(leaves):
        assert np.isclose(t.value[k], y[reach == k].mean(), rtol=1e-12, atol=1e-12)


def test_training_rmse_non_increasing_in_leaf_cap():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(800, 3))
    y = np.abs(X[:, 0]) + X[:, 1] + rng.normal(scale=0.2, size=800)
    errs = []
    for cap in (2, 4, 8, 16, 32, 64, 128):
        t = fit_tree(X, y, TreeHyperparams(max_depth=20, min_samples_leaf=5, max_leaf_nodes=cap))
        errs.append(np.sqrt(np.mean((t.predict(X) - y) ** 2)))
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_arity_and_empty():
    t = fit_tree(np.arange(30.0)[:, None], np.arange(30.0), TreeHyperparams(min_samples_leaf=1))
    with pytest.raises(ArityMismatch):
        t.predict(np.zeros((3, 2)))
    with pytest.raises(EmptyTrainingSet):
        fit_tree(np.zeros((0, 2)), np.zeros(0))


def test_json_round_trip():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(400, 3))
    y = X[:, 0] + rng.normal(size=400)
    t = fit_tree(X, y, DEFAULT_HP)
    back = RegressionTree.from_dict(json.loads(json.dumps(t.to_dict())))
    assert np.array_equal(back.predict(X), t.predict(X))
    assert np.array_equal(back.feature_gains(), t.feature_gains())


def test_feature_subset_and_hyperparam_validation():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, 3))
    y = 5 * X[:, 0] + X[:, 2]
    t = fit_tree(X, y, TreeHyperparams(min_samples_leaf=5), feature_subset=[1, 2])
    assert set(t.feature[t.feature >= 0].tolist()) <= {1, 2}
    for bad in ({"max_depth": 0}, {"min_samples_leaf": 0}, {"max_leaf_nodes": 1}):
        with pytest.raises(ValueError):
            TreeHyperparams(**bad)
