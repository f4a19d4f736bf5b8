import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vfwforecast.cart import TreeHyperparams, fit_tree
from vfwforecast.ensemble import BaggingConfig, fit_bagging, fit_boosted
from vfwforecast.errors import DegenerateKernel, LengthMismatch, WrongEnsembleKind
from vfwforecast.importance import (PROPORTION_PRESETS, ImportanceConfig, ImportanceVector,
                                    LimeConfig, VoteProportions, boosting_gain_importance,
                                    combine_importance, compute_importances, lime_explain_local,
                                    lime_global_importance, lime_importance,
                                    permutation_importance, permutation_reliance, train_stats)


class Linear:
    def __init__(self, coef, intercept=0.0):
        self.coef = np.asarray(coef, float)
        self.intercept = intercept

    def predict(self, X):
        return self.intercept + np.atleast_2d(X) @ self.coef


class Constant:
    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), 4.0)


def _vec(v):
    return ImportanceVector(np.asarray(v, float) / np.sum(v))


def test_vector_invariants():
    with pytest.raises(ValueError):
        ImportanceVector(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        ImportanceVector(np.array([-0.1, 1.1]))
    assert ImportanceVector.from_raw([0, 0, 0], "lime").values.tolist() == [1 / 3] * 3
    assert ImportanceVector.from_raw([-1, 3], "lime").values.tolist() == [0.0, 1.0]
    v = _vec([1, 3, 2])
    assert v.ranking().tolist() == [1, 2, 0]
    assert ImportanceVector.from_dict(json.loads(json.dumps(v.to_dict()))).values.tolist() == v.values.tolist()


def test_combine_cases():
    a, b, c = _vec([1, 0, 0]), _vec([0, 1, 1]), _vec([1, 2, 1])
    avg = combine_importance([a, b, c], PROPORTION_PRESETS["avg"])
    assert np.allclose(avg.values, (a.values + b.values + c.values) / 3, atol=1e-15)
    assert combine_importance([a, b, c], VoteProportions(1, 0, 0)).values.tolist() == a.values.tolist()
    case1 = combine_importance([a, b, c], PROPORTION_PRESETS["case1"])
    assert np.allclose(case1.values, 0.5 * a.values + 0.3 * b.values + 0.2 * c.values, atol=1e-15)
    with pytest.raises(LengthMismatch):
        combine_importance([a, b, _vec([1, 1])])
    with pytest.raises(LengthMismatch):
        combine_importance([a, b])


def test_presets_match_study_layout():
    assert PROPORTION_PRESETS["case1"].as_array().tolist() == [0.5, 0.3, 0.2]
    assert PROPORTION_PRESETS["case2"].as_array().tolist() == [0.2, 0.3, 0.5]
    assert PROPORTION_PRESETS["case3"].as_array().tolist() == [0.5, 0.2, 0.3]
    assert VoteProportions.parse("0.2,0.3,0.5") == PROPORTION_PRESETS["case2"]
    with pytest.raises(ValueError):
        VoteProportions(0.5, 0.5, 0.5)


@given(seed=st.integers(0, 10**6), n=st.integers(2, 8))
def test_combine_sum_and_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    vs = [_vec(rng.uniform(0.01, 1, n)) for _ in range(3)]
    d = rng.dirichlet(np.ones(3))
    p = VoteProportions(d[0], d[1], 1 - d[0] - d[1])
    out = combine_importance(vs, p)
    assert abs(out.values.sum() - 1) <= 1e-12
    perm = rng.permutation(n)
    permuted = combine_importance([ImportanceVector(v.values[perm]) for v in vs], p)
    assert np.allclose(permuted.values, out.values[perm], atol=1e-15)


def _replay_gains(e, X, y):
    """Route each round's residuals through serialised trees and sum SSE drops."""
    gains = np.zeros(X.shape[1])
    F = np.full(len(y), json.loads(json.dumps(e.base_value)))
    for td in json.loads(json.dumps(e.to_dict()))["members"]:
        nodes = {nd["id"]: nd for nd in td["nodes"]}
        r = y - F
        leaf_of = np.empty(len(y), int)
        members = {0: np.arange(len(y))}
        for k in sorted(nodes):
            nd = nodes[k]
            rows = members[k]
            if "feature" not in nd:
                leaf_of[rows] = k
                continue
            go = X[rows, nd["feature"]] < nd["threshold"]
            members[nd["left"]], members[nd["right"]] = rows[go], rows[~go]
            sse = lambda ix: float(np.sum((r[ix] - r[ix].mean()) ** 2)) if len(ix) else 0.0
            gains[nd["feature"]] += sse(rows) - sse(rows[go]) - sse(rows[~go])
        F = F + e.learning_rate * np.array([nodes[k]["value"] for k in leaf_of])
    return gains / gains.sum()


def test_boosting_gain_matches_replay():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 4))
    y = 2 * X[:, 0] + np.sin(X[:, 1]) + rng.normal(scale=0.2, size=300)
    e = fit_boosted(X, y, n_rounds=20, learning_rate=0.1)
    assert np.allclose(boosting_gain_importance(e).values, _replay_gains(e, X, y), rtol=1e-8, atol=1e-12)


def test_boosting_gain_one_hot_and_kind():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 3))
    y = np.where(X[:, 2] > 0, 5.0, -5.0)
    e = fit_boosted(X, y, n_rounds=5, tree_hp=TreeHyperparams(max_depth=1, min_samples_leaf=1))
    assert boosting_gain_importance(e).values.tolist() == [0.0, 0.0, 1.0]
    with pytest.raises(WrongEnsembleKind):
        boosting_gain_importance(fit_bagging(X, y, BaggingConfig(n_estimators=2)))


def test_boosting_gain_ranks_generator_above_noise():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(300, 2))
        y = 3 * X[:, 0] + rng.normal(size=300)
        v = boosting_gain_importance(fit_boosted(X, y, n_rounds=30)).values
        wins += v[1] < v[0]
    assert wins >= 19


def test_lime_recovers_linear_map():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(500, 2)) * [3.0, 0.5] + [1.0, -2.0]
    stats = train_stats(X)
    coef = lime_explain_local(Linear([2.0, 0.0]), X[0], LimeConfig(seed=1), stats)
    sd1 = stats[1][0]
    assert abs(coef[0] - 2 * sd1) <= 0.1 * 2 * sd1
    assert abs(coef[1]) <= 0.1 * 2 * sd1


def test_lime_constant_and_determinism():
    X = np.random.default_rng(3).normal(size=(100, 3))
    stats = train_stats(X)
    assert np.all(np.abs(lime_explain_local(Constant(), X[1], LimeConfig(), stats)) <= 1e-6)
    assert lime_global_importance(Constant(), X[:5], LimeConfig(n_perturbations=200)).values.tolist() == [1 / 3] * 3
    a = lime_explain_local(Linear([1, 2, 3]), X[2], LimeConfig(seed=9), stats)
    b = lime_explain_local(Linear([1, 2, 3]), X[2], LimeConfig(seed=9), stats)
    assert np.array_equal(a, b)


def test_lime_global_linear_and_convergence():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 3))
    v = lime_importance(Linear([5.0, 0.0, 0.0]), X, LimeConfig(n_anchor_points=20, n_perturbations=1000))
    assert v.values[0] >= 0.9
    # nonlinear model: local slopes stabilise as the perturbation count doubles
    class Quad:
        def predict(self, Z):
            Z = np.atleast_2d(Z)
            return Z[:, 0] ** 2 + 3 * Z[:, 1]
    stats = train_stats(X)
    c5 = lime_explain_local(Quad(), X[0], LimeConfig(n_perturbations=5000, seed=5), stats)
    c10 = lime_explain_local(Quad(), X[0], LimeConfig(n_perturbations=10000, seed=5), stats)
    big = np.abs(c10) > 0.1
    assert np.all(np.abs(c5[big] - c10[big]) < 0.05 * np.abs(c10[big]))


def test_lime_degenerate_kernel():
    X = np.random.default_rng(5).normal(size=(50, 2))
    with pytest.raises(DegenerateKernel):
        lime_explain_local(Linear([1, 1]), X[0], LimeConfig(kernel_width=1e-200), train_stats(X))


def test_permutation_cases():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(400, 3))
    y = 4 * X[:, 0] + rng.normal(scale=0.1, size=400)
    t = fit_tree(X, y, TreeHyperparams(min_samples_leaf=5), feature_subset=[0, 2])
    raw = permutation_reliance(t, X, y, seed=1)
    assert raw[1] == 0.0
    ident = Linear([0.0, 1.0, 0.0])
    assert permutation_importance(ident, X, X[:, 1], seed=2).values.tolist() == [0.0, 1.0, 0.0]
    a = permutation_importance(t, X, y, seed=3)
    b = permutation_importance(t, X, y, seed=3)
    assert a.values.tolist() == b.values.tolist()


def test_compute_importances_all_methods_rank_generator_first():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(600, 4))
    y = 3 * X[:, 0] + rng.normal(scale=0.5, size=600)
    cfg = ImportanceConfig(lime=LimeConfig(n_perturbations=500, n_anchor_points=20),
                           boost_rounds=30, reference=BaggingConfig(10, forest=True),
                           permutation=True, permutation_repeats=3)
    out = compute_importances(X, y, cfg, seed=1)
    assert set(out) == {"elastic_net", "boosting_gain", "lime", "permutation", "combined"}
    for name, v in out.items():
        assert abs(v.values.sum() - 1) <= 1e-12
        assert v.ranking()[0] == 0, name
    again = compute_importances(X, y, cfg, seed=1)
    assert all(np.array_equal(out[k].values, again[k].values) for k in out)
