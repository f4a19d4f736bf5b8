"""CART, bagging, random forest and boosting, plus the bias-variance view.

    python3 demos/02_trees_and_ensembles.py
"""
import numpy as np

from vfwforecast import (BaggingConfig, TreeHyperparams, bias_variance_estimate, fit_bagging,
                         fit_boosted, fit_tree, rmse)
from vfwforecast.evaluation import pv_world
from vfwforecast.models import ModelSpec

rng = np.random.default_rng(0)
X = rng.uniform(-3, 3, size=(2000, 3))
y = np.sin(X[:, 0]) * 4 + X[:, 1] ** 2 + rng.normal(scale=0.5, size=2000)
Xt = rng.uniform(-3, 3, size=(1000, 3))
yt = np.sin(Xt[:, 0]) * 4 + Xt[:, 1] ** 2

hp = TreeHyperparams(max_depth=8, min_samples_leaf=20, max_leaf_nodes=100)
tree = fit_tree(X, y, hp)
print(f"single tree: {tree.n_leaves} leaves, depth {tree.depth.max()}, "
      f"test RMSE {rmse(tree.predict(Xt), yt):.3f}")

bag = fit_bagging(X, y, BaggingConfig(n_estimators=50, tree_hp=hp, forest=False, seed=1))
forest = fit_bagging(X, y, BaggingConfig(n_estimators=50, tree_hp=hp, forest=True, seed=1))
boost = fit_boosted(X, y, n_rounds=200, learning_rate=0.1,
                    tree_hp=TreeHyperparams(max_depth=3, min_samples_leaf=1, max_leaf_nodes=8))
for name, m in (("bagging", bag), ("forest", forest), ("boosting", boost)):
    print(f"{name:9s} test RMSE {rmse(m.predict(Xt), yt):.3f}")
print(f"boosting training loss: {boost.loss_trace[0]:.2f} -> {boost.loss_trace[-1]:.3f}")

# averaging bootstrap trees mostly removes variance, leaving bias alone
world = pv_world(n_train=300, sigma=200.0)
probe = np.random.default_rng(1).uniform([6, 0.05], [18, 1], size=(200, 2))
for spec in (ModelSpec("dt"), ModelSpec("forest", {"n_estimators": 25})):
    r = bias_variance_estimate(spec, world, 100, probe, seed=3)
    print(f"{spec.name:6s} bias^2 {r.bias_sq:9.0f}  variance {r.variance:9.0f}  "
          f"noise {r.noise:7.0f}  measured {r.total_err:9.0f}  sum {r.decomposed:9.0f}")
