"""Leave-one-feature-out subsystems recombined by importance-derived weights.

    python3 demos/04_voted_feature_weighting.py
"""
from dataclasses import replace

import numpy as np

from vfwforecast import (ImportanceConfig, LimeConfig, SynthConfig, VfwConfig, add_lag_features,
                         add_noise_feature, compute_importances, fit_bagging, fit_gnb, fit_vfw,
                         recombination_weights, rmse, split, synth_generate)
from vfwforecast.vfw import DEFAULT_FOREST

d = add_noise_feature(add_lag_features(synth_generate(SynthConfig(n_days=730, seed=5))), seed=5)
train, test = split(d)
base = replace(DEFAULT_FOREST, n_estimators=20, seed=5)

imp = compute_importances(train.features, train.target,
                          ImportanceConfig(lime=LimeConfig(n_perturbations=1000, n_anchor_points=30),
                                           reference=replace(base, n_estimators=10),
                                           sample_size=20000), seed=5)["combined"]

print("hand check, complement weights of [0.9, 0.05, 0.05]:",
      recombination_weights(np.array([0.9, 0.05, 0.05])))

model = fit_vfw(train, VfwConfig(base=base), imp)
print(f"\n{len(model.subsystems)} subsystems, one per excluded feature")
for s, w in zip(model.subsystems, model.recombination_weights):
    name = d.feature_names[s.excluded_feature]
    print(f"  without {name:13s} importance {imp.values[s.excluded_feature]:.3f}  weight {w:.3f}")

literal = fit_vfw(train, VfwConfig(base=base, weight_mode="literal"), imp)
forest = fit_bagging(train.features, train.target, base)
gnb = fit_gnb(train.features, train.target)
print()
for name, m in (("vfw complement", model), ("vfw literal", literal), ("forest", forest),
                ("gnb", gnb)):
    print(f"{name:15s} test RMSE {rmse(m.predict(test.features), test.target):8.3f}")

# weights can be swapped without refitting
sub = model.subsystem_predictions(test.features[:3])
one = model.with_weights(np.eye(d.n_features)[0]).predict(test.features[:3])
print("\none-hot weights reproduce subsystem 0:", np.array_equal(one, sub[0]))
