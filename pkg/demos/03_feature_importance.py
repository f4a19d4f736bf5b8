"""Four importance methods and the voted combination.

    python3 demos/03_feature_importance.py
"""
import numpy as np

from vfwforecast import (ImportanceConfig, LimeConfig, SynthConfig, VoteProportions,
                         add_lag_features, add_noise_feature, combine_importance,
                         compute_importances, split, synth_generate)
from vfwforecast.importance import PROPORTION_PRESETS

d = add_noise_feature(add_lag_features(synth_generate(SynthConfig(n_days=400, seed=2))), seed=2)
train, _ = split(d)

cfg = ImportanceConfig(lime=LimeConfig(n_perturbations=1000, n_anchor_points=40),
                       permutation=True, sample_size=8000)
vec = compute_importances(train.features, train.target, cfg, seed=0)

cols = ["lime", "elastic_net", "boosting_gain", "permutation", "combined"]
print(f"{'feature':14s}" + "".join(f"{c:>15s}" for c in cols))
for j, name in enumerate(d.feature_names):
    print(f"{name:14s}" + "".join(f"{vec[c].values[j]:15.4f}" for c in cols))

noise = d.feature_names.index("noise")
print("\nplanted noise column rank under each method:",
      {c: int(np.flatnonzero(vec[c].ranking() == noise)[0]) + 1 for c in cols})

# the vote proportions weight (LIME, elastic net, boosting gain) in that order
three = [vec["lime"], vec["elastic_net"], vec["boosting_gain"]]
for case, p in PROPORTION_PRESETS.items():
    c = combine_importance(three, p)
    top = d.feature_names[int(c.ranking()[0])]
    print(f"{case:6s} {np.round(p.as_array(), 3)}: top {top}, "
          f"sum {c.values.sum():.15f}")
print("custom:", combine_importance(three, VoteProportions(0.1, 0.1, 0.8)).values.round(3))
