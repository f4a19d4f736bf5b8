"""Synthetic PV data, cleaning, lag features and the chronological split.

    python3 demos/01_data_pipeline.py
"""
import numpy as np

from vfwforecast import SynthConfig, add_lag_features, add_noise_feature, clean, split, synth_generate
from vfwforecast.dataset import DAY_S

raw = synth_generate(SynthConfig(n_days=380, seed=1))
print(f"raw rows: {len(raw)}  ({len(raw) // 288} days at 5-minute cadence)")
print("columns:", ", ".join(raw.feature_names), "->", raw.target_name)

d, removed = clean(raw)
print(f"clean removed {removed} rows")

# previous-year power at the same instant plus an hour-of-day column;
# the first year has no lag source and is dropped
d = add_lag_features(d)
d = add_noise_feature(d, seed=1)
print(f"with lag features: {len(d)} rows, features {d.feature_names}")

train, test = split(d)
print(f"train {len(train)} rows, test {len(test)} rows")
print("last train instant precedes first test instant:",
      bool(train.timestamps.max() < test.timestamps.min()))

lag = d.feature_names.index("pv_prev_year")
src = np.searchsorted(raw.timestamps, train.timestamps[:5] - 365 * DAY_S)
print("lag column equals power one year earlier:",
      np.array_equal(train.features[:5, lag], raw.target[src]))
