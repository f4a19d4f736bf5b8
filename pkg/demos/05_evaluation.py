"""Cross-validation, model comparison and horizon traces.

    python3 demos/05_evaluation.py [outdir]
"""
import os
import sys

from vfwforecast import SynthConfig, add_lag_features, compare_models, kfold_cv, split, synth_generate
from vfwforecast.evaluation import horizon_rows, write_report_csv, write_trace_csv
from vfwforecast.models import ModelSpec, proportion_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)

d = add_lag_features(synth_generate(SynthConfig(n_days=730, seed=6)))
train, test = split(d)

cv = kfold_cv(train, 10, ModelSpec("dt"), seed=0)
print(f"10-fold CV of a default tree: mean R^2 {cv.mean_r2:.4f}, "
      f"fold sizes {sorted({len(f) for f in cv.fold_indices})}")

small = {"n_estimators": 10, "lime_perturbations": 800, "lime_anchors": 30,
         "reference_estimators": 10}
specs = [ModelSpec("dt"), ModelSpec("knn"), ModelSpec("gnb"), ModelSpec("vfw", small)]
specs += proportion_sweep(ModelSpec("vfw", small))
cmp = compare_models(train, test, specs, seed=0)
print(f"\n{'model':11s}{'RMSE':>10s}{'MAE':>10s}{'R^2':>9s}")
for r in cmp.rows:
    print(f"{r.label:11s}{r.report.rmse:10.3f}{r.report.mae:10.3f}{r.report.r2:9.4f}")

write_report_csv(os.path.join(out, "report.csv"), cmp)
for h in ("day", "week"):
    rows = horizon_rows(test, h)
    write_trace_csv(os.path.join(out, f"trace_{h}.csv"), test, cmp.predictions, rows)
    print(f"{h} trace: {len(rows)} rows -> {out}/trace_{h}.csv")
