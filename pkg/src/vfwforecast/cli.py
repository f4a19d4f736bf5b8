"""Command-line entry point: ``vfwforecast <command> [options]``.

Commands share one JSON run configuration (see ``RunConfig``); flags
override file values. Exit status is 0 on success, 1 on a runtime or
model failure and 2 on an invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .dataset import (SplitSpec, SynthConfig, add_lag_features, add_noise_feature, clean,
                      format_timestamp, load_csv, save_csv, split, synth_generate)
from .errors import ConfigError, VfwError
from .evaluation import (HORIZON_DAYS, MetricReport, compare_models, horizon_rows, kfold_cv,
                         write_json, write_report_csv, write_trace_csv)
from .importance import compute_importances
from .models import (DEFAULTS, ModelSpec, importance_config, load_model, proportion_sweep,
                     save_model)
from .rng import derive_seed

COMMANDS = ("synth", "train", "predict", "importance", "cv", "compare")
DEFAULT_COMPARE = ({"name": "dt"}, {"name": "knn"}, {"name": "gnb"}, {"name": "vfw"})


@dataclass
class RunConfig:
    """Parsed run configuration.

    JSON layout::

        {"seed": 0,
         "data": {"synth": {...SynthConfig fields...}} | {"csv": "path.csv"},
         "features": {"prev_year": true, "hour_indicator": true, "noise_feature": false},
         "split": {"train_fraction": 0.8, "mode": "chronological"},
         "model": {"name": "vfw", "params": {...}},
         "models": [{"name": "dt"}, ...],
         "importance": {"permutation": false, ...vfw importance params...},
         "cv": {"k": 10, "mode": "shuffle"},
         "horizons": ["day", "week", "2months"]}
    """

    seed: int = 0
    data: dict = field(default_factory=lambda: {"synth": {}})
    features: dict = field(default_factory=lambda: {"prev_year": True, "hour_indicator": True,
                                                    "noise_feature": False})
    split: dict = field(default_factory=dict)
    model: dict = field(default_factory=lambda: {"name": "vfw"})
    models: list = field(default_factory=lambda: [dict(m) for m in DEFAULT_COMPARE])
    importance: dict = field(default_factory=dict)
    cv: dict = field(default_factory=lambda: {"k": 10, "mode": "shuffle"})
    horizons: list = field(default_factory=lambda: list(HORIZON_DAYS))

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for k in d:
            if k not in known:
                raise ConfigError(k, "unknown configuration key")
        cfg = cls(**d)
        cfg.validate(base_dir)
        return cfg

    def validate(self, base_dir: str = ".") -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        if not isinstance(self.data, dict) or len(self.data) != 1 or \
                next(iter(self.data)) not in ("synth", "csv"):
            raise ConfigError("data", "give exactly one of 'synth' or 'csv'")
        if "csv" in self.data:
            path = os.path.join(base_dir, self.data["csv"])
            if not os.path.isfile(path):
                raise ConfigError("data.csv", f"file not found: {self.data['csv']}")
            self.data = {"csv": path}
        else:
            self.synth_config()
        for k in self.features:
            if k not in ("prev_year", "hour_indicator", "noise_feature"):
                raise ConfigError(f"features.{k}", "unknown feature option")
        self.split_spec()
        self.model_spec()
        self.compare_specs()
        for h in self.horizons:
            if h not in HORIZON_DAYS:
                raise ConfigError("horizons", f"unknown horizon {h!r}")
        if int(self.cv.get("k", 10)) < 2:
            raise ConfigError("cv.k", "must be >= 2")
        if self.cv.get("mode", "shuffle") not in ("shuffle", "blocked"):
            raise ConfigError("cv.mode", "must be shuffle or blocked")
        self.importance_params()

    def synth_config(self) -> SynthConfig:
        opts = dict(self.data["synth"])
        opts.setdefault("seed", derive_seed(self.seed, "data"))
        try:
            return SynthConfig(**opts)
        except ConfigError as exc:
            raise ConfigError(f"data.synth.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        except TypeError as exc:
            raise ConfigError("data.synth", str(exc)) from None

    def split_spec(self) -> SplitSpec:
        try:
            return SplitSpec(**self.split)
        except TypeError as exc:
            raise ConfigError("split", str(exc)) from None

    def model_spec(self) -> ModelSpec:
        return _spec(self.model, "model")

    def compare_specs(self) -> list:
        if not self.models:
            raise ConfigError("models", "needs at least one model")
        return [_spec(m, f"models[{i}]") for i, m in enumerate(self.models)]

    def importance_params(self) -> tuple:
        extra = dict(self.importance)
        permutation = bool(extra.pop("permutation", False))
        for k in extra:
            if k not in DEFAULTS["vfw"]:
                raise ConfigError(f"importance.{k}", "unknown importance option")
        params = {k: v for k, v in {**DEFAULTS["vfw"], **self.model.get("params", {}),
                                    **extra}.items()}
        try:
            return importance_config(params), permutation
        except (ValueError, TypeError) as exc:
            raise ConfigError("importance", str(exc)) from None


def _spec(d, where) -> ModelSpec:
    if not isinstance(d, dict) or "name" not in d:
        raise ConfigError(f"{where}.name", "model entries need a name")
    try:
        return ModelSpec(d["name"], dict(d.get("params", {})), d.get("label"))
    except ConfigError as exc:
        raise ConfigError(f"{where}.{exc.field}", str(exc).split(": ", 1)[-1]) from None


# ---------------------------------------------------------------- pipeline

def load_data(cfg: RunConfig):
    if "csv" in cfg.data:
        return load_csv(cfg.data["csv"])
    return synth_generate(cfg.synth_config())


def prepare(cfg: RunConfig):
    """clean -> lag features -> optional noise column. Returns (dataset, removed)."""
    d, removed = clean(load_data(cfg))
    f = cfg.features
    prev_year = bool(f.get("prev_year", True))
    hour = bool(f.get("hour_indicator", True))
    if prev_year or hour:
        d = add_lag_features(d, prev_year=prev_year, hour_indicator=hour)
    if f.get("noise_feature", False):
        d = add_noise_feature(d, seed=derive_seed(cfg.seed, "noise_feature"))
    return d, removed


def _importance_csv(path, names, vectors) -> None:
    methods = [m for m in ("lime", "elastic_net", "boosting_gain", "permutation", "combined")
               if m in vectors]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *methods])
        for j, name in enumerate(names):
            w.writerow([name, *(repr(float(vectors[m].values[j])) for m in methods)])


def _metric_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "rmse", "mae", "r2", "n"])
        for name, rep in rows:
            d = rep.to_dict()
            w.writerow([name, repr(d["rmse"]), repr(d["mae"]),
                        "" if d["r2"] is None else repr(d["r2"]), d["n"]])


# ---------------------------------------------------------------- commands

def cmd_synth(cfg: RunConfig, out: str, args) -> int:
    if "synth" not in cfg.data:
        raise ConfigError("data", "synth needs a 'synth' data source")
    d = synth_generate(cfg.synth_config())
    path = os.path.join(out, "data.csv")
    save_csv(d, path)
    print(f"wrote {len(d)} rows to {path}")
    return 0


def cmd_train(cfg: RunConfig, out: str, args) -> int:
    spec = cfg.model_spec()
    d, removed = prepare(cfg)
    train, test = split(d, cfg.split_spec())
    model = spec.fit(train, seed=cfg.seed)
    rep = MetricReport.score(model.predict(test.features), test.target)
    save_model(os.path.join(out, "model.json"), model, spec, d.feature_names, cfg.seed)
    write_json(os.path.join(out, "report.json"),
               {"command": "train", "model": spec.to_dict(), "seed": cfg.seed,
                "feature_names": list(d.feature_names), "rows_removed": removed,
                "n_train": len(train), "n_test": len(test), "test": rep.to_dict()})
    _metric_csv(os.path.join(out, "report.csv"), [(spec.display, rep)])
    if spec.name == "vfw":
        vec = {"combined": model.importance}
        _importance_csv(os.path.join(out, "importance.csv"), d.feature_names, vec)
    print(f"{spec.display}: test RMSE {rep.rmse:.4f} MAE {rep.mae:.4f} (n={rep.n})")
    return 0


def cmd_predict(cfg: RunConfig, out: str, args) -> int:
    if not args.model_file:
        raise ConfigError("model_file", "predict needs --model-file")
    if not os.path.isfile(args.model_file):
        raise ConfigError("model_file", f"file not found: {args.model_file}")
    model, env = load_model(args.model_file)
    d, _ = prepare(cfg)
    if list(d.feature_names) != env["feature_names"]:
        raise VfwError(f"data features {list(d.feature_names)} do not match the model's "
                       f"{env['feature_names']}")
    pred = np.asarray(model.predict(d.features), dtype=np.float64)
    with open(os.path.join(out, "predictions.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "truth", "prediction"])
        for t, y, p in zip(d.timestamps, d.target, pred):
            w.writerow([format_timestamp(int(t), d.utc_offset_s), repr(float(y)), repr(float(p))])
    rep = MetricReport.score(pred, d.target)
    write_json(os.path.join(out, "report.json"),
               {"command": "predict", "model": env["spec"], "n": len(d), "scores": rep.to_dict()})
    print(f"wrote {len(d)} predictions; RMSE {rep.rmse:.4f}")
    return 0


def cmd_importance(cfg: RunConfig, out: str, args) -> int:
    d, _ = prepare(cfg)
    train, _ = split(d, cfg.split_spec())
    icfg, permutation = cfg.importance_params()
    icfg = replace(icfg, permutation=permutation)
    vectors = compute_importances(train.features, train.target, icfg,
                                  seed=derive_seed(cfg.seed, "importance"))
    _importance_csv(os.path.join(out, "importance.csv"), d.feature_names, vectors)
    write_json(os.path.join(out, "report.json"),
               {"command": "importance", "seed": cfg.seed, "n_train": len(train),
                "proportions": [float(v) for v in icfg.proportions.as_array()],
                "vectors": {k: dict(zip(d.feature_names, v.values.tolist()))
                            for k, v in vectors.items()}})
    top = d.feature_names[int(vectors["combined"].ranking()[0])]
    print(f"importance over {len(d.feature_names)} features; top combined: {top}")
    return 0


def cmd_cv(cfg: RunConfig, out: str, args) -> int:
    spec = cfg.model_spec()
    d, _ = prepare(cfg)
    train, _ = split(d, cfg.split_spec())
    res = kfold_cv(train, int(cfg.cv.get("k", 10)), spec, cfg.seed,
                   cfg.cv.get("mode", "shuffle"))
    write_json(os.path.join(out, "report.json"),
               {"command": "cv", "model": spec.to_dict(), "seed": cfg.seed,
                "k": len(res.fold_indices), "mode": cfg.cv.get("mode", "shuffle"),
                **res.to_dict()})
    _metric_csv(os.path.join(out, "report.csv"),
                [(f"fold{i}", s) for i, s in enumerate(res.fold_scores)] + [("pooled", res.pooled)])
    print(f"{spec.display}: {len(res.fold_indices)}-fold pooled R^2 {res.pooled.r2:.4f}")
    return 0


def cmd_compare(cfg: RunConfig, out: str, args) -> int:
    if args.sweep_proportions:
        base = cfg.model_spec() if cfg.model.get("name") == "vfw" else None
        specs = proportion_sweep(base)
    else:
        specs = cfg.compare_specs()
    d, _ = prepare(cfg)
    train, test = split(d, cfg.split_spec())
    cmp = compare_models(train, test, specs, cfg.seed)
    write_json(os.path.join(out, "report.json"),
               {"command": "compare", "seed": cfg.seed, "n_train": len(train),
                "n_test": len(test), "specs": [s.to_dict() for s in specs], **cmp.to_dict()})
    write_report_csv(os.path.join(out, "report.csv"), cmp)
    os.makedirs(os.path.join(out, "traces"), exist_ok=True)
    ordered = {s.display: cmp.predictions[s.display] for s in specs if s.display in cmp.predictions}
    for h in cfg.horizons:
        write_trace_csv(os.path.join(out, "traces", f"{h}.csv"), test, ordered,
                        horizon_rows(test, h))
    for r in cmp.rows:
        if r.report is None:
            print(f"{r.label}: FAILED {r.error}", file=sys.stderr)
        else:
            print(f"{r.label}: RMSE {r.report.rmse:.4f} MAE {r.report.mae:.4f}")
    return 0 if cmp.succeeded else 1


HANDLERS = {"synth": cmd_synth, "train": cmd_train, "predict": cmd_predict,
            "importance": cmd_importance, "cv": cmd_cv, "compare": cmd_compare}


# ---------------------------------------------------------------- argument handling

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vfwforecast",
                                 description="Voted feature weighting ensembles for PV forecasting.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="global seed (overrides the config)")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--model", help="model name for train/cv")
    ap.add_argument("--weight-mode", choices=("complement", "literal"))
    ap.add_argument("--proportions", help="vote proportions: avg, case1..case3 or 'lime,enet,xgb'")
    ap.add_argument("--horizon", action="append", choices=tuple(HORIZON_DAYS),
                    help="trace window for compare (repeatable; default all)")
    ap.add_argument("--model-file", help="model.json to use for predict")
    ap.add_argument("--data", help="CSV data file (overrides the config data source)")
    ap.add_argument("--sweep-proportions", action="store_true",
                    help="compare: score vfw under the avg/case1/case2/case3 vote proportions")
    return ap


def load_config(args) -> RunConfig:
    raw, base_dir = {}, "."
    if args.config:
        if not os.path.isfile(args.config):
            raise ConfigError("config", f"file not found: {args.config}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be an object")
        base_dir = os.path.dirname(os.path.abspath(args.config))
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.data:
        raw["data"] = {"csv": os.path.abspath(args.data)}
    model = dict(raw.get("model", {"name": "vfw"}))
    params = dict(model.get("params", {}))
    if args.model and args.model != model.get("name", "vfw"):
        # switching learner keeps only the file params the new learner accepts
        model["name"] = args.model
        params = {k: v for k, v in params.items() if k in DEFAULTS.get(args.model, {})}
        model.pop("label", None)
    vfw_overrides = {}
    if args.weight_mode:
        vfw_overrides["weight_mode"] = args.weight_mode
    if args.proportions:
        vfw_overrides["proportions"] = args.proportions
    if model.get("name", "vfw") == "vfw":
        params.update(vfw_overrides)
    model["params"] = params
    raw["model"] = model
    if vfw_overrides:
        raw["models"] = [dict(m, params={**m.get("params", {}), **vfw_overrides})
                         if m.get("name") == "vfw" else m
                         for m in raw.get("models", DEFAULT_COMPARE)]
    if args.horizon:
        raw["horizons"] = list(dict.fromkeys(args.horizon))
    return RunConfig.from_dict(raw, base_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        os.makedirs(args.out, exist_ok=True)
        return HANDLERS[args.command](cfg, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (VfwError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
