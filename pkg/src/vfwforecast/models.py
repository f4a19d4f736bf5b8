"""Named learner specifications and the model-file envelope.

A :class:`ModelSpec` is the unit the CLI and the evaluation harness pass
around: a learner name, its parameters and a display label. ``spec.fit``
takes a :class:`~vfwforecast.dataset.Dataset` and a seed and returns a
fitted model exposing ``predict(X)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace


from .baselines import GnbModel, KnnModel, DEFAULT_K_GRID, fit_gnb, fit_knn
from .cart import RegressionTree, TreeHyperparams, fit_tree
from .dataset import Dataset
from .ensemble import BaggingConfig, Ensemble, fit_bagging, fit_boosted
from .errors import ConfigError, ConvergenceWarning
from .importance import (ImportanceConfig, LimeConfig, VoteProportions, combine_importance,
                         compute_importances)
from .linear import ElasticNetConfig, LinearModel, fit_elastic_net, select_lambda
from .rng import derive_seed
from .vfw import VfwConfig, VfwModel, fit_vfw

MODEL_NAMES = ("dt", "bagging", "forest", "boosted", "knn", "gnb", "enet", "vfw")
FILE_FORMAT = "vfwforecast-model"
FILE_VERSION = 1

_TREE_KEYS = {"max_depth": 8, "min_samples_leaf": 20, "max_leaf_nodes": 100}
_BAG_KEYS = {**_TREE_KEYS, "n_estimators": 100, "bootstrap_fraction": 1.0, "mtry": None}
_IMPORTANCE_KEYS = {"lime_perturbations": 5000, "lime_anchors": 200, "lime_kernel_width": None,
                    "enet_alpha": 0.5, "enet_lambda": None, "boost_rounds": 100,
                    "boost_learning_rate": 0.1, "reference_estimators": 50,
                    "importance_sample": None}
DEFAULTS = {
    "dt": dict(_TREE_KEYS),
    "bagging": dict(_BAG_KEYS),
    "forest": dict(_BAG_KEYS),
    "boosted": {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3,
                "min_samples_leaf": 1, "max_leaf_nodes": None},
    "knn": {"k_grid": list(DEFAULT_K_GRID), "n_folds": 5},
    "gnb": {"n_bins": 20},
    "enet": {"alpha": 0.5, "lam": None},
    "vfw": {**_BAG_KEYS, "weight_mode": "complement", "reweight_inputs": False,
            "epsilon": 1e-6, "proportions": "avg", **_IMPORTANCE_KEYS},
}


def _tree_hp(p, seed=0) -> TreeHyperparams:
    leaves = p["max_leaf_nodes"]
    return TreeHyperparams(int(p["max_depth"]), int(p["min_samples_leaf"]),
                           2**31 - 1 if leaves is None else int(leaves), seed)


def _bagging(p, seed, forest) -> BaggingConfig:
    return BaggingConfig(int(p["n_estimators"]), _tree_hp(p), float(p["bootstrap_fraction"]),
                         None if p["mtry"] is None else int(p["mtry"]), forest, seed)


def proportions_of(value) -> VoteProportions:
    if isinstance(value, VoteProportions):
        return value
    if isinstance(value, str):
        return VoteProportions.parse(value)
    return VoteProportions(*[float(v) for v in value])


def importance_config(p) -> ImportanceConfig:
    """Importance settings from flat vfw parameters."""
    lime = LimeConfig(n_perturbations=int(p["lime_perturbations"]),
                      n_anchor_points=int(p["lime_anchors"]),
                      kernel_width=p["lime_kernel_width"])
    ref = BaggingConfig(int(p["reference_estimators"]), forest=True)
    sample = p["importance_sample"]
    return ImportanceConfig(lime=lime, enet_alpha=float(p["enet_alpha"]),
                            enet_lambda=p["enet_lambda"], boost_rounds=int(p["boost_rounds"]),
                            boost_learning_rate=float(p["boost_learning_rate"]),
                            reference=ref, sample_size=None if sample is None else int(sample),
                            proportions=proportions_of(p["proportions"]))


@dataclass(frozen=True)
class ModelSpec:
    """Learner name plus parameters; unknown parameter names are rejected."""

    name: str
    params: dict = field(default_factory=dict)
    label: str | None = None

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ConfigError("model", f"unknown model {self.name!r}; expected one of {MODEL_NAMES}")
        for k in self.params:
            if k not in DEFAULTS[self.name]:
                raise ConfigError(f"params.{k}", f"not a parameter of model {self.name!r}")
        p = self.resolved()
        try:
            if self.name in ("dt", "bagging", "forest", "vfw"):
                _tree_hp(p)
            if self.name in ("bagging", "forest", "vfw"):
                _bagging(p, 0, True)
            if self.name == "vfw":
                VfwConfig(weight_mode=p["weight_mode"], epsilon=float(p["epsilon"]))
                importance_config(p)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError("params", str(exc)) from None
        if self.name == "vfw" and p["weight_mode"] not in ("complement", "literal"):
            raise ConfigError("params.weight_mode", "must be complement or literal")

    @property
    def display(self) -> str:
        return self.label or self.name

    def resolved(self) -> dict:
        return {**DEFAULTS[self.name], **self.params}

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.resolved(), "label": self.display}

    def fit(self, train: Dataset, seed: int = 0, cache: dict | None = None):
        """Fit on ``train``; ``cache`` lets several vfw specs share the
        three base importance vectors."""
        p = self.resolved()
        X, y = train.features, train.target
        if self.name == "dt":
            return fit_tree(X, y, _tree_hp(p, seed))
        if self.name in ("bagging", "forest"):
            return fit_bagging(X, y, _bagging(p, seed, self.name == "forest"))
        if self.name == "boosted":
            return fit_boosted(X, y, int(p["n_rounds"]), float(p["learning_rate"]), _tree_hp(p))
        if self.name == "knn":
            return fit_knn(X, y, p["k_grid"], int(p["n_folds"]), seed)
        if self.name == "gnb":
            return fit_gnb(X, y, int(p["n_bins"]))
        if self.name == "enet":
            lam = p["lam"]
            if lam is None:
                lam = select_lambda(X, y, float(p["alpha"]), seed=seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                return fit_elastic_net(X, y, ElasticNetConfig(float(lam), float(p["alpha"])),
                                       trace=False)
        return self._fit_vfw(train, p, seed, cache)

    def _fit_vfw(self, train, p, seed, cache):
        icfg = importance_config(p)
        key = (id(train), seed, repr(replace(icfg, proportions=VoteProportions())))
        vectors = None if cache is None else cache.get(key)
        if vectors is None:
            vectors = compute_importances(train.features, train.target, icfg,
                                          seed=derive_seed(seed, "importance"))
            if cache is not None:
                cache[key] = vectors
        combined = combine_importance([vectors["lime"], vectors["elastic_net"],
                                       vectors["boosting_gain"]], icfg.proportions)
        cfg = VfwConfig(base=_bagging(p, seed, True), weight_mode=p["weight_mode"],
                        reweight_inputs=bool(p["reweight_inputs"]),
                        epsilon=float(p["epsilon"]), proportions=icfg.proportions)
        return fit_vfw(train, cfg, combined)


def proportion_sweep(base: ModelSpec | None = None, cases=("avg", "case1", "case2", "case3")):
    """One vfw spec per vote-proportion preset (the four-column study layout)."""
    params = {} if base is None else dict(base.params)
    return [ModelSpec("vfw", {**params, "proportions": c}, f"vfw-{c}") for c in cases]


# ---------------------------------------------------------------- persistence

def model_to_dict(model) -> dict:
    d = model.to_dict()
    if isinstance(model, RegressionTree):
        d = {"type": "tree", **d}
    return d


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "tree":
        return RegressionTree.from_dict(d)
    if kind == "ensemble":
        return Ensemble.from_dict(d)
    if kind == "vfw":
        return VfwModel.from_dict(d)
    if kind == "knn":
        return KnnModel.from_dict(d)
    if kind == "gnb":
        return GnbModel.from_dict(d)
    if kind == "linear":
        return LinearModel.from_dict(d)
    raise ValueError(f"unknown model type {kind!r}")


def envelope(model, spec: ModelSpec, feature_names, seed: int) -> dict:
    return {"format": FILE_FORMAT, "version": FILE_VERSION, "spec": spec.to_dict(),
            "seed": int(seed), "feature_names": list(feature_names),
            "model": model_to_dict(model)}


def save_model(path, model, spec: ModelSpec, feature_names, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope(model, spec, feature_names, seed), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    """Returns ``(model, envelope_dict)``."""
    with open(path, encoding="utf-8") as fh:
        env = json.load(fh)
    if env.get("format") != FILE_FORMAT:
        raise ValueError(f"{path} is not a {FILE_FORMAT} file")
    return model_from_dict(env["model"]), env
