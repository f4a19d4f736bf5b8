"""Voted feature weighting: leave-one-feature-out subsystems recombined by
importance-derived weights.

For ``n`` features the model holds ``n`` bagged subsystems; subsystem ``i``
never sees feature ``i``. The final forecast is ``sum_i w_i * yhat_i``
where ``w`` comes from the combined importance vector:

* ``complement``: ``w_i = (1 - I_i) / sum_j (1 - I_j)``; a subsystem that
  lost an important feature counts less.
* ``literal``: ``w_i = I_i / sum_j I_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cart import TreeHyperparams, as_matrix, presort
from .dataset import Dataset
from .ensemble import BaggingConfig, Ensemble, fit_bagging
from .errors import DegenerateImportance, LengthMismatch, TooFewFeatures
from .importance import ImportanceVector, VoteProportions
from .rng import derive_seed

WEIGHT_MODES = ("complement", "literal")
DEFAULT_FOREST = BaggingConfig(n_estimators=100, forest=True,
                              tree_hp=TreeHyperparams(max_depth=8, min_samples_leaf=20,
                                                      max_leaf_nodes=100, seed=0))


@dataclass(frozen=True)
class VfwConfig:
    base: BaggingConfig = DEFAULT_FOREST
    weight_mode: str = "complement"
    reweight_inputs: bool = False
    epsilon: float = 1e-6
    proportions: VoteProportions = field(default_factory=VoteProportions)

    def __post_init__(self):
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "weight_mode": self.weight_mode,
                "reweight_inputs": self.reweight_inputs, "epsilon": self.epsilon,
                "proportions": [float(v) for v in self.proportions.as_array()]}


def recombination_weights(importance, mode: str = "complement") -> np.ndarray:
    I = np.asarray(getattr(importance, "values", importance), dtype=np.float64)
    if mode == "complement":
        raw = 1.0 - I
    elif mode == "literal":
        raw = I.copy()
    else:
        raise ValueError(f"unknown weight mode {mode!r}")
    total = raw.sum()
    if not total > 0:
        raise DegenerateImportance(f"{mode} weights are all zero")
    return raw / total


def reweight_features(X, w, epsilon: float = 1e-6) -> np.ndarray:
    """Scale column j by ``w_j + epsilon``."""
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(w):
        raise LengthMismatch("weight vector does not match the column count")
    return X * (w + epsilon)


@dataclass(frozen=True, eq=False)
class Subsystem:
    excluded_feature: int
    model: Ensemble
    column_scale: np.ndarray | None = None

    def kept(self, n_features: int) -> np.ndarray:
        return np.delete(np.arange(n_features), self.excluded_feature)

    def view(self, X: np.ndarray) -> np.ndarray:
        Xi = np.delete(X, self.excluded_feature, axis=1)
        if self.column_scale is not None:
            Xi = Xi * self.column_scale
        return Xi


@dataclass(frozen=True, eq=False)
class VfwModel:
    subsystems: tuple
    recombination_weights: np.ndarray
    importance: ImportanceVector
    feature_names: tuple
    config: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def subsystem_predictions(self, X) -> np.ndarray:
        X, _ = as_matrix(X, self.n_features)
        return np.stack([s.model.predict(s.view(X)) for s in self.subsystems])

    def predict(self, X):
        X, single = as_matrix(X, self.n_features)
        out = self.recombination_weights @ self.subsystem_predictions(X)
        return float(out[0]) if single else out

    def with_weights(self, weights) -> "VfwModel":
        return replace(self, recombination_weights=np.asarray(weights, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"type": "vfw", "feature_names": list(self.feature_names),
                "config": self.config, "importance": self.importance.to_dict(),
                "recombination_weights": self.recombination_weights.tolist(),
                "subsystems": [{"excluded_feature": s.excluded_feature,
                                "excluded_name": self.feature_names[s.excluded_feature],
                                "column_scale": None if s.column_scale is None else s.column_scale.tolist(),
                                "model": s.model.to_dict()} for s in self.subsystems]}

    @classmethod
    def from_dict(cls, d: dict) -> "VfwModel":
        subs = tuple(Subsystem(s["excluded_feature"], Ensemble.from_dict(s["model"]),
                               None if s["column_scale"] is None else np.asarray(s["column_scale"]))
                     for s in d["subsystems"])
        return cls(subs, np.asarray(d["recombination_weights"]),
                   ImportanceVector.from_dict(d["importance"]),
                   tuple(d["feature_names"]), d.get("config", {}))


def fit_vfw(train: Dataset, cfg: VfwConfig, importance) -> VfwModel:
    """Fit one subsystem per feature on the data with that column removed.

    Subsystem seeds derive from the base seed and the *name* of the removed
    feature, so reordering columns (and the importance vector with them)
    reorders the subsystems without changing any of them.
    """
    n = train.n_features
    if n < 2:
        raise TooFewFeatures("voted feature weighting needs at least two features")
    if not isinstance(importance, ImportanceVector):
        raw = np.asarray(importance, dtype=np.float64)
        if cfg.weight_mode == "literal" and not raw.sum() > 0:
            raise DegenerateImportance("literal weighting with an all-zero importance vector")
        importance = ImportanceVector.from_raw(raw, "combined")
    if len(importance) != n:
        raise LengthMismatch(f"importance has {len(importance)} entries for {n} features")
    weights = recombination_weights(importance, cfg.weight_mode)
    X, y = train.features, train.target
    # column orders survive deletion and positive rescaling, so sort once
    order = presort(X)
    subsystems = []
    for i in range(n):
        kept = np.delete(np.arange(n), i)
        Xi = X[:, kept]
        scale = None
        if cfg.reweight_inputs:
            scale = importance.values[kept] + cfg.epsilon
            Xi = Xi * scale
        base = replace(cfg.base, seed=derive_seed(cfg.base.seed, "vfw", train.feature_names[i]))
        model = fit_bagging(Xi, y, base, order=np.ascontiguousarray(order[kept]))
        subsystems.append(Subsystem(i, model, scale))
    return VfwModel(tuple(subsystems), weights, importance, train.feature_names, cfg.to_dict())


def predict_vfw(m: VfwModel, x):
    return m.predict(x)
