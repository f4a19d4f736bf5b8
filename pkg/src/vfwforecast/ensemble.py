"""Bagging, random forests and least-squares gradient boosting over CART."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cart import RegressionTree, TreeHyperparams, as_matrix, fit_tree, presort
from .errors import EmptyTrainingSet
from .rng import derive_seed, stream

KINDS = ("bagging", "forest", "boosted")


@dataclass(frozen=True)
class BaggingConfig:
    """Bootstrap ensemble settings.

    ``forest=True`` (or an explicit ``mtry``) turns on per-split feature
    subsampling; ``mtry`` then defaults to ``ceil(n_features / 3)``.
    """

    n_estimators: int = 100
    tree_hp: TreeHyperparams = field(default_factory=TreeHyperparams)
    bootstrap_fraction: float = 1.0
    mtry: int | None = None
    forest: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ValueError("bootstrap_fraction must lie in (0, 1]")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")

    @property
    def kind(self) -> str:
        return "forest" if (self.forest or self.mtry is not None) else "bagging"

    def resolved_mtry(self, n_features: int) -> int | None:
        if self.kind == "bagging":
            return None
        if self.mtry is None:
            return max(1, math.ceil(n_features / 3))
        if self.mtry > n_features:
            raise ValueError(f"mtry={self.mtry} exceeds {n_features} features")
        return self.mtry

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BaggingConfig":
        d = dict(d)
        d["tree_hp"] = TreeHyperparams(**d.get("tree_hp", {}))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple
    member_seeds: tuple
    kind: str
    n_features: int
    learning_rate: float | None = None
    base_value: float | None = None
    config: dict = field(default_factory=dict)
    loss_trace: tuple = ()

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        boosted = self.kind == "boosted"
        if boosted != (self.learning_rate is not None and self.base_value is not None):
            raise ValueError("learning_rate/base_value are required for, and only for, boosted ensembles")

    def member_predictions(self, X) -> np.ndarray:
        X, _ = as_matrix(X, self.n_features)
        out = np.zeros((len(self.members), X.shape[0]))
        for i, t in enumerate(self.members):
            t.accumulate(X, out[i])
        return out

    def predict(self, X):
        X, single = as_matrix(X, self.n_features)
        out = np.zeros(X.shape[0])
        # fixed member order keeps results bit-stable
        for t in self.members:
            t.accumulate(X, out)
        if self.kind == "boosted":
            out = self.base_value + self.learning_rate * out
        else:
            out /= len(self.members)
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        d = {"type": "ensemble", "kind": self.kind, "n_features": self.n_features,
             "config": self.config, "member_seeds": list(self.member_seeds),
             "members": [t.to_dict() for t in self.members]}
        if self.kind == "boosted":
            d.update(learning_rate=self.learning_rate, base_value=self.base_value,
                     loss_trace=list(self.loss_trace))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        return cls(tuple(RegressionTree.from_dict(t) for t in d["members"]),
                   tuple(d["member_seeds"]), d["kind"], int(d["n_features"]),
                   d.get("learning_rate"), d.get("base_value"), d.get("config", {}),
                   tuple(d.get("loss_trace", ())))


def _check_xy(X, y):
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit an ensemble on zero rows")
    if len(y) != X.shape[0]:
        raise ValueError("X and y lengths differ")
    return X, y


def fit_member(X, y, cfg: BaggingConfig, i: int, order=None, XT=None) -> RegressionTree:
    """Fit bagging member ``i``; depends only on (data, cfg, i)."""
    n, p = X.shape
    rng = stream(cfg.seed, "bootstrap", i)
    size = max(1, int(round(cfg.bootstrap_fraction * n)))
    counts = np.bincount(rng.integers(0, n, size=size), minlength=n).astype(np.float64)
    return fit_tree(X, y, cfg.tree_hp, sample_weight=counts,
                    mtry=cfg.resolved_mtry(p), rng=rng, order=order, XT=XT)


def fit_bagging(X, y, cfg: BaggingConfig = BaggingConfig(), order=None) -> Ensemble:
    """Average of trees grown on bootstrap resamples.

    Member ``i`` draws its resample (and, in forest mode, its per-split
    feature subsets) from the stream ``(cfg.seed, "bootstrap", i)``, so any
    member can be refit in isolation and training order is irrelevant.
    ``order`` may pass a precomputed :func:`~vfwforecast.cart.presort` of X.
    """
    X, y = _check_xy(X, y)
    if order is None:
        order = presort(X)
    XT = np.ascontiguousarray(X.T)
    members = tuple(fit_member(X, y, cfg, i, order, XT) for i in range(cfg.n_estimators))
    seeds = tuple(derive_seed(cfg.seed, "bootstrap", i) for i in range(cfg.n_estimators))
    return Ensemble(members, seeds, cfg.kind, X.shape[1], config=cfg.to_dict())


def fit_forest(X, y, cfg: BaggingConfig = BaggingConfig(forest=True)) -> Ensemble:
    if cfg.kind != "forest":
        cfg = BaggingConfig(cfg.n_estimators, cfg.tree_hp, cfg.bootstrap_fraction,
                            cfg.mtry, True, cfg.seed)
    return fit_bagging(X, y, cfg)


BOOSTING_TREE_HP = TreeHyperparams(max_depth=3, min_samples_leaf=1,
                                   max_leaf_nodes=2**31 - 1)


def fit_boosted(X, y, n_rounds: int = 100, learning_rate: float = 0.1,
                tree_hp: TreeHyperparams = BOOSTING_TREE_HP) -> Ensemble:
    """Stagewise least-squares boosting.

    ``F_0`` is the target mean; round ``m`` fits a tree ``h`` to the
    residuals ``y - F_m`` and sets ``F_{m+1} = F_m + learning_rate * h``.
    The training MSE after every round is kept in ``loss_trace`` (entry 0 is
    the MSE of ``F_0``).
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must lie in (0, 1]")
    X, y = _check_xy(X, y)
    order = presort(X)
    XT = np.ascontiguousarray(X.T)
    base = float(np.mean(y))
    F = np.full(len(y), base)
    trace = [float(np.mean((y - F) ** 2))]
    members = []
    for _ in range(n_rounds):
        h = fit_tree(X, y - F, tree_hp, order=order, XT=XT)
        h.accumulate(X, F, learning_rate)
        members.append(h)
        trace.append(float(np.mean((y - F) ** 2)))
    cfg = {"n_rounds": n_rounds, "learning_rate": learning_rate,
           "tree_hp": asdict(tree_hp)}
    return Ensemble(tuple(members), tuple([tree_hp.seed] * n_rounds), "boosted",
                    X.shape[1], learning_rate, base, cfg, tuple(trace))


def predict_ensemble(e: Ensemble, x):
    return e.predict(x)
