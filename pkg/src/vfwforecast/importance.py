"""Feature-importance vectors and their voted combination.

Every method returns an :class:`ImportanceVector`: non-negative weights
summing to one. A raw score vector that is all zero (or otherwise cannot
be normalised) falls back to uniform weights.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .cart import TreeHyperparams
from .ensemble import BOOSTING_TREE_HP, BaggingConfig, Ensemble, fit_bagging, fit_boosted
from .errors import ConvergenceWarning, DegenerateKernel, LengthMismatch, WrongEnsembleKind
from .linear import ElasticNetConfig, LinearModel, fit_elastic_net, select_lambda
from .rng import derive_seed, stream

METHODS = ("elastic_net", "lime", "boosting_gain", "permutation", "combined")
SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    values: np.ndarray
    method: str = "combined"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("importance must be a non-empty vector")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("importance values must be finite and >= 0")
        if abs(v.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"importance must sum to 1 (got {v.sum()!r})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_raw(cls, raw, method: str) -> "ImportanceVector":
        raw = np.maximum(np.asarray(raw, dtype=np.float64), 0.0)
        total = raw.sum()
        if not np.isfinite(total) or total <= 0:
            return cls.uniform(len(raw), method)
        return cls(raw / total, method)

    @classmethod
    def uniform(cls, n: int, method: str = "combined") -> "ImportanceVector":
        return cls(np.full(n, 1.0 / n), method)

    def __len__(self):
        return len(self.values)

    def ranking(self) -> np.ndarray:
        """Feature indices from most to least important (stable on ties)."""
        return np.argsort(-self.values, kind="stable")

    def to_dict(self) -> dict:
        return {"method": self.method, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceVector":
        return cls(np.asarray(d["values"]), d["method"])


@dataclass(frozen=True)
class VoteProportions:
    p_lime: float = 1 / 3
    p_enet: float = 1 / 3
    p_xgb: float = 1 / 3

    def __post_init__(self):
        v = self.as_array()
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("vote proportions must be >= 0 and sum to 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_lime, self.p_enet, self.p_xgb], dtype=np.float64)

    @classmethod
    def parse(cls, text: str) -> "VoteProportions":
        """``"avg"``, a preset name, or ``"lime,enet,xgb"`` numbers."""
        if text in PROPORTION_PRESETS:
            return PROPORTION_PRESETS[text]
        parts = [float(s) for s in text.split(",")]
        if len(parts) != 3:
            raise ValueError("proportions need three comma-separated values")
        return cls(*parts)


PROPORTION_PRESETS = {
    "avg": VoteProportions(1 / 3, 1 / 3, 1 / 3),
    "case1": VoteProportions(0.5, 0.3, 0.2),
    "case2": VoteProportions(0.2, 0.3, 0.5),
    "case3": VoteProportions(0.5, 0.2, 0.3),
}


def combine_importance(vectors, p: VoteProportions = VoteProportions()) -> ImportanceVector:
    """Weighted vote of the (LIME, elastic-net, boosting) vectors, in that order."""
    vectors = list(vectors)
    if len(vectors) != 3:
        raise LengthMismatch("expected exactly three importance vectors")
    n = len(vectors[0])
    if any(len(v) != n for v in vectors):
        raise LengthMismatch("importance vectors differ in length")
    stacked = np.stack([np.asarray(getattr(v, "values", v), dtype=np.float64) for v in vectors])
    return ImportanceVector.from_raw(p.as_array() @ stacked, "combined")


# ---------------------------------------------------------------- elastic net

def elastic_net_importance(m: LinearModel) -> ImportanceVector:
    """Share of total |coefficient| on the standardized scale."""
    return ImportanceVector.from_raw(np.abs(m.std_coefficients), "elastic_net")


# ---------------------------------------------------------------- boosting

def boosting_gain_importance(e: Ensemble, n_features: int | None = None) -> ImportanceVector:
    if e.kind != "boosted":
        raise WrongEnsembleKind(f"gain importance needs a boosted ensemble, got {e.kind!r}")
    n_features = e.n_features if n_features is None else n_features
    total = np.zeros(n_features)
    for t in e.members:
        total += t.feature_gains()
    return ImportanceVector.from_raw(total, "boosting_gain")


# ---------------------------------------------------------------- LIME

@dataclass(frozen=True)
class LimeConfig:
    n_perturbations: int = 5000
    kernel_width: float | None = None   # default 0.75 * sqrt(n_features)
    ridge_penalty: float = 1e-3
    n_anchor_points: int = 200
    seed: int = 0

    def width(self, n_features: int) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(n_features)


def train_stats(X):
    """Per-column mean and sd (sd of constant columns set to 1)."""
    X = np.asarray(X, dtype=np.float64)
    sd = X.std(axis=0)
    return X.mean(axis=0), np.where(sd > 0, sd, 1.0)


def lime_explain_local(model, x, cfg: LimeConfig, stats, rng=None) -> np.ndarray:
    """Coefficients of a kernel-weighted ridge surrogate around ``x``.

    Perturbations are Gaussian in standardized coordinates (unit sd per
    feature), the proximity kernel is ``exp(-d^2 / width^2)`` on the same
    coordinates, and the returned slopes are per standardized unit.
    """
    mean, sd = (np.asarray(s, dtype=np.float64) for s in stats)
    x = np.asarray(x, dtype=np.float64)
    p = len(x)
    if rng is None:
        rng = stream(cfg.seed, "lime_local")
    xs = (x - mean) / sd
    noise = rng.standard_normal((cfg.n_perturbations, p))
    zs = xs + noise
    fz = np.asarray(model.predict(zs * sd + mean), dtype=np.float64)
    if np.ptp(fz) == 0.0:
        return np.zeros(p)
    width = cfg.width(p)
    with np.errstate(over="ignore", under="ignore"):
        k = np.exp(-(np.sum(noise * noise, axis=1) / width) / width)
    wsum = k.sum()
    if not wsum > 0:
        raise DegenerateKernel("all proximity weights underflowed; widen the kernel")
    zbar = k @ zs / wsum
    fbar = k @ fz / wsum
    zc = zs - zbar
    A = (zc * k[:, None]).T @ zc + cfg.ridge_penalty * np.eye(p)
    b = (zc * k[:, None]).T @ (fz - fbar)
    return np.linalg.solve(A, b)


def lime_global_importance(model, anchors, cfg: LimeConfig, stats=None) -> ImportanceVector:
    """Mean absolute local slope over ``anchors`` (one seeded stream each)."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    if len(anchors) == 0:
        raise ValueError("need at least one anchor")
    if stats is None:
        stats = train_stats(anchors)
    total = np.zeros(anchors.shape[1])
    for i, a in enumerate(anchors):
        coef = lime_explain_local(model, a, cfg, stats, rng=stream(cfg.seed, "lime", i))
        total += np.abs(coef)
    return ImportanceVector.from_raw(total / len(anchors), "lime")


def lime_importance(model, X_train, cfg: LimeConfig = LimeConfig()) -> ImportanceVector:
    """LIME importance with anchors drawn uniformly from the training rows."""
    X_train = np.asarray(X_train, dtype=np.float64)
    n = len(X_train)
    k = min(cfg.n_anchor_points, n)
    rows = np.sort(stream(cfg.seed, "lime_anchors").choice(n, size=k, replace=False))
    return lime_global_importance(model, X_train[rows], cfg, train_stats(X_train))


# ---------------------------------------------------------------- permutation

def _rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def permutation_reliance(model, X, y, seed=0, n_repeats=10) -> np.ndarray:
    """Mean RMSE increase when each column is shuffled (unclipped)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    base = _rmse(model.predict(X), y)
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        acc = 0.0
        for r in range(n_repeats):
            perm = stream(seed, "permutation", j, r).permutation(len(y))
            Xp = X.copy()
            Xp[:, j] = X[perm, j]
            acc += _rmse(model.predict(Xp), y) - base
        out[j] = acc / n_repeats
    return out


def permutation_importance(model, X, y, seed=0, n_repeats=10) -> ImportanceVector:
    return ImportanceVector.from_raw(permutation_reliance(model, X, y, seed, n_repeats),
                                     "permutation")


# ---------------------------------------------------------------- pipeline

REFERENCE_FOREST = BaggingConfig(n_estimators=50, forest=True, tree_hp=TreeHyperparams())


@dataclass(frozen=True)
class ImportanceConfig:
    """How the three voters (plus optional permutation reliance) are run.

    ``reference`` is the forest explained by LIME and permutation;
    ``sample_size`` caps the rows used by every method.
    """

    lime: LimeConfig = field(default_factory=LimeConfig)
    enet_alpha: float = 0.5
    enet_lambda: float | None = None     # None: 5-fold CV over the default grid
    boost_rounds: int = 100
    boost_learning_rate: float = 0.1
    boost_tree_hp: TreeHyperparams = BOOSTING_TREE_HP
    reference: BaggingConfig = REFERENCE_FOREST
    permutation: bool = False
    permutation_repeats: int = 10
    sample_size: int | None = None
    proportions: VoteProportions = field(default_factory=VoteProportions)


def compute_importances(X, y, cfg: ImportanceConfig = ImportanceConfig(), seed=0,
                        reference_model=None) -> dict:
    """Run every configured method; returns ``{method: ImportanceVector}``
    including the ``combined`` vote."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if cfg.sample_size is not None and cfg.sample_size < len(y):
        rows = np.sort(stream(seed, "importance_sample").choice(len(y), cfg.sample_size, replace=False))
        X, y = X[rows], y[rows]
    out = {}
    lam = cfg.enet_lambda
    if lam is None:
        lam = select_lambda(X, y, cfg.enet_alpha, seed=derive_seed(seed, "enet_cv"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        enet = fit_elastic_net(X, y, ElasticNetConfig(lam=lam, alpha=cfg.enet_alpha), trace=False)
    out["elastic_net"] = elastic_net_importance(enet)

    boosted = fit_boosted(X, y, cfg.boost_rounds, cfg.boost_learning_rate, cfg.boost_tree_hp)
    out["boosting_gain"] = boosting_gain_importance(boosted)

    if reference_model is None:
        reference_model = fit_bagging(X, y, replace(cfg.reference, seed=derive_seed(seed, "reference")))
    lime_cfg = replace(cfg.lime, seed=derive_seed(seed, "lime"))
    out["lime"] = lime_importance(reference_model, X, lime_cfg)
    if cfg.permutation:
        out["permutation"] = permutation_importance(reference_model, X, y,
                                                    derive_seed(seed, "permutation"),
                                                    cfg.permutation_repeats)
    out["combined"] = combine_importance([out["lime"], out["elastic_net"], out["boosting_gain"]],
                                         cfg.proportions)
    return out
