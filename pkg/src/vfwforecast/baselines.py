"""Comparison regressors: k-nearest neighbours and Gaussian naive Bayes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import softmax

from .cart import as_matrix
from .errors import EmptyGrid, EmptyTrainingSet, InsufficientData
from .rng import stream

DEFAULT_K_GRID = (1, 2, 3, 5, 7, 10, 15, 20, 30, 50)


def _standardizer(X):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    return mean, np.where(sd > 0, sd, 1.0)


@njit(cache=True)
def _neighbors(train, queries, k):
    """Indices of the k nearest training rows per query, ordered by
    (squared distance, row index)."""
    nq = queries.shape[0]
    n, p = train.shape
    out = np.empty((nq, k), np.int64)
    best_d = np.empty(k)
    best_i = np.empty(k, np.int64)
    for q in range(nq):
        filled = 0
        for r in range(n):
            d = 0.0
            for j in range(p):
                t = train[r, j] - queries[q, j]
                d += t * t
            if filled == k and not d < best_d[k - 1]:
                continue
            # insert after every entry with distance <= d (earlier rows win ties)
            pos = filled if filled < k else k - 1
            while pos > 0 and d < best_d[pos - 1]:
                if pos < k:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = d
            best_i[pos] = r
            if filled < k:
                filled += 1
        for j in range(k):
            out[q, j] = best_i[j]
    return out


@dataclass(frozen=True, eq=False)
class KnnModel:
    k: int
    train_X: np.ndarray
    train_y: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    cv_rmse: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.train_X.shape[1]

    def neighbors(self, X) -> np.ndarray:
        X, _ = as_matrix(X, self.n_features)
        Z = np.ascontiguousarray((X - self.x_mean) / self.x_scale)
        return _neighbors(self.train_X, Z, self.k)

    def predict(self, X):
        X, single = as_matrix(X, self.n_features)
        out = self.train_y[self.neighbors(X)].mean(axis=1)
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {"type": "knn", "k": self.k, "train_X": self.train_X.tolist(),
                "train_y": self.train_y.tolist(), "x_mean": self.x_mean.tolist(),
                "x_scale": self.x_scale.tolist(),
                "cv_rmse": {str(k): v for k, v in self.cv_rmse.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        return cls(d["k"], np.ascontiguousarray(d["train_X"], dtype=np.float64),
                   np.asarray(d["train_y"], dtype=np.float64),
                   np.asarray(d["x_mean"]), np.asarray(d["x_scale"]),
                   {int(k): v for k, v in d.get("cv_rmse", {}).items()})


def _knn_cv_scores(X, y, k_grid, n_folds, seed):
    n = len(y)
    folds = np.array_split(stream(seed, "knn_folds").permutation(n), n_folds)
    kmax = max(k_grid)
    sq = np.zeros(len(k_grid))
    for f in folds:
        mask = np.ones(n, bool)
        mask[f] = False
        Xtr, ytr = X[mask], y[mask]
        if kmax > len(ytr):
            raise InsufficientData(f"k={kmax} exceeds the {len(ytr)} rows of a training fold")
        mean, sd = _standardizer(Xtr)
        nb = _neighbors(np.ascontiguousarray((Xtr - mean) / sd),
                        np.ascontiguousarray((X[f] - mean) / sd), kmax)
        csum = np.cumsum(ytr[nb], axis=1)
        for i, k in enumerate(k_grid):
            sq[i] += np.sum((csum[:, k - 1] / k - y[f]) ** 2)
    return np.sqrt(sq / n)


def fit_knn(X, y, k_grid=DEFAULT_K_GRID, n_folds=5, seed=0) -> KnnModel:
    """Pick k by K-fold CV RMSE (smallest k on ties) and store the
    standardized training set.

    The pooled out-of-fold RMSE is used as the CV score.
    """
    k_grid = sorted(set(int(k) for k in k_grid))
    if not k_grid:
        raise EmptyGrid("k_grid is empty")
    if k_grid[0] < 1:
        raise ValueError("k must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if len(y) == 0:
        raise EmptyTrainingSet("KNN needs training rows")
    if len(k_grid) == 1:
        k, scores = k_grid[0], {}
        if k > len(y):
            raise InsufficientData(f"k={k} exceeds {len(y)} training rows")
    else:
        n_folds = min(n_folds, len(y))
        rmse = _knn_cv_scores(X, y, k_grid, n_folds, seed)
        k = k_grid[int(np.argmin(rmse))]
        scores = {kk: float(s) for kk, s in zip(k_grid, rmse)}
    mean, sd = _standardizer(X)
    return KnnModel(k, np.ascontiguousarray((X - mean) / sd), y.copy(), mean, sd, scores)


def predict_knn(m: KnnModel, x):
    return m.predict(x)


@dataclass(frozen=True, eq=False)
class GnbModel:
    """Target discretised into bins, each with independent Gaussian features.

    Prediction is the posterior mean of the bin representatives.
    """

    means: np.ndarray       # (n_bins, p)
    sds: np.ndarray         # (n_bins, p)
    priors: np.ndarray      # (n_bins,)
    representatives: np.ndarray

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    @property
    def n_bins(self) -> int:
        return len(self.priors)

    def log_joint(self, X) -> np.ndarray:
        X, _ = as_matrix(X, self.n_features)
        z = (X[:, None, :] - self.means[None]) / self.sds[None]
        ll = -0.5 * np.sum(z * z, axis=2) - np.sum(np.log(self.sds), axis=1)[None] \
            - 0.5 * self.n_features * np.log(2.0 * np.pi)
        return ll + np.log(self.priors)[None]

    def posterior(self, X) -> np.ndarray:
        lj = self.log_joint(X)
        # explicit normalisation stays exact even when log-joints are huge
        return softmax(lj, axis=1)

    def predict(self, X):
        X, single = as_matrix(X, self.n_features)
        out = self.posterior(X) @ self.representatives
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {"type": "gnb", "means": self.means.tolist(), "sds": self.sds.tolist(),
                "priors": self.priors.tolist(),
                "representatives": self.representatives.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GnbModel":
        return cls(np.asarray(d["means"]), np.asarray(d["sds"]),
                   np.asarray(d["priors"]), np.asarray(d["representatives"]))


def fit_gnb(X, y, n_bins: int = 20) -> GnbModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if len(y) < n_bins:
        raise InsufficientData(f"{len(y)} rows cannot fill {n_bins} bins")
    # sd floor proportional to each column's spread
    floor = 1e-9 * (X.max(axis=0) - X.min(axis=0) + 1.0)
    bins = np.array_split(np.argsort(y, kind="stable"), n_bins)
    means = np.array([X[b].mean(axis=0) for b in bins])
    sds = np.maximum(np.array([X[b].std(axis=0) for b in bins]), floor[None])
    priors = np.array([len(b) for b in bins], dtype=np.float64) / len(y)
    reps = np.array([y[b].mean() for b in bins])
    return GnbModel(means, sds, priors, reps)


def predict_gnb(m: GnbModel, x):
    return m.predict(x)
