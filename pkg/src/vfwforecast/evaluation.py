"""Scores, cross-validation, bias-variance estimation and model comparison."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import DAY_S, Dataset, clear_sky, format_timestamp
from .errors import EmptyInput, LengthMismatch, TooFewRows, VfwError, ZeroVarianceTruth
from .rng import derive_seed, stream

HORIZON_DAYS = {"day": 1, "week": 7, "2months": 61}


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions for {len(truth)} targets")
    if len(pred) == 0:
        raise EmptyInput("metrics need at least one value")
    return pred, truth


def rmse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return math.sqrt(float(np.mean((pred - truth) ** 2)))


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def r2(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if len(truth) < 2:
        raise ZeroVarianceTruth("R^2 needs at least two targets")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceTruth("target has zero variance")
    return 1.0 - float(np.sum((pred - truth) ** 2)) / ss_tot


def mdape(pred, truth) -> float:
    """Median absolute percentage error over rows with non-zero truth."""
    pred, truth = _pair(pred, truth)
    nz = truth != 0
    if not nz.any():
        raise EmptyInput("every target is zero")
    return float(np.median(np.abs((pred[nz] - truth[nz]) / truth[nz]))) * 100.0


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    r2: float
    n: int

    @classmethod
    def score(cls, pred, truth) -> "MetricReport":
        """RMSE, MAE and R^2 (NaN when the target has no variance)."""
        pred, truth = _pair(pred, truth)
        try:
            r = r2(pred, truth)
        except ZeroVarianceTruth:
            r = float("nan")
        return cls(rmse(pred, truth), mae(pred, truth), r, len(truth))

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae,
                "r2": None if math.isnan(self.r2) else self.r2, "n": self.n}


# ---------------------------------------------------------------- k-fold

@dataclass(frozen=True, eq=False)
class CvResult:
    fold_indices: tuple
    fold_scores: tuple
    mean_r2: float
    pooled: MetricReport

    def to_dict(self) -> dict:
        return {"mean_r2": None if math.isnan(self.mean_r2) else self.mean_r2,
                "pooled": self.pooled.to_dict(),
                "folds": [dict(s.to_dict(), fold=i, size=len(ix))
                          for i, (s, ix) in enumerate(zip(self.fold_scores, self.fold_indices))]}


def kfold_indices(n: int, k: int, seed: int = 0, mode: str = "shuffle") -> list:
    """Fold index sets of size floor(n/k) or ceil(n/k).

    ``shuffle`` cuts a seeded permutation into contiguous blocks;
    ``blocked`` cuts the rows in time order (no shuffling).
    """
    if k < 2:
        raise TooFewRows("k-fold needs k >= 2")
    if n < k:
        raise TooFewRows(f"{n} rows cannot form {k} folds")
    if mode == "shuffle":
        rows = stream(seed, "folds").permutation(n)
    elif mode == "blocked":
        rows = np.arange(n)
    else:
        raise ValueError(f"unknown fold mode {mode!r}")
    return [np.sort(f) for f in np.array_split(rows, k)]


def kfold_cv(d: Dataset, k: int, spec, seed: int = 0, mode: str = "shuffle") -> CvResult:
    """Score ``spec`` on each fold after training on the other k-1 folds."""
    folds = kfold_indices(len(d), k, seed, mode)
    oof = np.empty(len(d))
    scores = []
    for i, f in enumerate(folds):
        mask = np.ones(len(d), bool)
        mask[f] = False
        model = spec.fit(d.take(np.flatnonzero(mask)), seed=seed)
        pred = np.asarray(model.predict(d.features[f]), dtype=np.float64)
        oof[f] = pred
        scores.append(MetricReport.score(pred, d.target[f]))
    r2s = np.array([s.r2 for s in scores])
    mean_r2 = float(np.mean(r2s)) if not np.isnan(r2s).any() else float("nan")
    return CvResult(tuple(folds), tuple(scores), mean_r2, MetricReport.score(oof, d.target))


# ---------------------------------------------------------------- bias-variance

@dataclass(frozen=True, eq=False)
class NoisyWorld:
    """Data generator with known regression function ``f`` and noise sd.

    ``sample_X(rng, n)`` draws inputs; targets are ``f(X) + sigma * N(0, 1)``.
    """

    f: object
    sigma: float
    sample_X: object
    n_train: int = 500
    feature_names: tuple = ()

    def draw(self, rng) -> Dataset:
        X = self.sample_X(rng, self.n_train)
        y = self.f(X) + self.sigma * rng.standard_normal(self.n_train)
        names = self.feature_names or None
        return Dataset.from_arrays(X, y, names)


def pv_world(n_train: int = 500, sigma: float = 200.0, peak: float = 5000.0) -> NoisyWorld:
    """Daylight hour and clearness in, clear-sky power times clearness out."""
    def f(X):
        return peak * clear_sky(X[:, 0]) * X[:, 1]

    def sample_X(rng, n):
        return np.column_stack([rng.uniform(6.0, 18.0, n), rng.uniform(0.05, 1.0, n)])

    return NoisyWorld(f, sigma, sample_X, n_train, ("hour", "clearness"))


@dataclass(frozen=True)
class BiasVarianceReport:
    bias_sq: float
    variance: float
    noise: float
    total_err: float
    n_worlds: int

    @property
    def decomposed(self) -> float:
        return self.bias_sq + self.variance + self.noise

    def to_dict(self) -> dict:
        return {"bias_sq": self.bias_sq, "variance": self.variance, "noise": self.noise,
                "total_err": self.total_err, "n_worlds": self.n_worlds}


def bias_variance_estimate(learner, world: NoisyWorld, n_worlds: int, probe,
                           seed: int = 0) -> BiasVarianceReport:
    """Monte-Carlo estimate of squared bias, variance and noise at ``probe``.

    World ``w`` draws its training set from stream ``(seed, "world", w)``
    and trains with seed ``derive_seed(seed, "learner", w)``. ``total_err``
    is the mean squared error against fresh noisy targets at the probe.
    """
    if n_worlds < 30:
        raise ValueError("n_worlds must be >= 30")
    probe = np.atleast_2d(np.asarray(probe, dtype=np.float64))
    f_probe = world.f(probe)
    preds = np.empty((n_worlds, len(probe)))
    sq_err = 0.0
    for w in range(n_worlds):
        rng = stream(seed, "world", w)
        model = learner.fit(world.draw(rng), seed=derive_seed(seed, "learner", w))
        preds[w] = model.predict(probe)
        fresh = f_probe + world.sigma * rng.standard_normal(len(probe))
        sq_err += float(np.mean((preds[w] - fresh) ** 2))
    mean_pred = preds.mean(axis=0)
    return BiasVarianceReport(float(np.mean((mean_pred - f_probe) ** 2)),
                              float(np.mean((preds - mean_pred) ** 2)),
                              float(world.sigma ** 2), sq_err / n_worlds, n_worlds)


# ---------------------------------------------------------------- comparison

@dataclass(frozen=True, eq=False)
class ComparisonRow:
    label: str
    report: MetricReport | None
    error: str | None = None


@dataclass(frozen=True, eq=False)
class Comparison:
    rows: tuple                     # successes by ascending RMSE, then failures
    predictions: dict               # label -> test predictions
    models: dict = field(default_factory=dict)
    test: Dataset | None = None

    @property
    def succeeded(self) -> list:
        return [r for r in self.rows if r.report is not None]

    def to_dict(self) -> dict:
        return {"models": [{"model": r.label,
                            **(r.report.to_dict() if r.report else {}),
                            **({"error": r.error} if r.error else {})} for r in self.rows]}


def compare_models(train: Dataset, test: Dataset, specs, seed: int = 0) -> Comparison:
    """Fit every spec on ``train`` with the same seed and score it on ``test``.

    A failing spec is recorded with its error message; the rest still run.
    Rows are sorted by RMSE (ties keep the input order).
    """
    specs = list(specs)
    if not specs:
        raise ValueError("compare_models needs at least one model spec")
    cache = {}
    ok, failed, preds, models = [], [], {}, {}
    for spec in specs:
        label = spec.display
        try:
            model = spec.fit(train, seed=seed, cache=cache)
            pred = np.asarray(model.predict(test.features), dtype=np.float64)
            ok.append(ComparisonRow(label, MetricReport.score(pred, test.target)))
            preds[label] = pred
            models[label] = model
        except (VfwError, ValueError, ArithmeticError) as exc:
            failed.append(ComparisonRow(label, None, f"{type(exc).__name__}: {exc}"))
    ok.sort(key=lambda r: r.report.rmse)
    return Comparison(tuple(ok + failed), preds, models, test)


def horizon_rows(test: Dataset, horizon: str) -> np.ndarray:
    """Test rows inside the first ``horizon`` window (day, week or 2months)."""
    if horizon not in HORIZON_DAYS:
        raise ValueError(f"unknown horizon {horizon!r}; expected one of {tuple(HORIZON_DAYS)}")
    if len(test) == 0:
        return np.arange(0)
    end = test.timestamps[0] + HORIZON_DAYS[horizon] * DAY_S
    return np.flatnonzero(test.timestamps < end)


# ---------------------------------------------------------------- writers

def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_report_csv(path, comparison: Comparison) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "rmse", "mae", "r2", "n", "error"])
        for r in comparison.rows:
            if r.report is None:
                w.writerow([r.label, "", "", "", "", r.error])
            else:
                d = r.report.to_dict()
                w.writerow([r.label, _fmt(d["rmse"]), _fmt(d["mae"]), _fmt(d["r2"]), d["n"], ""])


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_trace_csv(path, test: Dataset, predictions: dict, rows=None) -> None:
    """Plot-ready trace: timestamp, truth, then one column per model."""
    rows = np.arange(len(test)) if rows is None else rows
    labels = list(predictions)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "truth", *labels])
        for i in rows:
            w.writerow([format_timestamp(int(test.timestamps[i]), test.utc_offset_s),
                        repr(float(test.target[i])),
                        *(repr(float(predictions[k][i])) for k in labels)])
