"""CART regression trees grown best-first on weighted-variance impurity.

Splits are searched exhaustively: for every allowed feature the node's rows
are scanned in presorted order and every midpoint between consecutive
distinct values is a candidate. The node whose best split removes the most
squared error is expanded next, until ``max_leaf_nodes``, ``max_depth`` or
``min_samples_leaf`` stops growth. Routing is ``x[f] < threshold`` -> left.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ArityMismatch, EmptyTrainingSet

# relative margin a candidate must beat the incumbent by; keeps the
# lowest-feature / lowest-threshold tie-break stable under rounding
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class TreeHyperparams:
    max_depth: int = 8
    min_samples_leaf: int = 20
    max_leaf_nodes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_leaf_nodes < 2:
            raise ValueError("max_leaf_nodes must be >= 2")

    @classmethod
    def unbounded(cls, seed=0):
        return cls(max_depth=2**31 - 1, min_samples_leaf=1,
                   max_leaf_nodes=2**31 - 1, seed=seed)


@njit(cache=True)
def _best_split(XT, y, w, order, s, e, feats, min_leaf, mean):
    # order[f, s:e] lists the node's rows sorted by feature f; XT is (p, n)
    best_f = -1
    best_thr = 0.0
    best_pos = -1
    best_proxy = -np.inf
    w_tot = 0.0
    s_tot = 0.0
    for i in range(s, e):
        r = order[0, i]
        w_tot += w[r]
        s_tot += w[r] * (y[r] - mean)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        xf = XT[f]
        of = order[f]
        wl = 0.0
        sl = 0.0
        b = xf[of[s]]
        for i in range(s, e - 1):
            r = of[i]
            wl += w[r]
            sl += w[r] * (y[r] - mean)
            a = b
            b = xf[of[i + 1]]
            if not a < b:
                continue
            if wl < min_leaf:
                continue
            wr = w_tot - wl
            if wr < min_leaf:
                break
            sr = s_tot - sl
            proxy = sl * sl / wl + sr * sr / wr
            if best_f < 0 or proxy > best_proxy + _TIE_RTOL * abs(best_proxy):
                thr = 0.5 * (a + b)
                if not thr > a:
                    thr = b
                best_f = f
                best_thr = thr
                best_pos = i + 1 - s
                best_proxy = proxy
    gain = 0.0
    if best_f >= 0:
        gain = best_proxy - s_tot * s_tot / w_tot
    return best_f, best_thr, best_pos, gain


@njit(cache=True)
def _node_stats(y, w, order, s, e):
    wt = 0.0
    st = 0.0
    for i in range(s, e):
        r = order[0, i]
        wt += w[r]
        st += w[r] * y[r]
    mean = st / wt
    sse = 0.0
    for i in range(s, e):
        r = order[0, i]
        d = y[r] - mean
        sse += w[r] * d * d
    return wt, mean, sse


@njit(cache=True)
def _allowed_features(allowed, keys, k, mtry):
    if mtry <= 0 or mtry >= allowed.shape[0]:
        return allowed
    kk = np.empty(allowed.shape[0])
    for j in range(allowed.shape[0]):
        kk[j] = keys[k, allowed[j]]
    pick = allowed[np.argsort(kk)[:mtry]]
    return np.sort(pick)


@njit(cache=True)
def _grow(XT, y, w, order, allowed, keys, mtry, max_depth, min_leaf, max_leaves):
    p, m = order.shape
    max_nodes = 2 * min(max_leaves, m) - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)
    weight = np.zeros(max_nodes)
    impurity = np.zeros(max_nodes)
    gain = np.zeros(max_nodes)
    depth = np.zeros(max_nodes, np.int64)
    start = np.zeros(max_nodes, np.int64)
    end = np.zeros(max_nodes, np.int64)
    c_feat = np.full(max_nodes, -1, np.int64)
    c_thr = np.zeros(max_nodes)
    c_pos = np.zeros(max_nodes, np.int64)
    c_gain = np.zeros(max_nodes)
    goes_left = np.zeros(XT.shape[1], np.bool_)
    buf = np.empty(m, np.int64)

    n_nodes = 0
    # node 0 is the root; children are appended as splits happen
    start[0] = 0
    end[0] = m
    pending = 1
    n_leaves = 1
    while True:
        for k in range(n_nodes, pending):
            wt, mean, sse = _node_stats(y, w, order, start[k], end[k])
            weight[k] = wt
            value[k] = mean
            impurity[k] = sse
            if depth[k] < max_depth and sse > 0.0 and wt >= 2 * min_leaf:
                feats = _allowed_features(allowed, keys, k, mtry)
                f, thr, pos, g = _best_split(XT, y, w, order, start[k], end[k],
                                             feats, min_leaf, mean)
                if f >= 0 and g > 0.0:
                    c_feat[k] = f
                    c_thr[k] = thr
                    c_pos[k] = pos
                    c_gain[k] = g
        n_nodes = pending
        if n_leaves >= max_leaves:
            break
        best = -1
        for k in range(n_nodes):
            if feature[k] < 0 and c_feat[k] >= 0:
                if best < 0 or c_gain[k] > c_gain[best]:
                    best = k
        if best < 0:
            break
        f = c_feat[best]
        s = start[best]
        e = end[best]
        mid = s + c_pos[best]
        for i in range(s, e):
            goes_left[order[f, i]] = i < mid
        # stable partition of every feature's segment
        for g_f in range(p):
            og = order[g_f]
            nl = s
            nr = 0
            for i in range(s, e):
                r = og[i]
                if goes_left[r]:
                    og[nl] = r
                    nl += 1
                else:
                    buf[nr] = r
                    nr += 1
            for i in range(nr):
                og[nl + i] = buf[i]
        feature[best] = f
        threshold[best] = c_thr[best]
        gain[best] = c_gain[best]
        lk = pending
        rk = pending + 1
        left[best] = lk
        right[best] = rk
        start[lk] = s
        end[lk] = mid
        start[rk] = mid
        end[rk] = e
        depth[lk] = depth[best] + 1
        depth[rk] = depth[best] + 1
        pending += 2
        n_leaves += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes], weight[:n_nodes],
            impurity[:n_nodes], gain[:n_nodes], depth[:n_nodes])


@njit(cache=True)
def _route(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        k = 0
        while feature[k] >= 0:
            if X[i, feature[k]] < threshold[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = k
    return out


@njit(cache=True)
def _predict_into(X, feature, threshold, left, right, value, out, scale):
    for i in range(X.shape[0]):
        k = 0
        while feature[k] >= 0:
            if X[i, feature[k]] < threshold[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] += scale * value[k]


def as_matrix(X, n_features):
    """Coerce to a C-contiguous float matrix, checking the column count.

    Returns ``(matrix, was_single_row)``.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ArityMismatch(n_features, X.shape[-1] if X.ndim else 0)
    return np.ascontiguousarray(X), single


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Array-backed fitted tree; node 0 is the root, ``feature == -1`` marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray
    gain: np.ndarray
    depth: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row."""
        X, _ = as_matrix(X, self.n_features)
        return _route(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X):
        X, single = as_matrix(X, self.n_features)
        out = np.zeros(X.shape[0])
        _predict_into(X, self.feature, self.threshold, self.left, self.right,
                      self.value, out, 1.0)
        return float(out[0]) if single else out

    def accumulate(self, X, out, scale=1.0):
        # X already validated; used by ensembles to avoid re-checking
        _predict_into(X, self.feature, self.threshold, self.left, self.right,
                      self.value, out, scale)

    def feature_gains(self) -> np.ndarray:
        """Total impurity decrease contributed by each feature."""
        out = np.zeros(self.n_features)
        internal = ~self.is_leaf
        np.add.at(out, self.feature[internal], self.gain[internal])
        return out

    def to_dict(self) -> dict:
        nodes = []
        for k in range(self.n_nodes):
            node = {"id": k, "depth": int(self.depth[k]),
                    "n_samples": float(self.n_samples[k]),
                    "value": float(self.value[k]),
                    "impurity": float(self.impurity[k])}
            if self.feature[k] >= 0:
                node.update(feature=int(self.feature[k]),
                            threshold=float(self.threshold[k]),
                            left=int(self.left[k]), right=int(self.right[k]),
                            gain=float(self.gain[k]))
            nodes.append(node)
        return {"n_features": self.n_features, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        nodes = d["nodes"]
        n = len(nodes)
        feature = np.full(n, -1, np.int64)
        left = np.full(n, -1, np.int64)
        right = np.full(n, -1, np.int64)
        threshold = np.zeros(n)
        gain = np.zeros(n)
        for node in nodes:
            k = node["id"]
            if "feature" in node:
                feature[k] = node["feature"]
                threshold[k] = node["threshold"]
                left[k] = node["left"]
                right[k] = node["right"]
                gain[k] = node["gain"]
        return cls(feature, threshold, left, right,
                   np.array([nd["value"] for nd in nodes], dtype=np.float64),
                   np.array([nd["n_samples"] for nd in nodes], dtype=np.float64),
                   np.array([nd["impurity"] for nd in nodes], dtype=np.float64),
                   gain, np.array([nd["depth"] for nd in nodes], dtype=np.int64),
                   int(d["n_features"]))


def presort(X) -> np.ndarray:
    """Per-feature stable argsort, shape (n_features, n_rows)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def fit_tree(X, y, hp: TreeHyperparams = TreeHyperparams(), feature_subset=None,
             sample_weight=None, *, mtry=None, rng=None, order=None,
             XT=None) -> RegressionTree:
    """Fit one regression tree.

    Parameters
    ----------
    X, y : array-like
        Training matrix (n, p) and target (n,).
    hp : TreeHyperparams
        Pre-pruning bounds.
    feature_subset : iterable of int, optional
        Columns allowed as split variables; default all.
    sample_weight : array-like, optional
        Non-negative multiplicities (bootstrap counts). Rows of weight 0 are
        ignored; ``min_samples_leaf`` counts weighted samples.
    mtry : int, optional
        Random-forest mode: each node draws ``mtry`` candidate features from
        ``rng``.
    order : ndarray, optional
        Output of :func:`presort` for ``X``, to share across many fits.
    XT : ndarray, optional
        ``X.T`` as a C-contiguous array, likewise shareable.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if n == 0 or len(y) == 0:
        raise EmptyTrainingSet("cannot fit a tree on zero rows")
    if len(y) != n:
        raise ValueError("X and y lengths differ")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if order is None:
        order = presort(X)
    inbag = w > 0
    if not inbag.all():
        order = np.ascontiguousarray(np.stack([o[inbag[o]] for o in order]))
    else:
        order = order.copy()
    if order.shape[1] == 0:
        raise EmptyTrainingSet("all sample weights are zero")
    if feature_subset is None:
        allowed = np.arange(p, dtype=np.int64)
    else:
        allowed = np.array(sorted(set(int(j) for j in feature_subset)), dtype=np.int64)
        if len(allowed) == 0 or allowed[0] < 0 or allowed[-1] >= p:
            raise ValueError("feature_subset must be non-empty column indices")
    m = order.shape[1]
    # a depth-d binary tree has at most 2**d leaves
    max_leaves = min(int(hp.max_leaf_nodes), 2 ** min(int(hp.max_depth), 40))
    max_nodes = 2 * min(max_leaves, m) - 1
    if mtry is not None and 0 < mtry < len(allowed):
        if rng is None:
            rng = np.random.default_rng(hp.seed)
        keys = rng.random((max_nodes, p))
        mtry_ = int(mtry)
    else:
        keys = np.zeros((1, p))
        mtry_ = 0
    if XT is None:
        XT = np.ascontiguousarray(X.T)
    arrays = _grow(XT, y, w, order, allowed, keys, mtry_, int(hp.max_depth),
                   float(hp.min_samples_leaf), max_leaves)
    return RegressionTree(*arrays, n_features=p)


def predict_tree(t: RegressionTree, x):
    """Prediction for one row (float) or a matrix of rows (array)."""
    return t.predict(x)
