"""Nowcast regressors: least squares and a from-scratch random forest."""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "ModelError",
    "DesignMatrix",
    "LinearModel",
    "ForestHyper",
    "RegressionTree",
    "ForestModel",
    "PAPER_GRID",
    "ols_fit",
    "ols_predict",
    "tree_fit",
    "forest_fit",
    "grid_search_cv",
    "model_from_dict",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Features (rows = weeks) with their term ids and the case target."""

    features: np.ndarray
    target: np.ndarray
    feature_ids: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.target, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1:
            raise ModelError("design matrix needs at least one row")
        if X.shape[0] != len(y):
            raise ModelError(f"{X.shape[0]} rows but {len(y)} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ModelError("non-finite value in design matrix")
        ids = tuple(self.feature_ids) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(ids) != X.shape[1] or len(set(ids)) != len(ids):
            raise ModelError("feature ids must be unique and match the column count")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_ids", ids)

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    @property
    def cols(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "DesignMatrix":
        return DesignMatrix(self.features[idx], self.target[idx], self.feature_ids)


def _features(X) -> np.ndarray:
    if isinstance(X, DesignMatrix):
        return X.features
    arr = np.asarray(X, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


# --- linear regression -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    feature_ids: tuple[str, ...] = ()

    def predict(self, X) -> np.ndarray:
        return ols_predict(self, X)

    def to_dict(self) -> dict:
        ids = self.feature_ids or tuple(f"x{j}" for j in range(len(self.coefficients)))
        return {
            "kind": "linreg",
            "intercept": float(self.intercept),
            "coefficients": {i: float(c) for i, c in zip(ids, self.coefficients)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        ids = tuple(data["coefficients"])
        return cls(float(data["intercept"]), np.array([data["coefficients"][i] for i in ids]), ids)


def ols_fit(X: DesignMatrix) -> LinearModel:
    """Least squares with intercept.

    Columns are centred first; a rank-deficient centred design raises with
    the first column that is a combination of the ones before it.
    """
    A, y = X.features, X.target
    n, p = A.shape
    if n <= p + 1:
        raise ModelError(f"need more than {p + 1} rows for {p} features, got {n}")
    mean = A.mean(axis=0)
    centred = A - mean
    scale = np.abs(centred).max(axis=0)
    scale[scale == 0] = 1.0
    Z = centred / scale
    rank = np.linalg.matrix_rank(Z)
    if rank < p:
        for j in range(p):
            if np.linalg.matrix_rank(Z[:, : j + 1]) <= j:
                raise ModelError(f"collinear features: {X.feature_ids[j]!r} depends on earlier columns")
    beta_z, *_ = np.linalg.lstsq(Z, y - y.mean(), rcond=None)
    beta = beta_z / scale
    intercept = float(y.mean() - mean @ beta)
    return LinearModel(intercept, beta, X.feature_ids)


def ols_predict(model: LinearModel, X) -> np.ndarray:
    A = _features(X)
    if A.shape[1] != len(model.coefficients):
        raise ModelError(f"model has {len(model.coefficients)} coefficients, data has {A.shape[1]} columns")
    return model.intercept + A @ model.coefficients


# --- regression trees --------------------------------------------------------

MaxFeatures = Union[float, str]


@dataclass(frozen=True)
class ForestHyper:
    n_estimators: int = 100
    max_features: MaxFeatures = "all"
    max_depth: Optional[int] = None

    def __post_init__(self):
        mf = self.max_features
        if mf == "auto":
            object.__setattr__(self, "max_features", "all")
        elif isinstance(mf, str):
            if mf not in ("all", "sqrt"):
                raise ModelError(f"max_features must be a fraction, 'all' or 'sqrt', got {mf!r}")
        elif not 0 < float(mf) <= 1:
            raise ModelError(f"max_features fraction must be in (0, 1], got {mf}")
        if self.n_estimators < 1:
            raise ModelError("n_estimators must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ModelError("max_depth must be positive")

    def n_candidates(self, p: int) -> int:
        mf = self.max_features
        if mf == "all":
            return p
        if mf == "sqrt":
            return min(p, math.ceil(math.sqrt(p)))
        return max(1, min(p, math.ceil(float(mf) * p)))

    def to_dict(self) -> dict:
        return {"n_estimators": self.n_estimators, "max_features": self.max_features, "max_depth": self.max_depth}

    def label(self) -> str:
        return f"n_estimators={self.n_estimators};max_features={self.max_features};max_depth={self.max_depth}"


PAPER_GRID = {
    "n_estimators": [10, 20, 50, 100, 200, 500, 1000],
    "max_features": [0.6, 0.8, "all", "sqrt"],
    "max_depth": [2, 4, 5, 6],
}


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flattened binary tree. ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def predict(self, X) -> np.ndarray:
        A = _features(X)
        node = np.zeros(A.shape[0], dtype=np.intp)
        rows = np.arange(A.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            r, nd = rows[internal], node[internal]
            go_left = A[r, feat[internal]] <= self.threshold[nd]
            node[internal] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionTree":
        return cls(
            np.array(data["feature"], dtype=np.intp),
            np.array(data["threshold"], dtype=float),
            np.array(data["left"], dtype=np.intp),
            np.array(data["right"], dtype=np.intp),
            np.array(data["value"], dtype=float),
        )


def _best_split(A: np.ndarray, y: np.ndarray, feats: np.ndarray):
    """Best variance-reduction split over ``feats``; ``None`` if nothing splits.

    Returns ``(feature, threshold)``. Among equal scores the earlier feature in
    ``feats`` and then the lower threshold wins.
    """
    n = len(y)
    sub = A[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = sub[order, np.arange(len(feats))]
    ys = y[order]
    csum = np.cumsum(ys, axis=0)[:-1]
    csq = np.cumsum(ys * ys, axis=0)[:-1]
    tot, tot_sq = csum[-1] + ys[-1], csq[-1] + ys[-1] ** 2
    n_left = np.arange(1, n)[:, None]
    n_right = n - n_left
    sse = (csq - csum**2 / n_left) + ((tot_sq - csq) - (tot - csum) ** 2 / n_right)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)
    # column-major scan: first feature, then lowest position
    flat = int(np.argmin(sse.T))
    j, pos = divmod(flat, n - 1)
    thr = 0.5 * (xs[pos, j] + xs[pos + 1, j])
    if not thr < xs[pos + 1, j]:
        thr = xs[pos, j]
    return int(feats[j]), float(thr)


def tree_fit(
    X: DesignMatrix,
    max_depth: Optional[int] = None,
    max_features: MaxFeatures = "all",
    rng: Optional[np.random.Generator] = None,
) -> RegressionTree:
    """Greedy CART regression tree minimising weighted child variance.

    Each node draws ``max_features`` candidate columns without replacement.
    Nodes stop splitting at ``max_depth``, below 2 samples, or when the
    target is constant; leaves predict the sample mean.
    """
    A, y = X.features, X.target
    if len(y) == 0:
        raise ModelError("empty data")
    rng = rng if rng is not None else np.random.default_rng(0)
    p = A.shape[1]
    k = ForestHyper(1, max_features, max_depth).n_candidates(p)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(mean):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(mean)
        return len(feature) - 1

    stack = [(np.arange(len(y)), 0, new_node(float(y.sum() / len(y))))]
    while stack:
        idx, depth, node = stack.pop()
        if len(idx) < 2 or (max_depth is not None and depth >= max_depth):
            continue
        yi = y[idx]
        if yi.min() == yi.max():
            continue
        feats = np.arange(p) if k == p else np.sort(rng.choice(p, size=k, replace=False))
        split = _best_split(A[idx], yi, feats)
        if split is None:
            continue
        f, thr = split
        mask = A[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(float(y[li].sum() / len(li)))
        right[node] = new_node(float(y[ri].sum() / len(ri)))
        stack.append((ri, depth + 1, right[node]))
        stack.append((li, depth + 1, left[node]))
    return RegressionTree(
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value, dtype=float),
    )


# --- forest ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[RegressionTree, ...]
    hyper: ForestHyper
    seed: int
    feature_ids: tuple[str, ...] = ()

    def predict(self, X) -> np.ndarray:
        preds = np.stack([t.predict(X) for t in self.trees])
        return preds.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": "rf",
            "hyper": self.hyper.to_dict(),
            "seed": self.seed,
            "feature_ids": list(self.feature_ids),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForestModel":
        return cls(
            tuple(RegressionTree.from_dict(t) for t in data["trees"]),
            ForestHyper(**data["hyper"]),
            int(data["seed"]),
            tuple(data.get("feature_ids", ())),
        )


def model_from_dict(data: dict):
    if data.get("kind") == "linreg":
        return LinearModel.from_dict(data)
    if data.get("kind") == "rf":
        return ForestModel.from_dict(data)
    raise ModelError(f"unknown model kind {data.get('kind')!r}")


def _fit_one_tree(X: DesignMatrix, hyper: ForestHyper, seed: int, index: int) -> RegressionTree:
    # child stream depends only on (seed, index), not on scheduling
    rng = np.random.default_rng([seed, index])
    boot = rng.integers(0, X.rows, size=X.rows)
    return tree_fit(X.subset(boot), hyper.max_depth, hyper.max_features, rng)


def forest_fit(X: DesignMatrix, hyper: ForestHyper, seed: int = 0, n_jobs: int = 1) -> ForestModel:
    """Bagged CART trees on bootstrap resamples of the rows.

    Results are identical for any ``n_jobs``.
    """
    if X.rows < 2:
        raise ModelError("forest needs at least 2 rows")
    jobs = range(hyper.n_estimators)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda i: _fit_one_tree(X, hyper, seed, i), jobs))
    else:
        trees = [_fit_one_tree(X, hyper, seed, i) for i in jobs]
    return ForestModel(tuple(trees), hyper, seed, X.feature_ids)


def _r2(actual: np.ndarray, predicted: np.ndarray) -> float:
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0:
        return math.nan
    return 1.0 - float(np.sum((actual - predicted) ** 2)) / ss_tot


@dataclass(frozen=True)
class CvRow:
    hyper: ForestHyper
    fold_scores: tuple[float, ...]
    mean_score: float


def _grid_combos(grid: dict) -> list[ForestHyper]:
    return [
        ForestHyper(n, mf, d)
        for n, mf, d in itertools.product(grid["n_estimators"], grid["max_features"], grid["max_depth"])
    ]


def grid_search_cv(
    X: DesignMatrix, grid: Optional[dict] = None, folds: int = 5, seed: int = 0, n_jobs: int = 1
) -> tuple[ForestHyper, list[CvRow]]:
    """Exhaustive grid search scored by mean validation R².

    Folds are contiguous blocks of weeks. A fold whose validation target is
    constant has undefined R² and is left out of that combination's mean.
    Ties go to the earliest combination in grid order.

    Tree ``i`` of a forest depends only on ``(seed, i)``, so for each
    ``(max_features, max_depth)`` and fold the largest forest is grown once and
    smaller ``n_estimators`` reuse its leading trees. Scores equal those of
    separately fitted forests exactly.
    """
    grid = PAPER_GRID if grid is None else grid
    if X.rows < folds or folds < 2:
        raise ModelError(f"need at least {max(folds, 2)} rows for {folds}-fold CV, got {X.rows}")
    combos = _grid_combos(grid)
    blocks = np.array_split(np.arange(X.rows), folds)
    n_max = max(grid["n_estimators"])
    fold_scores: dict[ForestHyper, list[float]] = {h: [] for h in combos}
    shapes = dict.fromkeys((h.max_features, h.max_depth) for h in combos)
    for mf, depth in shapes:
        for b in blocks:
            train = np.setdiff1d(np.arange(X.rows), b)
            big = forest_fit(X.subset(train), ForestHyper(n_max, mf, depth), seed, n_jobs)
            per_tree = np.stack([t.predict(X.features[b]) for t in big.trees])
            for h in combos:
                if (h.max_features, h.max_depth) == (mf, depth):
                    pred = per_tree[: h.n_estimators].mean(axis=0)
                    fold_scores[h].append(_r2(X.target[b], pred))
    table = []
    for hyper in combos:
        scores = fold_scores[hyper]
        finite = [s for s in scores if not math.isnan(s)]
        mean = float(np.mean(finite)) if finite else -math.inf
        table.append(CvRow(hyper, tuple(scores), mean))
    best = table[0]
    for row in table[1:]:
        if row.mean_score > best.mean_score:
            best = row
    return best.hyper, table
