"""Regression trees, bagged forests, and gradient-boosted ensembles.

Split rule (shared by every tree grown here): candidate thresholds are the
midpoints between consecutive distinct sorted values of a feature; a
candidate scores the summed squared error of its two sides, where each
side's error is ``sum((y - y.mean())**2)`` computed over the side's rows in
ascending row order.  The winner is the candidate minimizing
(score, feature index, threshold), compared exactly in that order, and a
split is kept only when it reduces the parent error by strictly more than
``gamma``.  Rows go left when ``x <= threshold``; a midpoint that rounds up
to the upper neighbouring value cannot separate the two rows and is skipped.

Those rules pin the fit down to the float level, so an independent
exhaustive enumeration of all candidates reproduces every chosen split
bit for bit.  Internally a prefix-sum screen narrows the candidates first
and only near-ties are rescored canonically; the screen's tolerance is far
wider than its rounding error, so it never changes the winner.

Bagged forests average ``n_estimators`` trees fitted on bootstrap resamples
(n draws with replacement), with ``max_features`` candidate features drawn
per split.  Boosted ensembles fit each stage's tree to the current
residuals; leaf values are ``soft_threshold(sum(residuals), reg_alpha) /
(n_leaf + reg_lambda)`` and the learning rate scales tree contributions at
prediction time, never the stored leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyData, InvalidParam
from .features import FeatureVector

__all__ = [
    "TreeParams",
    "DecisionTree",
    "ForestParams",
    "Forest",
    "BoostParams",
    "BoostedEnsemble",
    "tree_fit",
    "rf_fit",
    "gbm_fit",
    "predict",
]

#: Screening tolerance for near-tied split candidates, scaled by the node's
#: total squared error.  Anything within this band of the screened optimum
#: is rescored with the canonical formula before the winner is chosen.
_TIE_BAND = 1e-6


@dataclass(frozen=True)
class TreeParams:
    """Growth limits for a single regression tree."""

    max_depth: int = 30
    min_samples_leaf: int = 1
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise InvalidParam(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise InvalidParam(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.gamma < 0.0:
            raise InvalidParam(f"gamma must be >= 0, got {self.gamma}")


def _canonical_sse(y: np.ndarray) -> float:
    """Summed squared deviation from the mean, in documented arithmetic."""
    return float(np.sum((y - y.mean()) ** 2))


def _soft_threshold(value: float, alpha: float) -> float:
    if value > alpha:
        return value - alpha
    if value < -alpha:
        return value + alpha
    return 0.0


def _candidate_splits(x_col: np.ndarray, min_leaf: int) -> list[tuple[int, float]]:
    """(left count, threshold) for every admissible midpoint of one feature."""
    order = np.argsort(x_col, kind="stable")
    v = x_col[order]
    out = []
    n = len(v)
    for k in range(min_leaf, n - min_leaf + 1):
        if k == 0 or k == n:
            continue
        a, b = v[k - 1], v[k]
        if a == b:
            continue
        thr = (a + b) / 2.0
        if thr >= b:  # cannot separate the neighbours in float arithmetic
            continue
        out.append((k, float(thr)))
    return out


def _best_split(
    x: np.ndarray,
    y: np.ndarray,
    feature_ids: np.ndarray,
    min_leaf: int,
    min_child_weight: float,
) -> tuple[int, float, float] | None:
    """The winning (feature, threshold, canonical score) over ``feature_ids``.

    Screens every candidate with prefix sums, then rescores everything within
    the tie band using the canonical per-side formula; the winner minimizes
    (score, feature index, threshold) on the rescored values.
    """
    n = len(y)
    shortlist: list[tuple[int, float]] = []  # (feature, threshold)
    screened: list[float] = []
    for f in feature_ids:
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        v = col[order]
        ys = y[order]
        cum = np.cumsum(ys)
        cum_sq = np.cumsum(ys * ys)
        total, total_sq = cum[-1], cum_sq[-1]
        for k, thr in _candidate_splits(col, min_leaf):
            if k < min_child_weight or (n - k) < min_child_weight:
                continue
            left = cum_sq[k - 1] - cum[k - 1] ** 2 / k
            right = (total_sq - cum_sq[k - 1]) - (total - cum[k - 1]) ** 2 / (n - k)
            shortlist.append((int(f), thr))
            screened.append(float(left + right))
    if not shortlist:
        return None
    screened_arr = np.array(screened)
    band = _TIE_BAND * (_canonical_sse(y) + 1.0)
    near = screened_arr <= screened_arr.min() + band
    best: tuple[float, int, float] | None = None
    for (f, thr), keep in zip(shortlist, near):
        if not keep:
            continue
        mask = x[:, f] <= thr
        score = _canonical_sse(y[mask]) + _canonical_sse(y[~mask])
        key = (score, f, thr)
        if best is None or key < best:
            best = key
    score, f, thr = best
    return f, thr, score


@dataclass(frozen=True)
class DecisionTree:
    """A fitted regression tree in flat-array form.

    ``feature[i] == -1`` marks a leaf whose prediction is ``value[i]``;
    internal nodes route rows left when ``x[:, feature] <= threshold``.
    Children are stored preorder.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node_samples: np.ndarray
    n_features: int

    def __len__(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if len(depths) else 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x, self.n_features)
        idx = np.zeros(len(x), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = feat >= 0
            if not np.any(active):
                break
            rows = np.nonzero(active)[0]
            f = feat[rows]
            go_left = x[rows, f] <= self.threshold[idx[rows]]
            nxt = np.where(go_left, self.left[idx[rows]], self.right[idx[rows]])
            idx[rows] = nxt
        return self.value[idx]

    def to_state(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": [int(v) for v in self.feature],
            "threshold": [repr(float(v)) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [repr(float(v)) for v in self.value],
            "n_node_samples": [int(v) for v in self.n_node_samples],
        }

    @classmethod
    def from_state(cls, state: dict) -> "DecisionTree":
        return cls(
            feature=np.array(state["feature"], dtype=np.int64),
            threshold=np.array([float(s) for s in state["threshold"]]),
            left=np.array(state["left"], dtype=np.int64),
            right=np.array(state["right"], dtype=np.int64),
            value=np.array([float(s) for s in state["value"]]),
            n_node_samples=np.array(state["n_node_samples"], dtype=np.int64),
            n_features=int(state["n_features"]),
        )


class _TreeBuilder:
    """Grows one tree; collects nodes preorder into parallel lists."""

    def __init__(
        self,
        x: np.ndarray,
        y: np.ndarray,
        params: TreeParams,
        leaf_value,
        allowed_features: np.ndarray,
        max_features: int | None,
        min_child_weight: float,
        rng: np.random.Generator | None,
    ):
        self.x = x
        self.y = y
        self.params = params
        self.leaf_value = leaf_value
        self.allowed = allowed_features
        self.max_features = max_features
        self.min_child_weight = min_child_weight
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_node: list[int] = []

    def _emit(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.n_node.append(0)
        return len(self.feature) - 1

    def _pick_features(self) -> np.ndarray:
        if self.max_features is None or self.max_features >= len(self.allowed):
            return self.allowed
        chosen = self.rng.choice(len(self.allowed), size=self.max_features, replace=False)
        return self.allowed[np.sort(chosen)]

    def grow(self, idx: np.ndarray, depth: int) -> int:
        node = self._emit()
        y_node = self.y[idx]
        self.n_node[node] = len(idx)
        self.value[node] = self.leaf_value(y_node)
        min_leaf = self.params.min_samples_leaf
        if depth >= self.params.max_depth or len(idx) < 2 * min_leaf:
            return node
        parent = _canonical_sse(y_node)
        if parent == 0.0:
            return node
        found = _best_split(
            self.x[idx], y_node, self._pick_features(), min_leaf, self.min_child_weight
        )
        if found is None:
            return node
        f, thr, score = found
        if not (parent - score > self.params.gamma):
            return node
        mask = self.x[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.grow(idx[mask], depth + 1)
        self.right[node] = self.grow(idx[~mask], depth + 1)
        return node

    def build(self) -> DecisionTree:
        self.grow(np.arange(len(self.y)), depth=0)
        return DecisionTree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value),
            n_node_samples=np.array(self.n_node, dtype=np.int64),
            n_features=self.x.shape[1],
        )


def _as_matrix(x, n_features: int | None = None) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a row or matrix, got ndim={arr.ndim}")
    if n_features is not None and arr.shape[1] != n_features:
        raise DimensionMismatch(
            f"model was fitted on {n_features} features, input has {arr.shape[1]}"
        )
    return arr


def _check_training_data(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2:
        raise DimensionMismatch(f"x must be 2-D, got ndim={x.ndim}")
    if len(x) == 0:
        raise EmptyData("cannot fit on an empty dataset")
    if len(x) != len(y):
        raise DimensionMismatch(f"{len(x)} rows but {len(y)} targets")
    return x, y


def tree_fit(
    x,
    y,
    params: TreeParams = TreeParams(),
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """Fit one regression tree with mean-valued leaves.

    With ``max_features`` set, each split considers that many features drawn
    without replacement from ``rng`` (required then), in preorder node
    visit order.
    """
    x, y = _check_training_data(x, y)
    if max_features is not None:
        if not (1 <= max_features <= x.shape[1]):
            raise InvalidParam(
                f"max_features must be in 1..{x.shape[1]}, got {max_features}"
            )
        if rng is None:
            raise InvalidParam("max_features subsampling needs an rng")
    builder = _TreeBuilder(
        x,
        y,
        params,
        leaf_value=lambda leaf_y: float(leaf_y.mean()),
        allowed_features=np.arange(x.shape[1]),
        max_features=max_features,
        min_child_weight=0.0,
        rng=rng,
    )
    return builder.build()


@dataclass(frozen=True)
class ForestParams:
    """Bagging configuration; defaults follow the published tuning."""

    n_estimators: int = 100
    max_features: int = 4
    max_depth: int = 30
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise InvalidParam(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.max_features < 1:
            raise InvalidParam(f"max_features must be >= 1, got {self.max_features}")


@dataclass(frozen=True)
class Forest:
    """A bagged ensemble predicting the mean of its trees.

    Tree outputs are sorted before averaging, so the prediction is exactly
    invariant under any permutation of the trees.
    """

    trees: tuple[DecisionTree, ...]
    params: ForestParams
    n_features: int

    def predict(self, x) -> np.ndarray:
        x = _as_matrix(x, self.n_features)
        stacked = np.stack([t.predict(x) for t in self.trees])
        stacked.sort(axis=0)
        return stacked.sum(axis=0) / len(self.trees)

    def to_state(self) -> dict:
        return {
            "n_features": self.n_features,
            "params": {
                "n_estimators": self.params.n_estimators,
                "max_features": self.params.max_features,
                "max_depth": self.params.max_depth,
                "min_samples_leaf": self.params.min_samples_leaf,
                "seed": self.params.seed,
            },
            "trees": [t.to_state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, state: dict) -> "Forest":
        return cls(
            trees=tuple(DecisionTree.from_state(s) for s in state["trees"]),
            params=ForestParams(**state["params"]),
            n_features=int(state["n_features"]),
        )


def rf_fit(x, y, params: ForestParams = ForestParams()) -> Forest:
    """Fit a bagged forest.

    Each tree gets an independent child stream of ``SeedSequence(seed)``;
    within a tree the stream first draws the bootstrap indices (n with
    replacement), then the per-split feature subsets.  Fitting trees in any
    order, serially or in parallel, therefore gives identical forests.
    """
    x, y = _check_training_data(x, y)
    n, q = x.shape
    max_features = min(params.max_features, q)
    tree_params = TreeParams(
        max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf
    )
    streams = np.random.SeedSequence(params.seed).spawn(params.n_estimators)
    trees = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        boot = rng.integers(0, n, size=n)
        builder = _TreeBuilder(
            x[boot],
            y[boot],
            tree_params,
            leaf_value=lambda leaf_y: float(leaf_y.mean()),
            allowed_features=np.arange(q),
            max_features=max_features,
            min_child_weight=0.0,
            rng=rng,
        )
        trees.append(builder.build())
    return Forest(trees=tuple(trees), params=params, n_features=q)


@dataclass(frozen=True)
class BoostParams:
    """Boosting configuration; defaults follow the published tuning."""

    n_estimators: int = 600
    learning_rate: float = 0.01
    max_depth: int = 9
    gamma: float = 0.3
    colsample_bytree: float = 1.0
    min_child_weight: float = 1.0
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise InvalidParam(f"n_estimators must be >= 1, got {self.n_estimators}")
        if not (0.0 < self.learning_rate <= 1.0):
            raise InvalidParam(
                f"learning_rate must be in (0, 1], got {self.learning_rate}"
            )
        if self.gamma < 0.0:
            raise InvalidParam(f"gamma must be >= 0, got {self.gamma}")
        if not (0.0 < self.colsample_bytree <= 1.0):
            raise InvalidParam(
                f"colsample_bytree must be in (0, 1], got {self.colsample_bytree}"
            )
        if self.min_child_weight < 0.0:
            raise InvalidParam(
                f"min_child_weight must be >= 0, got {self.min_child_weight}"
            )
        if self.reg_alpha < 0.0 or self.reg_lambda < 0.0:
            raise InvalidParam("reg_alpha and reg_lambda must be >= 0")


@dataclass(frozen=True)
class BoostedEnsemble:
    """A gradient-boosted sum of trees over a constant base score.

    Prediction is ``base_score + learning_rate * sum(tree(x))``; the stored
    leaf values are unscaled.  ``train_mse`` traces the training
    mean-squared error after each stage.
    """

    base_score: float
    trees: tuple[DecisionTree, ...]
    params: BoostParams
    n_features: int
    train_mse: tuple[float, ...] = field(repr=False, default=())

    def predict(self, x) -> np.ndarray:
        x = _as_matrix(x, self.n_features)
        out = np.full(len(x), self.base_score)
        for tree in self.trees:
            out = out + self.params.learning_rate * tree.predict(x)
        return out

    def staged_predict(self, x, n_stages: int) -> np.ndarray:
        """Prediction using only the first ``n_stages`` trees."""
        if not (0 <= n_stages <= len(self.trees)):
            raise InvalidParam(f"n_stages must be 0..{len(self.trees)}")
        x = _as_matrix(x, self.n_features)
        out = np.full(len(x), self.base_score)
        for tree in self.trees[:n_stages]:
            out = out + self.params.learning_rate * tree.predict(x)
        return out

    def to_state(self) -> dict:
        return {
            "n_features": self.n_features,
            "base_score": repr(float(self.base_score)),
            "params": {
                "n_estimators": self.params.n_estimators,
                "learning_rate": self.params.learning_rate,
                "max_depth": self.params.max_depth,
                "gamma": self.params.gamma,
                "colsample_bytree": self.params.colsample_bytree,
                "min_child_weight": self.params.min_child_weight,
                "reg_alpha": self.params.reg_alpha,
                "reg_lambda": self.params.reg_lambda,
                "min_samples_leaf": self.params.min_samples_leaf,
                "seed": self.params.seed,
            },
            "trees": [t.to_state() for t in self.trees],
            "train_mse": [repr(float(v)) for v in self.train_mse],
        }

    @classmethod
    def from_state(cls, state: dict) -> "BoostedEnsemble":
        return cls(
            base_score=float(state["base_score"]),
            trees=tuple(DecisionTree.from_state(s) for s in state["trees"]),
            params=BoostParams(**state["params"]),
            n_features=int(state["n_features"]),
            train_mse=tuple(float(v) for v in state["train_mse"]),
        )


def gbm_fit(x, y, params: BoostParams = BoostParams()) -> BoostedEnsemble:
    """Fit a gradient-boosted ensemble to squared-error residuals.

    The base score is the target mean.  Each stage fits a tree to the
    current residuals; splits are gated by ``gamma`` on the squared-error
    reduction, children must hold at least ``min_child_weight`` rows, and
    leaf values are the soft-thresholded residual sum over ``n + reg_lambda``.
    Per-tree column subsets (``colsample_bytree``) come from independent
    ``SeedSequence(seed)`` child streams.
    """
    x, y = _check_training_data(x, y)
    n, q = x.shape
    base = float(y.mean())
    tree_params = TreeParams(
        max_depth=params.max_depth,
        min_samples_leaf=params.min_samples_leaf,
        gamma=params.gamma,
    )

    def shrunk_leaf(leaf_y: np.ndarray) -> float:
        total = float(leaf_y.sum())
        return _soft_threshold(total, params.reg_alpha) / (len(leaf_y) + params.reg_lambda)

    n_cols = max(1, math.ceil(params.colsample_bytree * q))
    streams = np.random.SeedSequence(params.seed).spawn(params.n_estimators)
    pred = np.full(n, base)
    trees = []
    trace = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        if n_cols < q:
            allowed = np.sort(rng.choice(q, size=n_cols, replace=False))
        else:
            allowed = np.arange(q)
        residual = y - pred
        builder = _TreeBuilder(
            x,
            residual,
            tree_params,
            leaf_value=shrunk_leaf,
            allowed_features=allowed,
            max_features=None,
            min_child_weight=params.min_child_weight,
            rng=rng,
        )
        tree = builder.build()
        trees.append(tree)
        pred = pred + params.learning_rate * tree.predict(x)
        trace.append(float(np.mean((y - pred) ** 2)))
    return BoostedEnsemble(
        base_score=base,
        trees=tuple(trees),
        params=params,
        n_features=q,
        train_mse=tuple(trace),
    )


def predict(model, x) -> np.ndarray:
    """Predict with any fitted model from this module.

    Accepts a :class:`FeatureVector`, a single row, or an (n, q) matrix and
    always returns a 1-D array.
    """
    if not isinstance(model, (DecisionTree, Forest, BoostedEnsemble)):
        raise TypeError(f"not a tree-family model: {type(model).__name__}")
    return model.predict(x)
