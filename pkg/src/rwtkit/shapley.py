"""Exact Shapley attribution by full coalition enumeration.

The value of a coalition S for an instance x is the model's mean prediction
over a background set with the features in S taken from x and everything
else from the background row.  With q features that gives 2^q coalition
values, each computed exactly once; feature i's attribution is the
Shapley-weighted sum of its marginal contributions over all coalitions that
exclude i, with the weights |S|! (q-|S|-1)! / q! formed as exact rationals
and converted to float once.

The attribution is exact, so the axioms hold by construction: the base
value plus all attributions telescopes to the model's prediction at x
(checked at 1e-9 whenever an explanation is built), features the model
ignores get zero, and symmetric features get equal credit.

Enumeration is capped at 15 features; beyond that the 2^q table stops being
a desk-scale object.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage

from .errors import EmptyBackground, TooManyFeatures
from .features import Feature, FeatureVector

__all__ = [
    "MAX_EXACT_FEATURES",
    "BackgroundSet",
    "ShapExplanation",
    "GlobalImportance",
    "coalition_value",
    "shap_exact",
    "shap_batch",
    "shap_global",
    "export_summary",
    "export_heatmap",
]

MAX_EXACT_FEATURES = 15

#: Absolute tolerance for the telescoping identity base + sum(phi) == f(x).
EFFICIENCY_TOL = 1e-9

_WEIGHT_CACHE: dict[int, np.ndarray] = {}


def _shapley_weights(q: int) -> np.ndarray:
    """w[s] = s! (q-s-1)! / q! for s = 0..q-1, via exact rationals."""
    if q not in _WEIGHT_CACHE:
        _WEIGHT_CACHE[q] = np.array(
            [
                float(Fraction(factorial(s) * factorial(q - s - 1), factorial(q)))
                for s in range(q)
            ]
        )
    return _WEIGHT_CACHE[q]


def _predict_fn(model):
    fn = model.predict if hasattr(model, "predict") else model
    if not callable(fn):
        raise TypeError(f"model {type(model).__name__} is neither callable nor has .predict")

    def call(matrix: np.ndarray) -> np.ndarray:
        out = np.asarray(fn(matrix), dtype=float).ravel()
        if out.shape != (len(matrix),):
            raise ValueError(
                f"model returned shape {out.shape} for {len(matrix)} rows"
            )
        return out

    return call


@dataclass(frozen=True)
class BackgroundSet:
    """Reference rows the attribution marginalizes over."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError(f"background must be 2-D, got ndim={rows.ndim}")
        if len(rows) == 0:
            raise EmptyBackground("background set has no rows")
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_feature_vectors(cls, vectors) -> "BackgroundSet":
        return cls(np.stack([v.as_array() for v in vectors]))

    def subsample(self, size: int, seed: int = 0) -> "BackgroundSet":
        """At most ``size`` rows, drawn without replacement, original order."""
        if size < 1:
            raise EmptyBackground(f"subsample size must be >= 1, got {size}")
        if size >= len(self):
            return self
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(self), size=size, replace=False))
        return BackgroundSet(self.rows[chosen])


def _as_row(x, q: int) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    arr = np.asarray(x, dtype=float).ravel()
    if arr.shape != (q,):
        raise ValueError(f"instance has shape {arr.shape}, background has {q} features")
    return arr


def coalition_value(model, x, subset, background: BackgroundSet) -> float:
    """Mean prediction with columns in ``subset`` pinned to ``x``.

    ``subset`` holds 0-based column indices; the empty subset gives the
    background mean prediction and the full subset gives the prediction
    at x.
    """
    q = background.n_features
    row = _as_row(x, q)
    cols = sorted(set(int(c) for c in subset))
    if cols and (cols[0] < 0 or cols[-1] >= q):
        raise ValueError(f"subset {cols} outside columns 0..{q - 1}")
    z = background.rows.copy()
    z[:, cols] = row[cols]
    return float(np.mean(_predict_fn(model)(z)))


@dataclass(frozen=True)
class ShapExplanation:
    """Exact attributions for one instance.

    ``base`` is the empty-coalition value, ``phi`` the per-feature
    attributions in column order, and ``fx`` the full-coalition value;
    ``base + sum(phi) == fx`` within 1e-9 by construction.
    """

    base: float
    phi: tuple[float, ...]
    fx: float
    x: tuple[float, ...]
    instance_key: str = ""

    def __post_init__(self) -> None:
        gap = abs(self.base + sum(self.phi) - self.fx)
        if gap > EFFICIENCY_TOL:
            raise ValueError(
                f"attributions do not telescope to the prediction (gap {gap:.3e})"
            )


def _coalition_table(predict, x: np.ndarray, background: BackgroundSet) -> np.ndarray:
    """values[mask] for every coalition bitmask, one model call per chunk."""
    q = background.n_features
    m = len(background)
    n_masks = 1 << q
    values = np.empty(n_masks)
    chunk = max(1, (1 << 17) // max(m, 1))
    for start in range(0, n_masks, chunk):
        masks = np.arange(start, min(start + chunk, n_masks))
        z = np.broadcast_to(background.rows, (len(masks), m, q)).copy()
        for j in range(q):
            with_j = (masks >> j) & 1 == 1
            z[with_j, :, j] = x[j]
        preds = predict(z.reshape(-1, q)).reshape(len(masks), m)
        values[masks] = preds.mean(axis=1)
    return values


def shap_exact(model, x, background: BackgroundSet, instance_key: str = "") -> ShapExplanation:
    """Exact attributions for one instance by full enumeration."""
    q = background.n_features
    if q > MAX_EXACT_FEATURES:
        raise TooManyFeatures(
            f"exact enumeration supports up to {MAX_EXACT_FEATURES} features, got {q}"
        )
    row = _as_row(x, q)
    predict = _predict_fn(model)
    values = _coalition_table(predict, row, background)
    masks = np.arange(1 << q)
    sizes = np.bitwise_count(masks)
    weights = _shapley_weights(q)
    phi = np.empty(q)
    for i in range(q):
        without = masks[(masks >> i) & 1 == 0]
        gain = values[without | (1 << i)] - values[without]
        phi[i] = float(np.sum(weights[sizes[without]] * gain))
    return ShapExplanation(
        base=float(values[0]),
        phi=tuple(float(v) for v in phi),
        fx=float(values[-1]),
        x=tuple(float(v) for v in row),
        instance_key=instance_key,
    )


def shap_batch(model, x_rows, background: BackgroundSet) -> tuple[ShapExplanation, ...]:
    """Explain each row of an (n, q) matrix; keys are the row indices."""
    matrix = np.asarray(x_rows, dtype=float)
    if matrix.ndim != 2:
        raise ValueError(f"x_rows must be 2-D, got ndim={matrix.ndim}")
    return tuple(
        shap_exact(model, matrix[i], background, instance_key=str(i))
        for i in range(len(matrix))
    )


@dataclass(frozen=True)
class GlobalImportance:
    """Mean absolute attribution per feature over a set of explanations.

    ``percentages`` is ``None`` when every attribution is zero (the shares
    would be 0/0); ``ranking`` lists feature columns by descending
    importance, ties broken by lower column index.
    """

    importance: tuple[float, ...]
    percentages: tuple[float, ...] | None
    ranking: tuple[int, ...]


def shap_global(explanations) -> GlobalImportance:
    if not explanations:
        raise ValueError("need at least one explanation")
    phi = np.stack([e.phi for e in explanations])
    importance = np.mean(np.abs(phi), axis=0)
    total = float(importance.sum())
    if total > 0.0:
        percentages = tuple(float(100.0 * v / total) for v in importance)
    else:
        percentages = None
    ranking = tuple(
        sorted(range(len(importance)), key=lambda c: (-importance[c], c))
    )
    return GlobalImportance(
        importance=tuple(float(v) for v in importance),
        percentages=percentages,
        ranking=ranking,
    )


def _feature_label(column: int, q: int) -> str:
    if q == len(Feature):
        return Feature(column + 1).name
    return f"x{column + 1}"


def _instance_label(explanation: ShapExplanation, index: int) -> str:
    return explanation.instance_key or str(index)


def export_summary(explanations) -> str:
    """Per-(feature, instance) attribution rows as CSV text.

    Columns: feature, rank (global, 1-based), instance, shap_value,
    feature_value (the instance's value of that feature, model-input
    space).  Rows are ordered by rank, then instance.
    """
    explanations = tuple(explanations)
    ranking = shap_global(explanations).ranking
    q = len(explanations[0].phi)
    lines = ["feature,rank,instance,shap_value,feature_value"]
    for rank, col in enumerate(ranking, start=1):
        for idx, e in enumerate(explanations):
            lines.append(
                f"{_feature_label(col, q)},{rank},{_instance_label(e, idx)},"
                f"{e.phi[col]!r},{e.x[col]!r}"
            )
    return "\n".join(lines) + "\n"


def export_heatmap(explanations) -> str:
    """Attribution heatmap as CSV text.

    Instances (columns) are ordered by average-linkage hierarchical
    clustering of their attribution vectors (Euclidean distance), so
    identical profiles sit adjacent; features (rows) are ordered by global
    rank.  After the matrix an ``f(x)`` row repeats each instance's
    prediction, and a ``global_importance`` trailer lists mean absolute
    attribution and percentage share per feature (percentage ``NA`` when
    undefined).
    """
    explanations = tuple(explanations)
    g = shap_global(explanations)
    q = len(explanations[0].phi)
    phi = np.stack([e.phi for e in explanations])  # (n, q)
    if len(explanations) > 1:
        order = list(leaves_list(linkage(phi, method="average", metric="euclidean")))
    else:
        order = [0]
    labels = [_instance_label(explanations[i], i) for i in order]
    lines = ["instance," + ",".join(labels)]
    lines.append("f(x)," + ",".join(repr(explanations[i].fx) for i in order))
    for col in g.ranking:
        row = ",".join(repr(float(phi[i, col])) for i in order)
        lines.append(f"{_feature_label(col, q)},{row}")
    lines.append("global_importance")
    lines.append("feature,importance,percentage")
    for col in g.ranking:
        pct = "NA" if g.percentages is None else repr(g.percentages[col])
        lines.append(f"{_feature_label(col, q)},{g.importance[col]!r},{pct}")
    return "\n".join(lines) + "\n"
