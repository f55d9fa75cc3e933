"""
Random forest classifier for word pairs
CART trees grown with Gini impurity on bootstrap samples, soft-voting prediction,
and a versioned JSON serialization

Model document (schema "dialex-forest", version 1):
    {
      "schema": "dialex-forest",
      "version": 1,
      "rng": "numpy.PCG64/SeedSequence([seed, tree_index])",
      "params": {ForestParams fields},
      "feature_order": [12 feature names],
      "trees": [
        {"feature": [...], "threshold": [...], "left": [...], "right": [...],
         "value": [[negative_weight, positive_weight], ...]}
      ]
    }
Nodes are stored in preorder, node 0 is the root. Internal nodes send a row left
when row[feature] <= threshold. Leaves have feature = left = right = -1.
"""

import json
import logging
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dialex_config import FEATURE_COUNT, FEATURE_ORDER, FOREST_PARAMS, ForestParams
from .errors import ConfigError, FeatureOrderError, ForestFormatError
from .file_io import atomic_write_text, require_file
from .pair_data import Label, LabeledPair, pairs_to_arrays
from .parallel import ordered_map

logger = logging.getLogger(__name__)

SCHEMA_NAME = "dialex-forest"
SCHEMA_VERSION = 1
RNG_NAME = "numpy.PCG64/SeedSequence([seed, tree_index])"
LEAF = -1
# Impurity decreases at or below this are rounding noise, not a split
MIN_DECREASE = 1e-12


def gini(counts: Sequence[float]) -> float:
    """Gini impurity 1 - sum(p_i^2) of a class-count vector"""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or (counts < 0).any():
        raise ValueError("class counts must be a non-negative vector")
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini impurity is undefined for all-zero counts")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True)
class Split:
    """Chosen split of a node"""
    feature: int
    threshold: float
    decrease: float


def best_split(X: np.ndarray, y: np.ndarray, weights: np.ndarray,
               rows: Sequence[int], feature_subset: Sequence[int]) -> Optional[Split]:
    """Split of rows maximizing the weighted Gini decrease; None if nothing decreases impurity"""
    rows = np.asarray(rows, dtype=np.int64)
    w = weights[rows]
    w_pos = np.where(y[rows] == 1, w, 0.0)
    w_neg = w - w_pos
    total_pos = float(w_pos.sum())
    total_neg = float(w_neg.sum())
    total = total_pos + total_neg
    if total <= 0:
        return None
    parent = gini([total_neg, total_pos])
    if parent == 0.0:
        return None

    best: Optional[Split] = None
    for f in sorted({int(f) for f in feature_subset}):
        values = X[rows, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        valid = v[:-1] < v[1:]
        if not valid.any():
            continue
        left_pos = np.cumsum(w_pos[order])[:-1]
        left_neg = np.cumsum(w_neg[order])[:-1]
        left_w = left_pos + left_neg
        right_pos = total_pos - left_pos
        right_neg = total_neg - left_neg
        right_w = total - left_w
        with np.errstate(divide="ignore", invalid="ignore"):
            left_gini = 1.0 - (left_pos / left_w) ** 2 - (left_neg / left_w) ** 2
            right_gini = 1.0 - (right_pos / right_w) ** 2 - (right_neg / right_w) ** 2
            decrease = parent - (left_w / total) * left_gini - (right_w / total) * right_gini
        decrease = np.where(valid, decrease, -np.inf)
        i = int(np.argmax(decrease))
        value = float(decrease[i])
        if value > MIN_DECREASE and (best is None or value > best.decrease):
            threshold = (v[i] + v[i + 1]) / 2.0
            if threshold >= v[i + 1]:
                threshold = v[i]
            best = Split(f, float(threshold), value)
    return best


def fallback_split(X: np.ndarray, rows: Sequence[int], feature_subset: Sequence[int]) -> Optional[Split]:
    """Zero-gain split of a mixed node: lowest non-constant feature, midpoint above its smallest value"""
    rows = np.asarray(rows, dtype=np.int64)
    for f in sorted({int(f) for f in feature_subset}):
        distinct = np.unique(X[rows, f])
        if len(distinct) < 2:
            continue
        threshold = (distinct[0] + distinct[1]) / 2.0
        if threshold >= distinct[1]:
            threshold = distinct[0]
        return Split(f, float(threshold), 0.0)
    return None


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Binary decision tree in flat preorder arrays"""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row"""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.nonzero(active)[0]
            current = node[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return node

    def positive_fraction(self, X: np.ndarray) -> np.ndarray:
        """Positive-class fraction of the leaf reached by every row"""
        leaf_values = self.value[self.apply(X)]
        return leaf_values[:, 1] / leaf_values.sum(axis=1)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization"""
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n_features: int = FEATURE_COUNT) -> "DecisionTree":
        """Create a DecisionTree from dictionary, validating its structure"""
        try:
            feature = np.asarray(data["feature"], dtype=np.int64)
            threshold = np.asarray(data["threshold"], dtype=np.float64)
            left = np.asarray(data["left"], dtype=np.int64)
            right = np.asarray(data["right"], dtype=np.int64)
            value = np.asarray(data["value"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ForestFormatError(f"malformed tree: {exc}") from None
        n = len(feature)
        if n == 0:
            raise ForestFormatError("tree has no nodes")
        if not (feature.ndim == threshold.ndim == left.ndim == right.ndim == 1) or \
                len(threshold) != n or len(left) != n or len(right) != n or value.shape != (n, 2):
            raise ForestFormatError("tree node arrays have inconsistent lengths")
        if not np.isfinite(threshold).all() or not np.isfinite(value).all():
            raise ForestFormatError("tree holds non-finite numbers")
        if (value < 0).any() or (value.sum(axis=1) <= 0).any():
            raise ForestFormatError("node class counts must be non-negative and non-zero")
        ids = np.arange(n)
        leaves = feature == LEAF
        if ((left[leaves] != LEAF) | (right[leaves] != LEAF)).any():
            raise ForestFormatError("leaf nodes must not have children")
        internal = ~leaves
        if ((feature[internal] < 0) | (feature[internal] >= n_features)).any():
            raise ForestFormatError(f"feature index out of range [0, {n_features})")
        for children in (left, right):
            bad = (children[internal] <= ids[internal]) | (children[internal] >= n)
            if bad.any():
                raise ForestFormatError("child index out of range")
        return cls(feature, threshold, left, right, value)


@dataclass(frozen=True, eq=False)
class Forest:
    """Trained ensemble; immutable and shareable between workers"""
    params: ForestParams
    trees: Tuple[DecisionTree, ...]
    feature_order: Tuple[str, ...] = FEATURE_ORDER

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent random substream of one tree"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tree_index])))


def _canonical_order(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sort rows by (features, label) so training does not depend on input row order"""
    keys = [y] + [X[:, j] for j in reversed(range(X.shape[1]))]
    order = np.lexsort(keys)
    return X[order], y[order]


def _class_weights(y: np.ndarray, mode: Optional[str]) -> np.ndarray:
    """Per-class weight vector indexed by label"""
    weights = np.ones(2, dtype=np.float64)
    if mode == "balanced":
        counts = np.bincount(y, minlength=2)
        for label in (0, 1):
            if counts[label] > 0:
                weights[label] = len(y) / (2.0 * counts[label])
    return weights


def _draw_features(X: np.ndarray, rows: np.ndarray, max_features: int, rng: np.random.Generator) -> List[int]:
    """Visit features in random order until max_features non-constant ones are found"""
    chosen: List[int] = []
    node_values = X[rows]
    for f in rng.permutation(X.shape[1]):
        column = node_values[:, f]
        if column.max() > column.min():
            chosen.append(int(f))
            if len(chosen) == max_features:
                break
    return chosen


def _grow_tree(X: np.ndarray, y: np.ndarray, counts: np.ndarray, weights: np.ndarray,
               params: ForestParams, rng: np.random.Generator) -> DecisionTree:
    """Grow one CART tree depth-first, assigning node ids in preorder"""
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[Tuple[float, float]] = []

    stack = [(np.nonzero(counts > 0)[0], 0, LEAF, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        node_id = len(feature)
        if parent != LEAF:
            (left if is_left else right)[parent] = node_id

        w = weights[rows]
        positive = float(w[y[rows] == 1].sum())
        negative = float(w[y[rows] == 0].sum())
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append((negative, positive))

        if positive == 0.0 or negative == 0.0:
            continue
        if counts[rows].sum() < params.min_samples_split:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        subset = _draw_features(X, rows, params.max_features, rng)
        if not subset:
            continue
        # A mixed node with a non-constant feature is always split
        split = best_split(X, y, weights, rows, subset) or fallback_split(X, rows, subset)

        feature[node_id] = split.feature
        threshold[node_id] = split.threshold
        goes_left = X[rows, split.feature] <= split.threshold
        stack.append((rows[~goes_left], depth + 1, node_id, False))
        stack.append((rows[goes_left], depth + 1, node_id, True))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64).reshape(-1, 2),
    )


def _train_tree(X: np.ndarray, y: np.ndarray, class_weights: np.ndarray,
                params: ForestParams, tree_index: int) -> DecisionTree:
    rng = tree_rng(params.seed, tree_index)
    n = len(y)
    if params.bootstrap:
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
    else:
        counts = np.ones(n, dtype=np.float64)
    return _grow_tree(X, y, counts, counts * class_weights[y], params, rng)


def fit_forest(X: np.ndarray, y: np.ndarray, params: ForestParams = FOREST_PARAMS, jobs: int = 1) -> Forest:
    """Train a forest on a feature matrix and binary labels"""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != FEATURE_COUNT:
        raise ValueError(f"feature matrix must have shape (n, {FEATURE_COUNT})")
    if len(X) == 0:
        raise ValueError("cannot train a forest on empty data")
    if len(y) != len(X) or not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be a 0/1 vector aligned with the feature matrix")
    X, y = _canonical_order(X, y)
    class_weights = _class_weights(y, params.class_weight)
    trees = ordered_map(partial(_train_tree, X, y, class_weights, params), range(params.n_trees), jobs)
    logger.info("trained %d trees on %d rows (%d positive)", len(trees), len(y), int(y.sum()))
    return Forest(params=params, trees=tuple(trees), feature_order=FEATURE_ORDER)


def train_forest(data: Sequence[LabeledPair], params: ForestParams = FOREST_PARAMS, jobs: int = 1) -> Forest:
    """Train a forest on labeled pairs"""
    if not data:
        raise ValueError("cannot train a forest on empty data")
    X, y = pairs_to_arrays(data)
    return fit_forest(X, y, params, jobs)


def _as_matrix(X: Any) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != FEATURE_COUNT:
        raise ValueError(f"expected rows of {FEATURE_COUNT} feature values")
    if not np.isfinite(X).all():
        raise ValueError("feature values must be finite")
    return X


def predict_proba_batch(forest: Forest, X: Any) -> np.ndarray:
    """Mean positive leaf fraction over all trees, for every row"""
    X = _as_matrix(X)
    if len(X) == 0:
        return np.empty(0, dtype=np.float64)
    return np.mean([tree.positive_fraction(X) for tree in forest.trees], axis=0)


def predict_proba(forest: Forest, fv: Sequence[float]) -> float:
    """Positive-class probability of one feature vector"""
    values = np.asarray(list(fv), dtype=np.float64)
    if values.shape != (FEATURE_COUNT,):
        raise ValueError(f"feature vector must have {FEATURE_COUNT} values")
    return float(predict_proba_batch(forest, values[None, :])[0])


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")


def classify(forest: Forest, fv: Sequence[float], threshold: float = 0.5) -> Label:
    """Positive iff predict_proba >= threshold"""
    _check_threshold(threshold)
    return Label.POSITIVE if predict_proba(forest, fv) >= threshold else Label.NEGATIVE


def classify_batch(forest: Forest, X: Any, threshold: float = 0.5) -> np.ndarray:
    """0/1 predictions for every row"""
    _check_threshold(threshold)
    return (predict_proba_batch(forest, X) >= threshold).astype(np.int64)


def check_feature_order(forest: Forest) -> None:
    """Reject forests trained on another feature order"""
    if tuple(forest.feature_order) != FEATURE_ORDER:
        raise FeatureOrderError(
            f"forest feature order {list(forest.feature_order)} differs from engine order {list(FEATURE_ORDER)}")


def split_counts(forest: Forest) -> Dict[str, int]:
    """How often each feature is used for a split across the forest"""
    counts = dict.fromkeys(forest.feature_order, 0)
    for tree in forest.trees:
        for f in tree.feature[tree.feature != LEAF]:
            counts[forest.feature_order[int(f)]] += 1
    return counts


def forest_to_dict(forest: Forest) -> Dict[str, Any]:
    """Convert to dictionary for JSON serialization"""
    return {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "rng": RNG_NAME,
        "params": asdict(forest.params),
        "feature_order": list(forest.feature_order),
        "trees": [tree.to_dict() for tree in forest.trees],
    }


def save_forest(forest: Forest) -> bytes:
    """Serialize a forest to its canonical JSON document"""
    text = json.dumps(forest_to_dict(forest), sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return (text + "\n").encode("utf-8")


def load_forest(data: Union[bytes, str]) -> Forest:
    """Parse and validate a serialized forest"""
    try:
        text = data.decode("utf-8") if isinstance(data, bytes) else data
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ForestFormatError(f"not a forest document: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_NAME:
        raise ForestFormatError(f"document schema is not '{SCHEMA_NAME}'")
    if doc.get("version") != SCHEMA_VERSION:
        raise ForestFormatError(f"unsupported schema version {doc.get('version')!r}")
    if doc.get("rng") != RNG_NAME:
        raise ForestFormatError(f"unsupported random generator {doc.get('rng')!r}")
    for key in ("params", "feature_order", "trees"):
        if key not in doc:
            raise ForestFormatError(f"missing key '{key}'")

    try:
        params = ForestParams(**doc["params"])
    except (TypeError, ConfigError) as exc:
        raise ForestFormatError(f"invalid params: {exc}") from None
    feature_order = doc["feature_order"]
    if not isinstance(feature_order, list) or not feature_order or \
            not all(isinstance(name, str) for name in feature_order):
        raise ForestFormatError("feature_order must be a non-empty list of names")
    if not isinstance(doc["trees"], list) or not doc["trees"]:
        raise ForestFormatError("trees must be a non-empty list")
    n_features = min(len(feature_order), FEATURE_COUNT)
    trees = []
    for i, tree_doc in enumerate(doc["trees"]):
        if not isinstance(tree_doc, dict):
            raise ForestFormatError(f"tree {i} is not an object")
        try:
            trees.append(DecisionTree.from_dict(tree_doc, n_features))
        except ForestFormatError as exc:
            raise ForestFormatError(f"tree {i}: {exc.message}") from None
    return Forest(params=params, trees=tuple(trees), feature_order=tuple(feature_order))


def save_forest_file(forest: Forest, path: Union[str, Path]) -> Path:
    """Write the model document atomically"""
    return atomic_write_text(path, save_forest(forest).decode("utf-8"))


def load_forest_file(path: Union[str, Path]) -> Forest:
    """Read a model document from disk"""
    path = require_file(path)
    try:
        return load_forest(path.read_bytes())
    except ForestFormatError as exc:
        raise ForestFormatError(exc.message, path=path) from None
