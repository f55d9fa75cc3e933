"""
Intrinsic evaluation of the pair classifier
Seeded train/test splits, precision/recall/F1, the multi-seed protocol, cross-dialect
transfer matrices with a multi-source ALL row, and the training-size ablation
"""

import logging
from dataclasses import dataclass, replace
from functools import partial
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .classifier import Forest, check_feature_order, classify_batch, train_forest
from .dialex_config import FOREST_PARAMS, ForestParams
from .errors import DataError
from .pair_data import LabeledPair, pairs_to_arrays
from .parallel import ordered_map

logger = logging.getLogger(__name__)

ALL_SOURCES = "ALL"


def seeded_rng(*keys: int) -> np.random.Generator:
    """PCG64 generator keyed by a tuple of non-negative integers"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


@dataclass(frozen=True)
class Metrics:
    """Confusion counts of the positive class with precision, recall and F1"""
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def counts(self) -> Tuple[int, int, int, int]:
        return self.tp, self.fp, self.fn, self.tn

    @classmethod
    def from_labels(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> "Metrics":
        """Count the confusion matrix of two aligned 0/1 vectors"""
        t = np.asarray(y_true, dtype=np.int64)
        p = np.asarray(y_pred, dtype=np.int64)
        if t.shape != p.shape:
            raise ValueError("label vectors must have the same length")
        return cls(
            tp=int(np.sum((t == 1) & (p == 1))),
            fp=int(np.sum((t == 0) & (p == 1))),
            fn=int(np.sum((t == 1) & (p == 0))),
            tn=int(np.sum((t == 0) & (p == 0))),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization"""
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class AggregateMetrics:
    """Mean and sample standard deviation of P/R/F1 over repeated runs"""
    precision: float
    recall: float
    f1: float
    precision_std: float
    recall_std: float
    f1_std: float
    runs: int

    @classmethod
    def from_runs(cls, runs: Sequence[Metrics]) -> "AggregateMetrics":
        if not runs:
            raise ValueError("cannot aggregate zero runs")
        table = np.array([[m.precision, m.recall, m.f1] for m in runs], dtype=np.float64)
        mean = table.mean(axis=0)
        std = table.std(axis=0, ddof=1) if len(runs) > 1 else np.zeros(3)
        return cls(float(mean[0]), float(mean[1]), float(mean[2]),
                   float(std[0]), float(std[1]), float(std[2]), len(runs))


@dataclass(frozen=True)
class SplitSpec:
    """How one dataset is divided into train and test"""
    train_fraction: float = 0.8
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise ValueError("split seed must be non-negative")


def _train_size(n: int, fraction: float) -> int:
    return min(max(int(np.floor(n * fraction + 0.5)), 1), n - 1)


def split_dataset(data: Sequence[LabeledPair], spec: SplitSpec) -> Tuple[List[LabeledPair], List[LabeledPair]]:
    """Seeded shuffle followed by a prefix/suffix split"""
    n = len(data)
    if n < 2:
        raise ValueError(f"cannot split a dataset of {n} pair(s)")
    order = seeded_rng(spec.seed).permutation(n)
    if not spec.stratify:
        n_train = _train_size(n, spec.train_fraction)
        return [data[i] for i in order[:n_train]], [data[i] for i in order[n_train:]]

    # Split each class separately, keeping the shuffled order inside both parts
    in_train = np.zeros(n, dtype=bool)
    labels = np.array([int(data[i].label) for i in order])
    for label in (0, 1):
        positions = np.flatnonzero(labels == label)
        if len(positions) == 0:
            continue
        take = int(np.floor(len(positions) * spec.train_fraction + 0.5))
        in_train[positions[:take]] = True
    if in_train.all() or not in_train.any():
        raise ValueError("stratified split leaves one side empty")
    train = [data[i] for i, keep in zip(order, in_train) if keep]
    test = [data[i] for i, keep in zip(order, in_train) if not keep]
    return train, test


def evaluate(forest: Forest, test: Sequence[LabeledPair], threshold: float = 0.5) -> Metrics:
    """Confusion counts and P/R/F1 of the forest on a test set"""
    check_feature_order(forest)
    if not test:
        raise ValueError("cannot evaluate on an empty test set")
    X, y = pairs_to_arrays(test)
    return Metrics.from_labels(y, classify_batch(forest, X, threshold))


def random_baseline(test: Sequence[LabeledPair], positive_rate: float, seed: int = 0) -> Metrics:
    """Seeded coin flip predicting positive with the given rate"""
    if not test:
        raise ValueError("cannot evaluate on an empty test set")
    if not 0.0 <= positive_rate <= 1.0:
        raise ValueError(f"positive_rate must be in [0, 1], got {positive_rate}")
    _, y = pairs_to_arrays(test)
    predictions = (seeded_rng(seed).random(len(y)) < positive_rate).astype(np.int64)
    return Metrics.from_labels(y, predictions)


def positive_rate(data: Sequence[LabeledPair]) -> float:
    """Share of positive pairs"""
    return sum(int(p.label) for p in data) / len(data) if data else 0.0


@dataclass(frozen=True)
class ProtocolResult:
    """Per-seed metrics of the repeated-split protocol and their aggregate"""
    seeds: Tuple[int, ...]
    runs: Tuple[Metrics, ...]
    baseline_runs: Tuple[Metrics, ...]
    aggregate: AggregateMetrics
    baseline: AggregateMetrics


def bli_protocol(data: Sequence[LabeledPair], seeds: Sequence[int], params: ForestParams = FOREST_PARAMS,
                 train_fraction: float = 0.8, stratify: bool = False, threshold: float = 0.5,
                 jobs: int = 1) -> ProtocolResult:
    """Train on a seeded split and evaluate on the rest, once per seed"""
    if not seeds:
        raise ValueError("at least one seed is required")
    runs, baseline_runs = [], []
    for seed in seeds:
        train, test = split_dataset(data, SplitSpec(train_fraction, seed, stratify))
        forest = train_forest(train, replace(params, seed=seed), jobs)
        metrics = evaluate(forest, test, threshold)
        runs.append(metrics)
        baseline_runs.append(random_baseline(test, positive_rate(train), seed))
        logger.info("seed %d: P=%.4f R=%.4f F1=%.4f", seed, metrics.precision, metrics.recall, metrics.f1)
    return ProtocolResult(tuple(seeds), tuple(runs), tuple(baseline_runs),
                          AggregateMetrics.from_runs(runs), AggregateMetrics.from_runs(baseline_runs))


@dataclass(frozen=True)
class CrossMatrix:
    """Mean metrics for every (train source, test target) cell"""
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]
    cells: Mapping[Tuple[str, str], AggregateMetrics]

    def cell(self, source: str, target: str) -> AggregateMetrics:
        return self.cells[(source, target)]


def _tagged(source: str, target: str, exc: Exception) -> DataError:
    return DataError(f"cross-dialect cell ({source}, {target}): {exc}")


def _train_unit(train_sets: Mapping[Tuple[str, int], Sequence[LabeledPair]], params: ForestParams,
                unit: Tuple[str, int]) -> Forest:
    source, seed = unit
    try:
        return train_forest(train_sets[unit], replace(params, seed=seed))
    except ValueError as exc:
        raise _tagged(source, "*", exc) from None


def cross_dialect_matrix(datasets: Mapping[str, Sequence[LabeledPair]], seeds: Sequence[int],
                         params: ForestParams = FOREST_PARAMS, train_fraction: float = 0.8,
                         stratify: bool = False, threshold: float = 0.5, jobs: int = 1) -> CrossMatrix:
    """Train on each source's train split (and on all of them), test on every target's test split"""
    if not datasets:
        raise ValueError("at least one dialect dataset is required")
    if not seeds:
        raise ValueError("at least one seed is required")
    dialects = tuple(datasets)
    splits: Dict[Tuple[str, int], Tuple[List[LabeledPair], List[LabeledPair]]] = {}
    for source in dialects:
        for target in dialects:
            for dialect in (source, target):
                for seed in seeds:
                    if (dialect, seed) in splits:
                        continue
                    try:
                        splits[(dialect, seed)] = split_dataset(
                            datasets[dialect], SplitSpec(train_fraction, seed, stratify))
                    except ValueError as exc:
                        raise _tagged(source, target, exc) from None

    train_sets: Dict[Tuple[str, int], List[LabeledPair]] = {}
    for seed in seeds:
        pooled: List[LabeledPair] = []
        for dialect in dialects:
            train_sets[(dialect, seed)] = splits[(dialect, seed)][0]
            pooled.extend(splits[(dialect, seed)][0])
        train_sets[(ALL_SOURCES, seed)] = pooled

    sources = dialects + (ALL_SOURCES,)
    units = [(source, seed) for source in sources for seed in seeds]
    forests = dict(zip(units, ordered_map(partial(_train_unit, train_sets, params), units, jobs)))
    logger.info("trained %d cross-dialect models", len(forests))

    cells: Dict[Tuple[str, str], AggregateMetrics] = {}
    for source in sources:
        for target in dialects:
            runs = []
            for seed in seeds:
                try:
                    runs.append(evaluate(forests[(source, seed)], splits[(target, seed)][1], threshold))
                except ValueError as exc:
                    raise _tagged(source, target, exc) from None
            cells[(source, target)] = AggregateMetrics.from_runs(runs)
    return CrossMatrix(sources, dialects, cells)


@dataclass(frozen=True)
class CurvePoint:
    """Mean and sample standard deviation of F1 at one training fraction"""
    fraction: float
    train_size: int
    mean_f1: float
    std_f1: float
    runs: int


def _subsample(pool_size: int, fraction: float, seed: int, nested: bool) -> np.ndarray:
    size = pool_size if fraction >= 1.0 else max(1, int(np.floor(pool_size * fraction + 0.5)))
    if size >= pool_size:
        return np.arange(pool_size)
    # Nested draws share one permutation per seed; independent draws also key on the fraction
    keys = (seed,) if nested else (seed, int(round(fraction * 1_000_000)))
    return np.sort(seeded_rng(*keys).permutation(pool_size)[:size])


def _ablation_run(pool: Sequence[LabeledPair], test: Sequence[LabeledPair], params: ForestParams,
                  threshold: float, nested: bool, unit: Tuple[float, int]) -> float:
    fraction, seed = unit
    rows = _subsample(len(pool), fraction, seed, nested)
    forest = train_forest([pool[i] for i in rows], replace(params, seed=seed))
    return evaluate(forest, test, threshold).f1


def ablation_curve(data: Sequence[LabeledPair], fractions: Sequence[float], seeds: Sequence[int],
                   params: ForestParams = FOREST_PARAMS, test_fraction: float = 0.2, split_seed: int = 0,
                   nested: bool = False, threshold: float = 0.5, jobs: int = 1) -> List[CurvePoint]:
    """F1 against training-pool fraction, evaluated on one fixed test split"""
    if not fractions:
        raise ValueError("at least one training fraction is required")
    if not seeds:
        raise ValueError("at least one seed is required")
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"training fractions must lie in (0, 1], got {fraction}")
    pool, test = split_dataset(data, SplitSpec(1.0 - test_fraction, split_seed))
    units = [(float(f), int(s)) for f in fractions for s in seeds]
    scores = ordered_map(partial(_ablation_run, pool, test, params, threshold, nested), units, jobs)

    curve = []
    for i, fraction in enumerate(fractions):
        f1s = np.asarray(scores[i * len(seeds):(i + 1) * len(seeds)], dtype=np.float64)
        std = float(f1s.std(ddof=1)) if len(f1s) > 1 else 0.0
        size = len(_subsample(len(pool), float(fraction), seeds[0], nested))
        curve.append(CurvePoint(float(fraction), size, float(f1s.mean()), std, len(f1s)))
        logger.info("fraction %.2f: mean F1 %.4f (std %.4f) over %d seeds", fraction, f1s.mean(), std, len(f1s))
    return curve


def format_protocol_report(result: ProtocolResult,
                           published: Optional[Sequence[Tuple[str, float, float, float]]] = None) -> str:
    """TSV with one row per seed, the mean, the random baseline and published context rows"""
    lines = ["run\tprecision\trecall\tf1\ttp\tfp\tfn\ttn"]
    for seed, m in zip(result.seeds, result.runs):
        lines.append(f"seed={seed}\t{m.precision:.4f}\t{m.recall:.4f}\t{m.f1:.4f}\t"
                     f"{m.tp}\t{m.fp}\t{m.fn}\t{m.tn}")
    a = result.aggregate
    lines.append(f"mean\t{a.precision:.4f}\t{a.recall:.4f}\t{a.f1:.4f}\t\t\t\t")
    lines.append(f"std\t{a.precision_std:.4f}\t{a.recall_std:.4f}\t{a.f1_std:.4f}\t\t\t\t")
    b = result.baseline
    lines.append(f"random\t{b.precision:.4f}\t{b.recall:.4f}\t{b.f1:.4f}\t\t\t\t")
    for name, p, r, f1 in published or ():
        lines.append(f"published:{name}\t{p:.4f}\t{r:.4f}\t{f1:.4f}\t\t\t\t")
    return "\n".join(lines) + "\n"


def format_metrics_report(metrics: Metrics) -> str:
    """TSV with the metrics of one evaluation"""
    return ("precision\trecall\tf1\ttp\tfp\tfn\ttn\n"
            f"{metrics.precision:.4f}\t{metrics.recall:.4f}\t{metrics.f1:.4f}\t"
            f"{metrics.tp}\t{metrics.fp}\t{metrics.fn}\t{metrics.tn}\n")


def format_cross_matrix(matrix: CrossMatrix, metric: str = "f1",
                        published: Optional[Mapping[Tuple[str, str], float]] = None) -> str:
    """TSV matrix: rows are train sources plus ALL, columns are test dialects

    Published cells follow as `published:SOURCE` rows, `-` where a target was not published.
    """
    if metric not in ("precision", "recall", "f1"):
        raise ValueError(f"unknown metric {metric!r}")
    lines = ["train\\test\t" + "\t".join(matrix.targets)]
    for source in matrix.sources:
        values = [getattr(matrix.cell(source, target), metric) for target in matrix.targets]
        lines.append(source + "\t" + "\t".join(f"{v:.4f}" for v in values))
    published = published or {}
    for source in dict.fromkeys(source for source, _ in published):
        cells = [published.get((source, target)) for target in matrix.targets]
        if all(v is None for v in cells):
            continue
        lines.append(f"published:{source}\t" + "\t".join("-" if v is None else f"{v:.4f}" for v in cells))
    return "\n".join(lines) + "\n"


def format_curve(curve: Sequence[CurvePoint], published: Optional[Mapping[float, float]] = None) -> str:
    """TSV of the ablation curve, then published mean F1 anchors"""
    lines = ["fraction\ttrain_size\tmean_f1\tstd_f1\truns"]
    for point in curve:
        lines.append(f"{point.fraction:g}\t{point.train_size}\t{point.mean_f1:.4f}\t{point.std_f1:.4f}\t{point.runs}")
    for fraction, f1 in sorted((published or {}).items()):
        lines.append(f"published:{fraction:g}\t\t{f1:.4f}\t\t")
    return "\n".join(lines) + "\n"
