"""
Tests for splits, metrics, the multi-seed protocol, cross-dialect matrices and the ablation curve
"""

import os
import random
import sys
from dataclasses import replace

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from src.core.bli_eval import (ALL_SOURCES, AggregateMetrics, Metrics, SplitSpec, ablation_curve, bli_protocol,
                               cross_dialect_matrix, evaluate, format_cross_matrix, format_curve,
                               format_protocol_report, positive_rate, random_baseline, split_dataset)
from src.core.classifier import train_forest
from src.core.dialex_config import FEATURE_COUNT, SIMILARITY_SLOTS, ForestParams
from src.core.errors import DataError
from src.core.pair_data import Label, LabeledPair
from src.core.published_results import PublishedResults
from src.core.stringsim import FeatureVector
from tests import oracles

SMALL_FOREST = ForestParams(n_trees=10)


def synthetic_pairs(n: int, seed: int = 0, flip: float = 0.0, prefix: str = "w"):
    """Pairs whose similarity features separate the classes, with a share of flipped labels"""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        label = int(rng.random() < 0.4)
        sims = np.clip(0.5 * label + 0.5 * rng.random(SIMILARITY_SLOTS), 0.0, 1.0)
        dists = np.clip(1.0 - sims[:FEATURE_COUNT - SIMILARITY_SLOTS], 0.0, 1.0)
        if rng.random() < flip:
            label = 1 - label
        values = tuple(float(v) for v in np.concatenate([sims, dists]))
        pairs.append(LabeledPair(f"{prefix}{i}", f"{prefix}{i}x", FeatureVector(values), Label(label)))
    return pairs


def test_metrics_example():
    m = Metrics(tp=2, fp=1, fn=2, tn=5)
    assert m.precision == pytest.approx(0.6667, abs=1e-4)
    assert m.recall == pytest.approx(0.5)
    assert m.f1 == pytest.approx(0.5714, abs=1e-4)


def test_metrics_degenerate_cases():
    assert Metrics(0, 0, 3, 4).precision == 0.0
    assert Metrics(0, 0, 0, 4).recall == 0.0
    assert Metrics(0, 2, 3, 4).f1 == 0.0
    with pytest.raises(ValueError):
        Metrics(-1, 0, 0, 0)


def test_metrics_against_direct_count():
    rng = random.Random(17)
    for _ in range(1000):
        n = rng.randint(1, 30)
        y_true = [rng.randint(0, 1) for _ in range(n)]
        y_pred = [rng.randint(0, 1) for _ in range(n)]
        tp, fp, fn, tn = oracles.confusion(y_true, y_pred)
        m = Metrics.from_labels(y_true, y_pred)
        assert m.counts == (tp, fp, fn, tn)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        assert m.precision == pytest.approx(p)
        assert m.recall == pytest.approx(r)
        assert m.f1 == pytest.approx(2 * p * r / (p + r) if p + r else 0.0)


def test_aggregate_uses_sample_std():
    runs = [Metrics(1, 1, 0, 0), Metrics(1, 0, 0, 0)]
    agg = AggregateMetrics.from_runs(runs)
    assert agg.precision == pytest.approx(0.75)
    assert agg.precision_std == pytest.approx(np.std([0.5, 1.0], ddof=1))
    assert AggregateMetrics.from_runs(runs[:1]).f1_std == 0.0
    with pytest.raises(ValueError):
        AggregateMetrics.from_runs([])


def test_split_sizes_and_disjointness():
    data = synthetic_pairs(10)
    train, test = split_dataset(data, SplitSpec(0.8, seed=1))
    assert (len(train), len(test)) == (8, 2)
    assert {p.german for p in train}.isdisjoint({p.german for p in test})
    assert {p.german for p in train + test} == {p.german for p in data}
    assert split_dataset(data, SplitSpec(0.8, seed=1)) == (train, test)
    assert split_dataset(data, SplitSpec(0.8, seed=2)) != (train, test)


def test_split_keeps_both_sides_non_empty():
    data = synthetic_pairs(3)
    train, test = split_dataset(data, SplitSpec(0.99, seed=0))
    assert (len(train), len(test)) == (2, 1)
    train, test = split_dataset(data, SplitSpec(0.01, seed=0))
    assert (len(train), len(test)) == (1, 2)
    with pytest.raises(ValueError):
        split_dataset(data[:1], SplitSpec())
    for fraction in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            SplitSpec(fraction)


def test_stratified_split_preserves_class_shares():
    data = synthetic_pairs(200, seed=4)
    positives = sum(int(p.label) for p in data)
    train, test = split_dataset(data, SplitSpec(0.8, seed=3, stratify=True))
    assert sum(int(p.label) for p in train) == int(np.floor(positives * 0.8 + 0.5))
    assert len(train) + len(test) == 200


def test_evaluate_on_separable_data():
    data = synthetic_pairs(200, seed=1)
    train, test = split_dataset(data, SplitSpec(0.8, seed=1))
    metrics = evaluate(train_forest(train, SMALL_FOREST), test)
    assert metrics.f1 >= 0.95
    assert sum(metrics.counts) == len(test)
    with pytest.raises(ValueError):
        evaluate(train_forest(train, SMALL_FOREST), [])


def test_random_baseline_extremes():
    data = synthetic_pairs(100, seed=2)
    share = positive_rate(data)
    never = random_baseline(data, 0.0, seed=5)
    assert never.tp == never.fp == 0
    always = random_baseline(data, 1.0, seed=5)
    assert always.recall == 1.0
    assert always.precision == pytest.approx(share)
    assert random_baseline(data, 0.3, seed=5) == random_baseline(data, 0.3, seed=5)
    with pytest.raises(ValueError):
        random_baseline(data, 1.5)


def test_protocol_runs_once_per_seed():
    data = synthetic_pairs(120, seed=6, flip=0.1)
    result = bli_protocol(data, [1, 2, 3], SMALL_FOREST)
    assert result.seeds == (1, 2, 3)
    assert len(result.runs) == len(result.baseline_runs) == 3
    assert result.aggregate.runs == 3
    assert result.aggregate.f1 == pytest.approx(np.mean([m.f1 for m in result.runs]))
    assert result.aggregate.f1 > result.baseline.f1
    assert bli_protocol(data, [1, 2, 3], SMALL_FOREST, jobs=2) == result


def test_protocol_report_rows():
    data = synthetic_pairs(60, seed=7)
    result = bli_protocol(data, [4], SMALL_FOREST)
    report = format_protocol_report(result, [("Random Forest", 0.646, 0.534, 0.585)])
    rows = [line.split("\t")[0] for line in report.splitlines()]
    assert rows == ["run", "seed=4", "mean", "std", "random", "published:Random Forest"]


def test_single_dialect_cross_matrix_matches_protocol():
    data = synthetic_pairs(100, seed=8, flip=0.1)
    matrix = cross_dialect_matrix({"bar": data}, [1, 2], SMALL_FOREST)
    protocol = bli_protocol(data, [1, 2], SMALL_FOREST)
    assert matrix.sources == ("bar", ALL_SOURCES)
    assert matrix.targets == ("bar",)
    assert matrix.cell("bar", "bar").f1 == pytest.approx(protocol.aggregate.f1)
    assert matrix.cell(ALL_SOURCES, "bar") == matrix.cell("bar", "bar")


def test_cross_matrix_shape_and_report():
    datasets = {"ksh": synthetic_pairs(60, seed=9, prefix="k"), "nds": synthetic_pairs(60, seed=10, prefix="n")}
    matrix = cross_dialect_matrix(datasets, [1], SMALL_FOREST)
    assert set(matrix.cells) == {(s, t) for s in ("ksh", "nds", "ALL") for t in ("ksh", "nds")}
    assert matrix == cross_dialect_matrix(datasets, [1], SMALL_FOREST, jobs=2)
    lines = format_cross_matrix(matrix, "recall").splitlines()
    assert lines[0] == "train\\test\tksh\tnds"
    assert [line.split("\t")[0] for line in lines[1:]] == ["ksh", "nds", "ALL"]
    with pytest.raises(ValueError):
        format_cross_matrix(matrix, "accuracy")


def test_published_rows_follow_cross_matrix_and_curve():
    published = PublishedResults()
    datasets = {"ksh": synthetic_pairs(60, seed=9, prefix="k"), "nds": synthetic_pairs(60, seed=10, prefix="n")}
    matrix = cross_dialect_matrix(datasets, [1], SMALL_FOREST)
    lines = format_cross_matrix(matrix, "f1", published.cross_dialect("f1")).splitlines()
    assert [line.split("\t")[0] for line in lines[1:4]] == ["ksh", "nds", "ALL"]
    rows = {line.split("\t")[0]: line.split("\t")[1:] for line in lines[4:]}
    assert list(rows) == ["published:ksh", "published:nds", "published:als", "published:pfl",
                          "published:bar", "published:ALL"]
    assert rows["published:ALL"] == ["0.7700", "0.7100"]
    partial_cells = {("bar", "ksh"): 0.72, ("bar", "gsw"): 0.5}
    assert format_cross_matrix(matrix, "f1", partial_cells).splitlines()[-1] == "published:bar\t0.7200\t-"
    assert format_cross_matrix(matrix, "f1", {("bar", "gsw"): 0.5}) == format_cross_matrix(matrix, "f1")

    curve = ablation_curve(synthetic_pairs(50, seed=12), [0.5], [1], SMALL_FOREST)
    curve_lines = format_curve(curve, published.training_size_anchors()).splitlines()
    assert curve_lines[1].startswith("0.5\t")
    assert curve_lines[2:] == ["published:0.1\t\t0.5200\t\t", "published:0.4\t\t0.5600\t\t",
                               "published:1\t\t0.5900\t\t"]


def test_cross_matrix_names_failing_cell():
    datasets = {"ksh": synthetic_pairs(60, seed=9), "pfl": synthetic_pairs(1, seed=3)}
    with pytest.raises(DataError, match=r"\(ksh, pfl\)"):
        cross_dialect_matrix(datasets, [1], SMALL_FOREST)


def test_ablation_full_pool():
    data = synthetic_pairs(100, seed=11, flip=0.1)
    curve = ablation_curve(data, [1.0], [5], SMALL_FOREST)
    assert len(curve) == 1
    point = curve[0]
    pool, test = split_dataset(data, SplitSpec(0.8, 0))
    assert point.train_size == len(pool) == 80
    assert point.runs == 1
    assert point.std_f1 == 0.0
    expected = evaluate(train_forest(pool, replace(SMALL_FOREST, seed=5)), test).f1
    assert point.mean_f1 == pytest.approx(expected)


def test_ablation_subsample_sizes_and_rejections():
    data = synthetic_pairs(50, seed=12)
    curve = ablation_curve(data, [0.1, 0.5], [1, 2], SMALL_FOREST)
    assert [p.train_size for p in curve] == [4, 20]
    assert format_curve(curve).splitlines()[0] == "fraction\ttrain_size\tmean_f1\tstd_f1\truns"
    with pytest.raises(ValueError):
        ablation_curve(data, [0.0], [1], SMALL_FOREST)
    with pytest.raises(ValueError):
        ablation_curve(data, [0.5], [], SMALL_FOREST)


def test_nested_ablation_is_deterministic():
    data = synthetic_pairs(80, seed=13, flip=0.1)
    first = ablation_curve(data, [0.3, 0.6], [1, 2], SMALL_FOREST, nested=True)
    second = ablation_curve(data, [0.3, 0.6], [1, 2], SMALL_FOREST, nested=True, jobs=2)
    assert first == second


def test_more_training_data_does_not_hurt():
    data = synthetic_pairs(300, seed=14, flip=0.15)
    curve = ablation_curve(data, [0.1, 1.0], list(range(1, 41)), SMALL_FOREST)
    small, full = curve
    assert small.runs == full.runs == 40
    # One-sided: the full pool may not be noticeably worse than a tenth of it
    assert full.mean_f1 >= small.mean_f1 - 0.02


def test_published_tables():
    published = PublishedResults()
    by_name = {row.name: row for row in published.bli_comparison()}
    assert by_name["Random Forest"].f1 == pytest.approx(0.585)
    assert [row.name for row in published.bli_comparison()] == ["Random", "Mistral-123b", "Random Forest"]
    assert published.cross_dialect("f1")[("ALL", "bar")] == pytest.approx(0.70)
    assert published.training_size_anchors() == {0.1: 0.52, 0.4: 0.56, 1.0: 0.59}
    assert published.dictionary_stats()["als"]["lemmas"] == 38129
    assert set(published.query_expansion()) == {"ksh", "nds", "als", "pfl", "bar", "ALL"}


def test_published_tables_missing_directory(tmp_path):
    published = PublishedResults(str(tmp_path))
    assert published.bli_comparison() == []
    assert published.cross_dialect() == {}
