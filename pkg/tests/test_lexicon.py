"""
Tests for dictionary induction, statistics and dictionary files
"""

import logging
import os
import sys
from dataclasses import replace

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from src.core.candidates import Vocabulary, generate_candidates
from src.core.classifier import classify, fit_forest
from src.core.dialex_config import FEATURE_COUNT, ForestParams
from src.core.errors import FeatureOrderError, LabelError, RecordFormatError
from src.core.lexicon import (DictStats, Dictionary, dictionary_stats, export_tsv, format_stats_report,
                              import_tsv, induce_dictionary, read_dictionary_tsv)
from src.core.pair_data import Label, label_map
from src.core.stringsim import feature_vector


def constant_forest(label: int):
    """Forest whose every leaf votes for one class"""
    X = np.random.default_rng(0).random((10, FEATURE_COUNT))
    y = np.full(10, label)
    return fit_forest(X, y, ForestParams(n_trees=3))


def vocabularies():
    lemmas = Vocabulary.from_counts({"haus": 3, "kind": 2})
    dialect = Vocabulary.from_counts({"huus": 9, "hus": 5, "chind": 4, "boom": 1})
    return lemmas, dialect


def test_always_positive_forest_keeps_every_candidate():
    lemmas, dialect = vocabularies()
    dictionary = induce_dictionary(lemmas, dialect, constant_forest(1), k=2)
    # "kind" ties at distance 4 between boom, hus and huus
    assert dictionary.entries == {"haus": ("hus", "huus"), "kind": ("boom", "chind")}
    assert dictionary.dialect_id == "other"


def test_reject_all_forest_gives_empty_dictionary():
    lemmas, dialect = vocabularies()
    dictionary = induce_dictionary(lemmas, dialect, constant_forest(0), k=4, dialect_id="nds")
    assert len(dictionary) == 0
    assert dictionary.dialect_id == "nds"
    assert dictionary_stats(dictionary) == DictStats(0, 0, 0.0)


def test_induction_independent_of_jobs():
    rng = np.random.default_rng(3)
    X = rng.random((80, FEATURE_COUNT))
    y = (X[:, 8] < 0.4).astype(np.int64)
    forest = fit_forest(X, y, ForestParams(n_trees=10))
    letters = list("aeiklmnrstuh")
    words = lambda count: {"".join(rng.choice(letters, size=rng.integers(2, 7))): 1 for _ in range(count)}
    lemmas = Vocabulary.from_counts(words(30))
    dialect = Vocabulary.from_counts(words(120))
    serial = induce_dictionary(lemmas, dialect, forest, k=5, jobs=1)
    parallel = induce_dictionary(lemmas, dialect, forest, k=5, jobs=2)
    assert serial.entries == parallel.entries


def test_induced_pairs_reclassify_positive():
    rng = np.random.default_rng(4)
    letters = list("aeiklmnrstuh")
    words = lambda count: {"".join(rng.choice(letters, size=rng.integers(2, 7))): 1 for _ in range(count)}
    lemmas = Vocabulary.from_counts(words(25))
    dialect = Vocabulary.from_counts(words(100))
    sets = list(generate_candidates(lemmas, dialect, 4))
    pairs = [(cs.lemma, term) for cs in sets for term in cs.terms]
    X = np.array([list(feature_vector(lemma, term)) for lemma, term in pairs])
    y = (X[:, 5] >= np.median(X[:, 5])).astype(np.int64)
    forest = fit_forest(X, y, ForestParams(n_trees=8))
    for threshold in (0.3, 0.5, 0.8):
        dictionary = induce_dictionary(lemmas, dialect, forest, k=4, threshold=threshold)
        induced = set(dictionary.pairs())
        for lemma, term in pairs:
            label = classify(forest, feature_vector(lemma, term), threshold)
            assert (label == Label.POSITIVE) == ((lemma, term) in induced)


def test_feature_order_mismatch_rejected():
    lemmas, dialect = vocabularies()
    forest = constant_forest(1)
    swapped = replace(forest, feature_order=tuple(reversed(forest.feature_order)))
    with pytest.raises(FeatureOrderError):
        induce_dictionary(lemmas, dialect, swapped)


def test_invalid_threshold_rejected():
    lemmas, dialect = vocabularies()
    with pytest.raises(ValueError):
        induce_dictionary(lemmas, dialect, constant_forest(1), threshold=1.0)


def test_dictionary_canonical_form():
    dictionary = Dictionary({"kind": ("chind", "kind", "chind"), "haus": ("huus",)}, "als")
    assert list(dictionary.entries) == ["haus", "kind"]
    assert dictionary.variants("kind") == ("chind", "kind")
    assert dictionary.variants("baum") == ()
    assert "haus" in dictionary
    assert list(dictionary.pairs()) == [("haus", "huus"), ("kind", "chind"), ("kind", "kind")]
    with pytest.raises(ValueError):
        Dictionary({"haus": ()})
    with pytest.raises(ValueError):
        Dictionary({"haus": ("huus",)}, "xyz")


def test_dictionary_stats():
    dictionary = Dictionary.from_pairs([("haus", "huus"), ("haus", "hus"), ("kind", "chind")])
    stats = dictionary_stats(dictionary)
    assert stats == DictStats(2, 3, 1.5)
    report = format_stats_report({"als": stats, "bar": DictStats(0, 0, 0.0)})
    assert report == "Dialect\tLemmas\tVariants\tV/L\nals\t2\t3\t1.50\nbar\t0\t0\t0.00\n"


def test_export_import_round_trip(tmp_path):
    dictionary = Dictionary.from_pairs([("kind", "chind"), ("haus", "huus"), ("haus", "hus")], "als")
    path = export_tsv(dictionary, tmp_path / "als.tsv", provenance='{"k":10}')
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ['# config: {"k":10}', "haus\thus", "haus\thuus", "kind\tchind"]
    assert import_tsv(path, "als") == dictionary


def test_import_drops_duplicates_with_warning(tmp_path, caplog):
    path = tmp_path / "dup.tsv"
    path.write_text("haus\thuus\nHaus\thuus\nkind\tchind\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING, logger="src.core.lexicon"):
        dictionary = import_tsv(path)
    assert dictionary.entries == {"haus": ("huus",), "kind": ("chind",)}
    assert "1 duplicate" in caplog.text
    assert read_dictionary_tsv(path)[1] == 1


def test_import_rejects_malformed_lines(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("haus\thuus\nkind\tchind\textra\n", encoding="utf-8")
    with pytest.raises(RecordFormatError, match=r"bad\.tsv:2:"):
        import_tsv(path)


def test_label_map():
    assert label_map("translation") is Label.POSITIVE
    assert label_map("inflected") is Label.NEGATIVE
    assert label_map("inflected", inflected_positive=True) is Label.POSITIVE
    assert label_map("unrelated") is Label.NEGATIVE
    assert label_map("1") is Label.POSITIVE
    assert label_map(0) is Label.NEGATIVE
    with pytest.raises(LabelError):
        label_map("maybe", line_no=4)
