"""
Tests for vocabulary extraction and nearest-neighbor candidate search
"""

import os
import random
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from src.core.candidates import (CandidateIndex, Vocabulary, extract_vocab, generate_candidates, nearest_neighbors,
                                 read_tokens, read_vocab, write_candidates, write_vocab)
from src.core.errors import RecordFormatError
from tests import oracles


def vocab_of(*terms: str) -> Vocabulary:
    return Vocabulary.from_counts({term: 1 for term in terms})


def test_extract_vocab_ranking():
    vocab = extract_vocab(["Haus", "haus", "Baum", "huus", "baum", "haus", "", "  "])
    assert vocab.entries == (("haus", 3), ("baum", 2), ("huus", 1))


def test_extract_vocab_top_n_and_ties():
    vocab = extract_vocab(["b", "a", "c", "c"], top_n=2)
    assert vocab.entries == (("c", 2), ("a", 1))
    assert extract_vocab([]).entries == ()


def test_vocabulary_rejects_unsorted_entries():
    with pytest.raises(ValueError):
        Vocabulary((("a", 1), ("b", 2)))
    with pytest.raises(ValueError):
        Vocabulary((("a", 1), ("a", 1)))


def test_nearest_neighbors_example():
    vocab = vocab_of("haus", "hus", "maus", "baum")
    result = nearest_neighbors("haus", vocab, 2)
    assert result.lemma == "haus"
    assert result.candidates == (("haus", 0), ("hus", 1))


def test_nearest_neighbors_ties_break_lexicographically():
    vocab = vocab_of("maus", "laus", "raus", "haus")
    result = nearest_neighbors("xaus", vocab, 3)
    assert result.candidates == (("haus", 1), ("laus", 1), ("maus", 1))


def test_nearest_neighbors_small_vocabularies():
    assert nearest_neighbors("haus", Vocabulary(), 5).candidates == ()
    vocab = vocab_of("a", "bb", "ccc")
    result = nearest_neighbors("abc", vocab, 10)
    assert len(result.candidates) == 3
    assert [d for _, d in result.candidates] == sorted(d for _, d in result.candidates)
    with pytest.raises(ValueError):
        nearest_neighbors("haus", vocab, 0)


def test_nearest_neighbors_against_all_pairs_scan():
    rng = random.Random(21)
    for _ in range(50):
        terms = {"".join(rng.choice("abcde") for _ in range(rng.randint(1, 7))) for _ in range(rng.randint(1, 60))}
        vocab = vocab_of(*terms)
        lemma = "".join(rng.choice("abcde") for _ in range(rng.randint(1, 7)))
        k = rng.randint(1, 12)
        expected = oracles.nearest_neighbors(lemma, sorted(terms), k)
        assert list(CandidateIndex(vocab).nearest(lemma, k).candidates) == expected


def test_generate_candidates_keeps_lemma_order():
    lemmas = Vocabulary.from_counts({"haus": 5, "baum": 3, "kind": 1})
    dialect = vocab_of("huus", "boom", "chind", "hus")
    sets = list(generate_candidates(lemmas, dialect, 2))
    assert [s.lemma for s in sets] == ["haus", "baum", "kind"]
    assert sets[0].terms == ["hus", "huus"]
    with pytest.raises(ValueError):
        list(generate_candidates(lemmas, dialect, 0))


def test_generate_candidates_independent_of_jobs():
    rng = random.Random(4)
    lemmas = extract_vocab("".join(rng.choice("aeiklmnrst") for _ in range(rng.randint(2, 7))) for _ in range(40))
    dialect = extract_vocab("".join(rng.choice("aeiklmnrst") for _ in range(rng.randint(2, 7))) for _ in range(200))
    serial = list(generate_candidates(lemmas, dialect, 5, jobs=1))
    parallel = list(generate_candidates(lemmas, dialect, 5, jobs=2))
    assert serial == parallel


def test_vocab_file_round_trip(tmp_path):
    vocab = Vocabulary.from_counts({"haus": 4, "huus": 4, "boom": 1})
    path = write_vocab(vocab, tmp_path / "vocab.tsv", provenance='{"k": 10}')
    assert path.read_text(encoding="utf-8").startswith("# config: ")
    assert read_vocab(path) == vocab


def test_read_vocab_errors(tmp_path):
    cases = {
        "fields.tsv": "haus\t1\textra\n",
        "freq.tsv": "haus\tmany\n",
        "negative.tsv": "haus\t-1\n",
        "duplicate.tsv": "haus\t1\nHaus\t2\n",
    }
    for name, text in cases.items():
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        with pytest.raises(RecordFormatError):
            read_vocab(path)
    path = tmp_path / "duplicate.tsv"
    with pytest.raises(RecordFormatError, match=":2:"):
        read_vocab(path)


def test_read_tokens_and_write_candidates(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("Dat Huus\n\n# comment\nis groot\n", encoding="utf-8")
    assert list(read_tokens(corpus)) == ["Dat", "Huus", "is", "groot"]
    sets = generate_candidates(vocab_of("haus"), vocab_of("huus", "hus"), 2)
    out = write_candidates(sets, tmp_path / "cands.tsv")
    assert out.read_text(encoding="utf-8") == "haus\thus\t1\nhaus\thuus\t1\n"
