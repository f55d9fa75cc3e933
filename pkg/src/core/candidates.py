"""
Candidate pre-filtering
Retrieves, for every German lemma, its k nearest dialect terms by Levenshtein distance
"""

import logging
from bisect import insort
from collections import Counter
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from rapidfuzz.distance import Levenshtein

from .errors import RecordFormatError
from .file_io import atomic_write_text, iter_lines, iter_tsv, with_header
from .parallel import ordered_map
from .stringsim import normalize_term

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Vocabulary:
    """Frequency-ranked unique terms, ties broken lexicographically"""
    entries: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        seen = set()
        for term, freq in self.entries:
            if term in seen:
                raise ValueError(f"duplicate vocabulary term: {term!r}")
            if freq < 0:
                raise ValueError(f"negative frequency for {term!r}")
            seen.add(term)
        keys = [(-freq, term) for term, freq in self.entries]
        if keys != sorted(keys):
            raise ValueError("vocabulary entries must be ordered by frequency desc, then term")

    @classmethod
    def from_counts(cls, counts: Dict[str, int], top_n: Optional[int] = None) -> "Vocabulary":
        """Rank a term -> frequency mapping"""
        ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        if top_n is not None:
            ranked = ranked[:top_n]
        return cls(tuple(ranked))

    @property
    def terms(self) -> List[str]:
        return [term for term, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, int]]:
        return iter(self.entries)


@dataclass(frozen=True)
class CandidateSet:
    """Nearest dialect terms of one lemma, sorted by (distance, term)"""
    lemma: str
    candidates: Tuple[Tuple[str, int], ...] = ()

    @property
    def terms(self) -> List[str]:
        return [term for term, _ in self.candidates]


def extract_vocab(corpus: Iterable[str], top_n: Optional[int] = None, lowercase: bool = True) -> Vocabulary:
    """Count NFC-normalized (by default lowercased) tokens into a ranked vocabulary"""
    counts: Counter = Counter()
    for token in corpus:
        token = token.strip()
        if not token:
            continue
        try:
            counts[normalize_term(token, lowercase)] += 1
        except ValueError:
            logger.debug("skipping token %r", token)
    return Vocabulary.from_counts(counts, top_n)


def read_tokens(path: Union[str, Path]) -> Iterator[str]:
    """Whitespace-separated tokens of a pre-segmented corpus file"""
    for _, line in iter_lines(path):
        yield from line.split()


def read_vocab(path: Union[str, Path], lowercase: bool = True) -> Vocabulary:
    """Read a `term<TAB>frequency` file"""
    counts: Dict[str, int] = {}
    for line_no, fields in iter_tsv(path):
        if len(fields) != 2:
            raise RecordFormatError(f"expected 2 tab-separated fields, got {len(fields)}", path, line_no)
        raw_term, raw_freq = fields
        try:
            term = normalize_term(raw_term, lowercase)
            freq = int(raw_freq)
        except ValueError as exc:
            raise RecordFormatError(str(exc), path, line_no) from None
        if freq < 0:
            raise RecordFormatError(f"negative frequency {freq}", path, line_no)
        if term in counts:
            raise RecordFormatError(f"duplicate term {term!r}", path, line_no)
        counts[term] = freq
    vocab = Vocabulary.from_counts(counts)
    logger.info("read %d vocabulary terms from %s", len(vocab), path)
    return vocab


def write_vocab(vocab: Vocabulary, path: Union[str, Path], provenance: Optional[str] = None) -> Path:
    """Write a vocabulary as `term<TAB>frequency` lines"""
    body = "".join(f"{term}\t{freq}\n" for term, freq in vocab)
    return atomic_write_text(path, with_header(body, provenance))


class CandidateIndex:
    """Length-bucketed view of a dialect vocabulary for exact k-NN search"""

    def __init__(self, vocab: Vocabulary):
        buckets: Dict[int, List[str]] = {}
        for term, _ in vocab:
            buckets.setdefault(len(term), []).append(term)
        self.buckets = {length: sorted(terms) for length, terms in buckets.items()}
        self.size = len(vocab)

    def nearest(self, lemma: str, k: int) -> CandidateSet:
        """The k terms closest to lemma, ties broken lexicographically"""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        best: List[Tuple[int, str]] = []
        # Visit buckets by length difference; |len(x) - len(y)| bounds the distance from below
        lengths = sorted(self.buckets, key=lambda length: (abs(length - len(lemma)), length))
        for length in lengths:
            if len(best) == k and abs(length - len(lemma)) > best[-1][0]:
                break
            for term in self.buckets[length]:
                if len(best) < k:
                    insort(best, (Levenshtein.distance(lemma, term), term))
                    continue
                cutoff = best[-1][0]
                distance = Levenshtein.distance(lemma, term, score_cutoff=cutoff)
                if distance > cutoff or (distance, term) >= best[-1]:
                    continue
                insort(best, (distance, term))
                best.pop()
        return CandidateSet(lemma, tuple((term, distance) for distance, term in best))


def nearest_neighbors(lemma: str, vocab: Vocabulary, k: int) -> CandidateSet:
    """The k vocabulary terms with the smallest Levenshtein distance to lemma"""
    return CandidateIndex(vocab).nearest(lemma, k)


def _nearest_chunk(index: CandidateIndex, k: int, lemmas: Sequence[str]) -> List[CandidateSet]:
    return [index.nearest(lemma, k) for lemma in lemmas]


def _chunks(items: Sequence[str], count: int) -> List[Sequence[str]]:
    size = max(1, -(-len(items) // count))
    return [items[i:i + size] for i in range(0, len(items), size)]


def generate_candidates(lemmas: Vocabulary, dialect_vocab: Vocabulary, k: int,
                        jobs: int = 1) -> Iterator[CandidateSet]:
    """One CandidateSet per lemma, in lemma order"""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    index = CandidateIndex(dialect_vocab)
    terms = lemmas.terms
    chunks = _chunks(terms, max(1, jobs * 4))
    logger.info("searching %d nearest neighbors for %d lemmas over %d dialect terms",
                k, len(terms), index.size)
    for chunk_result in ordered_map(partial(_nearest_chunk, index, k), chunks, jobs):
        yield from chunk_result


def write_candidates(sets: Iterable[CandidateSet], path: Union[str, Path],
                     provenance: Optional[str] = None) -> Path:
    """Write a `lemma<TAB>candidate<TAB>distance` dump"""
    lines = []
    for candidate_set in sets:
        for term, distance in candidate_set.candidates:
            lines.append(f"{candidate_set.lemma}\t{term}\t{distance}\n")
    return atomic_write_text(path, with_header("".join(lines), provenance))
