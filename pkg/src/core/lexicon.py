"""
Dialect variation dictionaries
End-to-end induction (lemma vocabulary -> nearest-neighbor candidates -> classifier),
dictionary statistics and TSV persistence
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .candidates import CandidateSet, Vocabulary, generate_candidates
from .classifier import Forest, check_feature_order, predict_proba_batch
from .dialex_config import DIALECT_IDS, FeatureConfig
from .errors import RecordFormatError
from .file_io import atomic_write_text, iter_tsv, with_header
from .parallel import ordered_map
from .stringsim import FeatureExtractor, normalize_term

logger = logging.getLogger(__name__)


@dataclass
class Dictionary:
    """German lemma -> sorted unique dialect variants"""
    entries: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    dialect_id: str = "other"

    def __post_init__(self):
        if self.dialect_id not in DIALECT_IDS:
            raise ValueError(f"unknown dialect id {self.dialect_id!r}")
        canonical = {}
        for lemma in sorted(self.entries):
            variants = tuple(sorted(set(self.entries[lemma])))
            if not variants:
                raise ValueError(f"lemma {lemma!r} has no variants")
            canonical[lemma] = variants
        self.entries = canonical

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, str]], dialect_id: str = "other") -> "Dictionary":
        """Build a dictionary from (lemma, variant) pairs"""
        grouped: Dict[str, set] = {}
        for lemma, variant in pairs:
            grouped.setdefault(lemma, set()).add(variant)
        return cls({lemma: tuple(variants) for lemma, variants in grouped.items()}, dialect_id)

    def variants(self, lemma: str) -> Tuple[str, ...]:
        """Variants of a lemma, empty if the lemma is absent"""
        return self.entries.get(lemma, ())

    def pairs(self) -> Iterator[Tuple[str, str]]:
        """All (lemma, variant) pairs in canonical order"""
        for lemma, variants in self.entries.items():
            for variant in variants:
                yield lemma, variant

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, lemma: str) -> bool:
        return lemma in self.entries


@dataclass(frozen=True)
class DictStats:
    """Lemma and variant counts of a dictionary"""
    lemma_count: int
    variant_count: int
    variants_per_lemma: float


def _score_chunk(forest: Forest, threshold: float, lowercase: bool,
                 chunk: Sequence[CandidateSet]) -> List[Tuple[str, str]]:
    """Accepted (lemma, variant) pairs of a chunk of candidate sets"""
    pairs = [(cs.lemma, term) for cs in chunk for term in cs.terms]
    if not pairs:
        return []
    extractor = FeatureExtractor(FeatureConfig(lowercase=lowercase))
    probabilities = predict_proba_batch(forest, extractor.matrix(pairs))
    return [pair for pair, p in zip(pairs, probabilities) if p >= threshold]


def induce_dictionary(lemmas: Vocabulary, dialect_vocab: Vocabulary, forest: Forest, k: int = 10,
                      threshold: float = 0.5, dialect_id: str = "other", lowercase: bool = True,
                      jobs: int = 1) -> Dictionary:
    """Score every lemma's k nearest dialect terms and keep the pairs classified positive"""
    check_feature_order(forest)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    candidate_sets = list(generate_candidates(lemmas, dialect_vocab, k, jobs))
    size = max(1, -(-len(candidate_sets) // max(1, jobs * 4)))
    chunks = [candidate_sets[i:i + size] for i in range(0, len(candidate_sets), size)]
    accepted: List[Tuple[str, str]] = []
    for chunk_pairs in ordered_map(partial(_score_chunk, forest, threshold, lowercase), chunks, jobs):
        accepted.extend(chunk_pairs)
    dictionary = Dictionary.from_pairs(accepted, dialect_id)
    logger.info("induced %d lemmas with %d variants from %d candidate pairs",
                len(dictionary), len(accepted), sum(len(cs.candidates) for cs in candidate_sets))
    return dictionary


def dictionary_stats(dictionary: Dictionary) -> DictStats:
    """Lemma count, variant count and variants per lemma"""
    lemma_count = len(dictionary.entries)
    variant_count = sum(len(v) for v in dictionary.entries.values())
    ratio = variant_count / lemma_count if lemma_count else 0.0
    return DictStats(lemma_count, variant_count, ratio)


def format_stats_report(stats: Mapping[str, DictStats],
                        published: Optional[Mapping[str, Mapping[str, float]]] = None) -> str:
    """TSV with one row per dialect: Dialect, Lemmas, Variants, V/L

    Published counts of the same dialects follow as `published:DIALECT` rows.
    """
    lines = ["Dialect\tLemmas\tVariants\tV/L"]
    for dialect, s in stats.items():
        lines.append(f"{dialect}\t{s.lemma_count}\t{s.variant_count}\t{s.variants_per_lemma:.2f}")
    for dialect in stats:
        row = (published or {}).get(dialect)
        if row:
            lines.append(f"published:{dialect}\t{row['lemmas']:g}\t{row['variants']:g}\t"
                         f"{row['variants_per_lemma']:.2f}")
    return "\n".join(lines) + "\n"


def export_tsv(dictionary: Dictionary, path: Union[str, Path], provenance: Optional[str] = None) -> Path:
    """Write `lemma<TAB>variant` lines in canonical order"""
    body = "".join(f"{lemma}\t{variant}\n" for lemma, variant in dictionary.pairs())
    return atomic_write_text(path, with_header(body, provenance))


def read_dictionary_tsv(path: Union[str, Path], dialect_id: str = "other",
                        lowercase: bool = True) -> Tuple[Dictionary, int]:
    """Parse a dictionary file; returns the dictionary and the number of duplicate lines dropped"""
    seen = set()
    duplicates = 0
    for line_no, fields in iter_tsv(path):
        if len(fields) != 2:
            raise RecordFormatError(f"expected 2 tab-separated fields, got {len(fields)}", path, line_no)
        try:
            pair = (normalize_term(fields[0], lowercase), normalize_term(fields[1], lowercase))
        except ValueError as exc:
            raise RecordFormatError(str(exc), path, line_no) from None
        if pair in seen:
            duplicates += 1
            continue
        seen.add(pair)
    return Dictionary.from_pairs(seen, dialect_id), duplicates


def import_tsv(path: Union[str, Path], dialect_id: str = "other", lowercase: bool = True) -> Dictionary:
    """Read a dictionary file, warning about duplicate pairs"""
    dictionary, duplicates = read_dictionary_tsv(path, dialect_id, lowercase)
    if duplicates:
        logger.warning("%s: dropped %d duplicate pair(s)", path, duplicates)
    return dictionary
