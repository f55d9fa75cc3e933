"""
String similarity features for German lemma / dialect term pairs
Set-based (Dice family) and sequence-based (prefix, LCSR, n-gram alignment, edit distance) measures,
assembled into the fixed-order 12-slot feature vector
"""

import math
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Sequence, Set, Tuple

import numpy as np
from rapidfuzz.distance import LCSseq, Levenshtein, Prefix

from .dialex_config import FEATURE_CONFIG, FEATURE_COUNT, FEATURE_ORDER, SIMILARITY_SLOTS, FeatureConfig
from .phonetics import phonetic_dist

PAD = "^"
GAP = "_"


class GramKind(Enum):
    """Gram extraction used by the Dice coefficient"""
    BIGRAM = "bigram"
    TRIGRAM = "trigram"
    XTRIGRAM = "xtrigram"


def normalize_term(text: str, lowercase: bool = True) -> str:
    """NFC-normalize (and optionally lowercase) a term; rejects empty or whitespace-containing input"""
    term = unicodedata.normalize("NFC", text)
    if lowercase:
        term = unicodedata.normalize("NFC", term.lower())
    if not term:
        raise ValueError("term is empty after normalization")
    if any(ch.isspace() for ch in term):
        raise ValueError(f"term contains whitespace: {text!r}")
    return term


def ngrams(s: str, n: int) -> List[str]:
    """Ordered character n-grams of s; empty if s is shorter than n"""
    if n < 2:
        raise ValueError(f"n-gram order must be >= 2, got {n}")
    return [s[i:i + n] for i in range(len(s) - n + 1)]


def xgrams(s: str) -> List[str]:
    """Extended trigrams: every trigram with its middle character replaced by '_'"""
    return [s[i] + GAP + s[i + 2] for i in range(len(s) - 2)]


def _gram_set(s: str, grams: GramKind) -> Set[str]:
    if grams is GramKind.BIGRAM:
        return set(ngrams(s, 2))
    if grams is GramKind.TRIGRAM:
        return set(ngrams(s, 3))
    return set(xgrams(s))


def dice(x: str, y: str, grams: GramKind = GramKind.BIGRAM) -> float:
    """Dice-Sørensen coefficient over deduplicated gram sets"""
    if x == y:
        return 1.0
    gx = _gram_set(x, GramKind(grams))
    gy = _gram_set(y, GramKind(grams))
    if not gx or not gy:
        return 0.0
    return 2.0 * len(gx & gy) / (len(gx) + len(gy))


def _last_positions(grams: Sequence[str]) -> Dict[str, int]:
    positions = {}
    for i, gram in enumerate(grams):
        positions[gram] = i
    return positions


def xxdice(x: str, y: str) -> float:
    """Bigram Dice where each shared bigram is weighted by 1/(1+(pos(a)-pos(b))^2), last occurrences"""
    if x == y:
        return 1.0
    bx = ngrams(x, 2)
    by = ngrams(y, 2)
    if not bx or not by:
        return 0.0
    px = _last_positions(bx)
    py = _last_positions(by)
    shared = px.keys() & py.keys()
    if not shared:
        return 0.0
    weight = sum(1.0 / (1.0 + (px[g] - py[g]) ** 2) for g in sorted(shared))
    return 2.0 * weight / (len(bx) + len(by))


def prefix_sim(x: str, y: str) -> float:
    """Common prefix length over the longer length"""
    longest = max(len(x), len(y))
    if longest == 0:
        return 1.0
    return Prefix.similarity(x, y) / longest


def lcsr(x: str, y: str) -> float:
    """Longest common subsequence ratio"""
    longest = max(len(x), len(y))
    if longest == 0:
        return 1.0
    return LCSseq.similarity(x, y) / longest


def levenshtein(x: str, y: str) -> int:
    """Unit-cost edit distance"""
    return Levenshtein.distance(x, y)


def ned(x: str, y: str) -> float:
    """Levenshtein distance over the longer length; 0 for two empty strings"""
    return Levenshtein.normalized_distance(x, y)


def _check_order(n: int) -> None:
    if n not in (2, 3):
        raise ValueError(f"n-gram alignment order must be 2 or 3, got {n}")


def padded_tokens(s: str, n: int) -> List[str]:
    """The |s| n-gram tokens of s after left-padding with n-1 '^' symbols"""
    padded = PAD * (n - 1) + s
    return [padded[i:i + n] for i in range(len(s))]


def _identity(a: str, b: str, n: int) -> float:
    """Fraction of positions where two tokens agree"""
    return sum(1 for ca, cb in zip(a, b) if ca == cb) / n


def ngram_sim(x: str, y: str, n: int) -> float:
    """BI-SIM / TRI-SIM: best non-crossing alignment of padded n-gram tokens, over the longer length"""
    _check_order(n)
    if x == y:
        return 1.0
    tx = padded_tokens(x, n)
    ty = padded_tokens(y, n)
    longest = max(len(tx), len(ty))
    if not tx or not ty:
        return 0.0

    prev = [0.0] * (len(ty) + 1)
    for a in tx:
        row = [0.0] * (len(ty) + 1)
        for j, b in enumerate(ty, start=1):
            row[j] = max(prev[j], row[j - 1], prev[j - 1] + _identity(a, b, n))
        prev = row
    return prev[-1] / longest


def ngram_dist(x: str, y: str, n: int) -> float:
    """BI-DIST / TRI-DIST: edit distance over padded n-gram tokens with fractional substitution cost"""
    _check_order(n)
    if x == y:
        return 0.0
    tx = padded_tokens(x, n)
    ty = padded_tokens(y, n)
    longest = max(len(tx), len(ty))

    prev = [float(j) for j in range(len(ty) + 1)]
    for i, a in enumerate(tx, start=1):
        row = [float(i)] + [0.0] * len(ty)
        for j, b in enumerate(ty, start=1):
            row[j] = min(prev[j] + 1.0,
                         row[j - 1] + 1.0,
                         prev[j - 1] + (1.0 - _identity(a, b, n)))
        prev = row
    return prev[-1] / longest


@dataclass(frozen=True)
class FeatureVector:
    """The 12 feature values of one pair, in FEATURE_ORDER"""
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) != FEATURE_COUNT:
            raise ValueError(f"feature vector must have {FEATURE_COUNT} values, got {len(values)}")
        for name, value in zip(FEATURE_ORDER, values):
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise ValueError(f"feature {name} out of range: {value}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    def as_dict(self) -> Dict[str, float]:
        """Feature name -> value"""
        return dict(zip(FEATURE_ORDER, self.values))

    @classmethod
    def identity(cls) -> "FeatureVector":
        """Vector of a term compared with itself"""
        return cls((1.0,) * SIMILARITY_SLOTS + (0.0,) * (FEATURE_COUNT - SIMILARITY_SLOTS))


def feature_vector(x: str, y: str, lowercase: bool = True) -> FeatureVector:
    """Compute all 12 features for a (German lemma, dialect term) pair"""
    x = normalize_term(x, lowercase)
    y = normalize_term(y, lowercase)
    return FeatureVector((
        dice(x, y, GramKind.BIGRAM),
        dice(x, y, GramKind.TRIGRAM),
        dice(x, y, GramKind.XTRIGRAM),
        xxdice(x, y),
        prefix_sim(x, y),
        lcsr(x, y),
        ngram_sim(x, y, 2),
        ngram_sim(x, y, 3),
        ned(x, y),
        ngram_dist(x, y, 2),
        ngram_dist(x, y, 3),
        phonetic_dist(x, y),
    ))


class FeatureExtractor:
    """Applies the configured normalization and computes feature vectors and matrices"""

    def __init__(self, config: FeatureConfig = FEATURE_CONFIG):
        self.config = config

    def normalize(self, text: str) -> str:
        """Normalize a term the way features see it"""
        return normalize_term(text, self.config.lowercase)

    def features(self, german: str, dialect: str) -> FeatureVector:
        """Feature vector of one pair"""
        return feature_vector(german, dialect, self.config.lowercase)

    def matrix(self, pairs: Iterable[Tuple[str, str]]) -> np.ndarray:
        """Float matrix of shape (n, 12) for a sequence of pairs"""
        rows = [self.features(german, dialect).values for german, dialect in pairs]
        if not rows:
            return np.empty((0, FEATURE_COUNT), dtype=np.float64)
        return np.asarray(rows, dtype=np.float64)


def feature_matrix(pairs: Iterable[Tuple[str, str]], lowercase: bool = True) -> np.ndarray:
    """Float matrix of shape (n, 12) for a sequence of pairs"""
    return FeatureExtractor(FeatureConfig(lowercase=lowercase)).matrix(pairs)
