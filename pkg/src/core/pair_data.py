"""
Word pair data for training and evaluation
Contains the labeled pair types, the label mapping and the labeled-pair file reader
"""

import logging
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dialex_config import FEATURE_COUNT, FEATURE_CONFIG, FeatureConfig
from .errors import LabelError, RecordFormatError
from .file_io import iter_tsv
from .parallel import ordered_map
from .stringsim import FeatureExtractor, FeatureVector

logger = logging.getLogger(__name__)


class Label(IntEnum):
    """Binary pair label"""
    NEGATIVE = 0
    POSITIVE = 1


class RawLabel(Enum):
    """The three annotation classes of the DiaLemma scheme"""
    TRANSLATION = "translation"
    INFLECTED = "inflected"
    UNRELATED = "unrelated"


def label_map(raw_label: Union[str, int], inflected_positive: bool = False,
              line_no: Optional[int] = None, path: Optional[Union[str, Path]] = None) -> Label:
    """Map a binary or three-class tag to a binary label"""
    tag = str(raw_label).strip().lower()
    if tag == "1":
        return Label.POSITIVE
    if tag == "0":
        return Label.NEGATIVE
    try:
        raw = RawLabel(tag)
    except ValueError:
        raise LabelError(f"unknown label {raw_label!r}", path=path, line_no=line_no) from None
    if raw is RawLabel.TRANSLATION:
        return Label.POSITIVE
    if raw is RawLabel.INFLECTED:
        return Label.POSITIVE if inflected_positive else Label.NEGATIVE
    return Label.NEGATIVE


@dataclass(frozen=True)
class WordPair:
    """A (German lemma, dialect term) pair"""
    german: str
    dialect: str


@dataclass(frozen=True)
class LabeledPair:
    """A word pair with its feature vector and gold label"""
    german: str
    dialect: str
    features: FeatureVector
    label: Label

    @property
    def pair(self) -> WordPair:
        return WordPair(self.german, self.dialect)

    @classmethod
    def from_words(cls, german: str, dialect: str, label: Union[Label, int],
                   extractor: Optional[FeatureExtractor] = None) -> "LabeledPair":
        """Normalize both terms and compute their features"""
        extractor = extractor or FeatureExtractor()
        german = extractor.normalize(german)
        dialect = extractor.normalize(dialect)
        return cls(german, dialect, extractor.features(german, dialect), Label(int(label)))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization"""
        return {
            "german": self.german,
            "dialect": self.dialect,
            "features": list(self.features.values),
            "label": int(self.label),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LabeledPair":
        """Create a LabeledPair from dictionary"""
        return cls(
            german=data["german"],
            dialect=data["dialect"],
            features=FeatureVector(tuple(data["features"])),
            label=Label(int(data["label"])),
        )


def pairs_to_arrays(pairs: Sequence[LabeledPair]) -> Tuple[np.ndarray, np.ndarray]:
    """Feature matrix (n, 12) and label vector (n,) of a pair list"""
    if not pairs:
        return np.empty((0, FEATURE_COUNT), dtype=np.float64), np.empty(0, dtype=np.int64)
    X = np.asarray([p.features.values for p in pairs], dtype=np.float64)
    y = np.asarray([int(p.label) for p in pairs], dtype=np.int64)
    return X, y


def _featurize_row(lowercase: bool, row: Tuple[int, str, str, int]) -> Tuple[int, Optional[LabeledPair], Optional[str]]:
    line_no, german, dialect, label = row
    extractor = FeatureExtractor(FeatureConfig(lowercase=lowercase))
    try:
        return line_no, LabeledPair.from_words(german, dialect, label, extractor), None
    except ValueError as exc:
        return line_no, None, str(exc)


def read_labeled_pairs(path: Union[str, Path], config: FeatureConfig = FEATURE_CONFIG,
                       inflected_positive: bool = False, jobs: int = 1) -> List[LabeledPair]:
    """Read a `german<TAB>dialect<TAB>label` file and compute features for every row"""
    rows: List[Tuple[int, str, str, int]] = []
    errors: List[str] = []
    for line_no, fields in iter_tsv(path):
        if len(fields) != 3:
            errors.append(f"{path}:{line_no}: expected 3 tab-separated fields, got {len(fields)}")
            continue
        german, dialect, raw_label = fields
        try:
            label = label_map(raw_label, inflected_positive, line_no=line_no, path=path)
        except LabelError as exc:
            errors.append(str(exc))
            continue
        rows.append((line_no, german, dialect, int(label)))

    pairs: List[LabeledPair] = []
    for line_no, pair, problem in ordered_map(partial(_featurize_row, config.lowercase), rows, jobs):
        if problem is not None:
            errors.append(f"{path}:{line_no}: {problem}")
        else:
            pairs.append(pair)

    if errors:
        for message in errors:
            logger.error(message)
        raise RecordFormatError(f"{len(errors)} malformed row(s), first: {errors[0]}", path=path)
    logger.info("read %d labeled pairs from %s", len(pairs), path)
    return pairs


def format_feature_rows(pairs: Sequence[LabeledPair]) -> str:
    """TSV body `german, dialect, 12 feature columns, label`"""
    lines = []
    for p in pairs:
        values = "\t".join(format(v, ".10g") for v in p.features.values)
        lines.append(f"{p.german}\t{p.dialect}\t{values}\t{int(p.label)}")
    return "".join(line + "\n" for line in lines)
