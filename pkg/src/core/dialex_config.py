"""
Configuration for dialect lexicon induction and evaluation
All configurable values are centralized here; defaults mirror the published settings
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError

# Frozen feature order; serialized forests record it and are checked against it.
FEATURE_ORDER: Tuple[str, ...] = (
    "DICE2", "DICE3", "XDICE", "XXDICE", "PREFIX", "LCSR",
    "BISIM", "TRISIM", "NED", "BIDIST", "TRIDIST", "PHONDIST",
)
FEATURE_COUNT = len(FEATURE_ORDER)
SIMILARITY_SLOTS = 8

DIALECT_IDS: Tuple[str, ...] = ("als", "bar", "ksh", "pfl", "nds", "other")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass
class FeatureConfig:
    """Normalization applied before feature computation"""
    # Lowercasing is unstated in the source experiments, so it is switchable
    lowercase: bool = True

    def __post_init__(self):
        _require(isinstance(self.lowercase, bool), "features.lowercase must be a boolean")


@dataclass
class CandidateConfig:
    """Candidate pre-filtering"""
    k: int = 10
    # Vocabulary cap for the `vocab` subcommand (100K most frequent lemmas)
    top_n: Optional[int] = 100_000

    def __post_init__(self):
        _require(_is_int(self.k) and self.k >= 1, "candidates.k must be an integer >= 1")
        _require(self.top_n is None or (_is_int(self.top_n) and self.top_n >= 1),
                 "candidates.top_n must be null or an integer >= 1")


@dataclass
class ForestParams:
    """Random forest hyperparameters, pinned to the referenced library's defaults"""
    n_trees: int = 100
    criterion: str = "gini"
    max_features: int = 3  # floor(sqrt(12))
    bootstrap: bool = True
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    seed: int = 0
    class_weight: Optional[str] = None  # None or "balanced"

    def __post_init__(self):
        _require(_is_int(self.n_trees) and self.n_trees >= 1, "forest.n_trees must be >= 1")
        _require(self.criterion == "gini", "forest.criterion only supports 'gini'")
        _require(_is_int(self.max_features) and 1 <= self.max_features <= FEATURE_COUNT,
                 f"forest.max_features must be in [1, {FEATURE_COUNT}]")
        _require(isinstance(self.bootstrap, bool), "forest.bootstrap must be a boolean")
        _require(_is_int(self.min_samples_split) and self.min_samples_split >= 2,
                 "forest.min_samples_split must be >= 2")
        _require(self.max_depth is None or (_is_int(self.max_depth) and self.max_depth >= 1),
                 "forest.max_depth must be null or >= 1")
        _require(_is_int(self.seed) and 0 <= self.seed < 2 ** 64, "forest.seed must be a 64-bit unsigned integer")
        _require(self.class_weight in (None, "balanced"), "forest.class_weight must be null or 'balanced'")


@dataclass
class EvaluationConfig:
    """Intrinsic evaluation protocol (80/20 splits, three seeds)"""
    train_fraction: float = 0.8
    seeds: Tuple[int, ...] = (1, 2, 3)
    threshold: float = 0.5
    stratify: bool = False

    def __post_init__(self):
        self.seeds = tuple(self.seeds)
        _require(isinstance(self.train_fraction, (int, float)) and 0 < self.train_fraction < 1,
                 "evaluation.train_fraction must be in (0, 1)")
        _require(len(self.seeds) >= 1 and all(_is_int(s) and s >= 0 for s in self.seeds),
                 "evaluation.seeds must be a non-empty list of non-negative integers")
        _require(isinstance(self.threshold, (int, float)) and 0 < self.threshold < 1,
                 "evaluation.threshold must be in (0, 1)")
        _require(isinstance(self.stratify, bool), "evaluation.stratify must be a boolean")


@dataclass
class AblationConfig:
    """Training-size ablation (fixed 20% test split, 40 seeds)"""
    fractions: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    seeds: Tuple[int, ...] = tuple(range(1, 41))
    test_fraction: float = 0.2
    split_seed: int = 0
    # Same seed's smaller subsample is a prefix of its larger one
    nested: bool = False

    def __post_init__(self):
        self.fractions = tuple(self.fractions)
        self.seeds = tuple(self.seeds)
        _require(len(self.fractions) >= 1, "ablation.fractions must not be empty")
        _require(all(isinstance(f, (int, float)) and 0 < f <= 1 for f in self.fractions),
                 "ablation.fractions must lie in (0, 1]")
        _require(len(self.seeds) >= 1 and all(_is_int(s) and s >= 0 for s in self.seeds),
                 "ablation.seeds must be a non-empty list of non-negative integers")
        _require(isinstance(self.test_fraction, (int, float)) and 0 < self.test_fraction < 1,
                 "ablation.test_fraction must be in (0, 1)")
        _require(_is_int(self.split_seed) and self.split_seed >= 0, "ablation.split_seed must be >= 0")
        _require(isinstance(self.nested, bool), "ablation.nested must be a boolean")


@dataclass
class Bm25Params:
    """BM25 parameters (Lucene-style defaults of the retrieval toolkit)"""
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        _require(isinstance(self.k1, (int, float)) and self.k1 > 0, "bm25.k1 must be > 0")
        _require(isinstance(self.b, (int, float)) and 0 <= self.b <= 1, "bm25.b must be in [0, 1]")


@dataclass
class LexiconConfig:
    """Dictionary induction settings"""
    dialect_id: str = "other"
    threshold: float = 0.5
    # Map the DiaLemma 'inflected' class to positive
    inflected_positive: bool = False

    def __post_init__(self):
        _require(self.dialect_id in DIALECT_IDS, f"lexicon.dialect_id must be one of {', '.join(DIALECT_IDS)}")
        _require(isinstance(self.threshold, (int, float)) and 0 < self.threshold < 1,
                 "lexicon.threshold must be in (0, 1)")
        _require(isinstance(self.inflected_positive, bool), "lexicon.inflected_positive must be a boolean")


@dataclass
class RetrievalConfig:
    """Retrieval evaluation settings"""
    ndcg_k: int = 10
    recall_k: int = 100
    depth: int = 1000
    run_tag: str = "dialex"

    def __post_init__(self):
        for name in ("ndcg_k", "recall_k", "depth"):
            value = getattr(self, name)
            _require(_is_int(value) and value >= 1, f"retrieval.{name} must be an integer >= 1")
        _require(isinstance(self.run_tag, str) and self.run_tag != "" and not any(c.isspace() for c in self.run_tag),
                 "retrieval.run_tag must be a non-empty string without whitespace")


@dataclass
class RunConfig:
    """Effective configuration of one command invocation"""
    features: FeatureConfig = field(default_factory=FeatureConfig)
    candidates: CandidateConfig = field(default_factory=CandidateConfig)
    forest: ForestParams = field(default_factory=ForestParams)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    lexicon: LexiconConfig = field(default_factory=LexiconConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    jobs: int = 1

    def __post_init__(self):
        _require(_is_int(self.jobs) and self.jobs >= 1, "jobs must be an integer >= 1")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a plain dictionary (jobs excluded, it never changes outputs)"""
        data = asdict(self)
        data.pop("jobs")
        return data

    def provenance(self) -> str:
        """Canonical one-line JSON used as the header comment of outputs"""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig) if f.name != "jobs"}


def _merge_section(name: str, section: Any, updates: Dict[str, Any], origin: str) -> Any:
    """Return a copy of a config section with updates applied and validated"""
    if not isinstance(updates, dict):
        raise ConfigError(f"{origin}: section '{name}' must be an object")
    known = {f.name for f in fields(section)}
    unknown = sorted(set(updates) - known)
    if unknown:
        raise ConfigError(f"{origin}: unknown key(s) in section '{name}': {', '.join(unknown)}")
    try:
        return replace(section, **updates)
    except TypeError as exc:
        raise ConfigError(f"{origin}: invalid value in section '{name}': {exc}") from exc


def load_run_config(config_path: Optional[Path] = None,
                    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
                    jobs: int = 1) -> RunConfig:
    """Build the effective config: defaults, then config file, then command-line overrides"""
    sections = {name: factory() for name, factory in _SECTIONS.items()}

    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                file_data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(file_data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = sorted(set(file_data) - set(sections))
        if unknown:
            raise ConfigError(f"{path}: unknown section(s): {', '.join(unknown)}")
        for name, updates in file_data.items():
            sections[name] = _merge_section(name, sections[name], updates, str(path))

    for name, updates in (overrides or {}).items():
        if name not in sections:
            raise ConfigError(f"unknown config section: {name}")
        given = {key: value for key, value in updates.items() if value is not None}
        if given:
            sections[name] = _merge_section(name, sections[name], given, "command line")

    return RunConfig(jobs=jobs, **sections)


# Global default instances
FEATURE_CONFIG = FeatureConfig()
CANDIDATE_CONFIG = CandidateConfig()
FOREST_PARAMS = ForestParams()
EVALUATION_CONFIG = EvaluationConfig()
ABLATION_CONFIG = AblationConfig()
BM25_PARAMS = Bm25Params()
LEXICON_CONFIG = LexiconConfig()
RETRIEVAL_CONFIG = RetrievalConfig()
