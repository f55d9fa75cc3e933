"""
Published comparison numbers
Loads the reference tables shipped as JSON in the published_results directory
"""

import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

RESULT_FILES = ("dictionary_stats", "bli_comparison", "cross_dialect", "training_size", "query_expansion")


@dataclass(frozen=True)
class PublishedMetrics:
    """Precision, recall and F1 of one published row"""
    name: str
    precision: float
    recall: float
    f1: float


def _results_dir() -> str:
    """Locate the JSON directory next to this module, or inside a frozen bundle"""
    if getattr(sys, "frozen", False):
        base_path = getattr(sys, "_MEIPASS", os.path.dirname(sys.executable))
        candidate = os.path.join(base_path, "src", "core", "published_results")
        if os.path.isdir(candidate):
            return candidate
    return os.path.join(os.path.dirname(__file__), "published_results")


class PublishedResults:
    """Reference numbers used as context rows in reports and as anchors in checks"""

    def __init__(self, results_dir: Optional[str] = None):
        self.results_dir = results_dir or _results_dir()
        self.tables: Dict[str, Dict[str, Any]] = {}
        self._load_tables()

    def _load_tables(self):
        """Load every known table; a missing or broken file leaves that table empty"""
        for name in RESULT_FILES:
            filepath = os.path.join(self.results_dir, f"{name}.json")
            try:
                with open(filepath, "r", encoding="utf-8") as f:
                    self.tables[name] = json.load(f)
            except (OSError, json.JSONDecodeError) as exc:
                logger.warning("published table %s unavailable: %s", name, exc)
                self.tables[name] = {}

    def bli_comparison(self) -> List[PublishedMetrics]:
        """Rows of the Bavarian classifier comparison"""
        rows = self.tables["bli_comparison"].get("rows", {})
        return [PublishedMetrics(name, r["precision"], r["recall"], r["f1"]) for name, r in rows.items()]

    def cross_dialect(self, metric: str = "f1") -> Dict[Tuple[str, str], float]:
        """(train source, test target) -> published value"""
        table = self.tables["cross_dialect"]
        targets = table.get("targets", [])
        cells = {}
        for source, values in table.get(metric, {}).items():
            for target, value in zip(targets, values):
                cells[(source, target)] = value
        return cells

    def dictionary_stats(self) -> Dict[str, Dict[str, float]]:
        return dict(self.tables["dictionary_stats"].get("rows", {}))

    def training_size_anchors(self) -> Dict[float, float]:
        """Training fraction -> mean F1"""
        anchors = self.tables["training_size"].get("anchors", {})
        return {float(fraction): f1 for fraction, f1 in anchors.items()}

    def query_expansion(self) -> Dict[str, Dict[str, float]]:
        return dict(self.tables["query_expansion"].get("rows", {}))

