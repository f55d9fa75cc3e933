"""
Tests for configuration loading, validation and worker-count resolution
"""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from src.core.dialex_config import (FEATURE_ORDER, AblationConfig, EvaluationConfig, ForestParams, RunConfig,
                                    load_run_config)
from src.core.errors import ConfigError
from src.core.parallel import JOBS_ENV_VAR, ordered_map, resolve_jobs


def write_config(tmp_path, data) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def square(x: int) -> int:
    return x * x


def test_defaults():
    config = load_run_config()
    assert config.forest == ForestParams()
    assert config.forest.n_trees == 100
    assert config.forest.max_features == 3
    assert config.candidates.k == 10
    assert config.evaluation.seeds == (1, 2, 3)
    assert config.ablation.seeds == tuple(range(1, 41))
    assert (config.bm25.k1, config.bm25.b) == (0.9, 0.4)
    assert (config.retrieval.ndcg_k, config.retrieval.recall_k) == (10, 100)
    assert len(FEATURE_ORDER) == 12


def test_file_then_command_line_precedence(tmp_path):
    path = write_config(tmp_path, {"forest": {"n_trees": 50, "seed": 7}, "candidates": {"k": 20}})
    config = load_run_config(path, {"forest": {"n_trees": 25, "seed": None}})
    assert config.forest.n_trees == 25
    assert config.forest.seed == 7
    assert config.candidates.k == 20


def test_json_lists_become_tuples(tmp_path):
    path = write_config(tmp_path, {"evaluation": {"seeds": [4, 5]}, "ablation": {"fractions": [0.5, 1.0]}})
    config = load_run_config(path)
    assert config.evaluation.seeds == (4, 5)
    assert config.ablation.fractions == (0.5, 1.0)


def test_unknown_keys_and_sections_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        load_run_config(write_config(tmp_path, {"forest": {"trees": 10}}))
    with pytest.raises(ConfigError, match="unknown section"):
        load_run_config(write_config(tmp_path, {"network": {}}))
    with pytest.raises(ConfigError):
        load_run_config(None, {"network": {"x": 1}})


def test_invalid_values_rejected(tmp_path):
    for data in ({"forest": {"n_trees": 0}}, {"bm25": {"b": 1.5}}, {"lexicon": {"dialect_id": "xyz"}},
                 {"evaluation": {"train_fraction": 1.0}}, {"retrieval": {"run_tag": "two words"}}):
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path, data))
    with pytest.raises(ConfigError):
        EvaluationConfig(seeds=())
    with pytest.raises(ConfigError):
        AblationConfig(fractions=(0.0,))


def test_missing_or_broken_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(str(tmp_path / "absent.json"))
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(str(path))


def test_provenance_excludes_jobs():
    single = RunConfig(jobs=1)
    many = RunConfig(jobs=8)
    assert single.provenance() == many.provenance()
    assert "jobs" not in json.loads(single.provenance())
    assert json.loads(single.provenance())["forest"]["n_trees"] == 100
    assert "\n" not in single.provenance()


def test_resolve_jobs(monkeypatch):
    monkeypatch.delenv(JOBS_ENV_VAR, raising=False)
    assert resolve_jobs() == 1
    assert resolve_jobs(3) == 3
    monkeypatch.setenv(JOBS_ENV_VAR, "4")
    assert resolve_jobs() == 4
    assert resolve_jobs(2) == 2
    monkeypatch.setenv(JOBS_ENV_VAR, "many")
    with pytest.raises(ConfigError):
        resolve_jobs()
    with pytest.raises(ConfigError):
        resolve_jobs(0)


def test_ordered_map_keeps_input_order():
    items = list(range(25))
    assert ordered_map(square, items, jobs=1) == [x * x for x in items]
    assert ordered_map(square, items, jobs=3) == [x * x for x in items]
    assert ordered_map(square, [], jobs=3) == []
