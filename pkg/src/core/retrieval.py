"""
Lexical retrieval with dictionary-based query expansion
BM25 over an inverted index, trec-style runs and judgments, nDCG@k and Recall@k,
and the base-versus-expanded retrieval experiment
"""

import io
import json
import logging
import math
import re
import unicodedata
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import ir_measures
import numpy as np
from ir_measures import R, nDCG

from .dialex_config import BM25_PARAMS, DIALECT_IDS, Bm25Params
from .errors import ConfigError, DataError, IdMismatchError, RecordFormatError
from .file_io import atomic_write_dir, atomic_write_text, iter_lines, require_file
from .lexicon import Dictionary, import_tsv
from .parallel import ordered_map

logger = logging.getLogger(__name__)

INDEX_SCHEMA = "dialex-index"
INDEX_VERSION = 1
_TOKEN = re.compile(r"[^\W_]+")

Run = Dict[str, List[Tuple[str, float]]]


def tokenize(text: str) -> List[str]:
    """Lowercased NFC tokens split on every non-letter, non-digit character"""
    return _TOKEN.findall(unicodedata.normalize("NFC", text).lower())


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass
class Index:
    """Inverted index with the length statistics BM25 needs"""
    postings: Dict[str, Dict[str, int]] = field(default_factory=dict)
    doc_lengths: Dict[str, int] = field(default_factory=dict)
    doc_count: int = field(init=False)
    avg_doc_length: float = field(init=False)

    def __post_init__(self):
        self.doc_count = len(self.doc_lengths)
        self.avg_doc_length = sum(self.doc_lengths.values()) / self.doc_count if self.doc_count else 0.0

    def df(self, term: str) -> int:
        return len(self.postings.get(term, {}))

    def tf(self, term: str, doc_id: str) -> int:
        return self.postings.get(term, {}).get(doc_id, 0)


def build_index(docs: Iterable[Document]) -> Index:
    """Single pass over the collection; postings and lengths follow tokenize"""
    unsorted: Dict[str, Dict[str, int]] = {}
    lengths: Dict[str, int] = {}
    for doc in docs:
        if doc.id in lengths:
            raise DataError(f"duplicate document id {doc.id!r}")
        tokens = tokenize(doc.text)
        lengths[doc.id] = len(tokens)
        for token in tokens:
            entry = unsorted.setdefault(token, {})
            entry[doc.id] = entry.get(doc.id, 0) + 1
    postings = {term: dict(sorted(entry.items())) for term, entry in sorted(unsorted.items())}
    index = Index(postings, dict(sorted(lengths.items())))
    logger.info("indexed %d documents, %d terms", index.doc_count, len(index.postings))
    return index


def idf(index: Index, term: str) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5))"""
    df = index.df(term)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def _term_weight(index: Index, term: str, tf: int, doc_length: int, params: Bm25Params) -> float:
    norm = params.k1 * (1.0 - params.b + params.b * doc_length / index.avg_doc_length)
    return idf(index, term) * tf * (params.k1 + 1.0) / (tf + norm)


def bm25_score(index: Index, query_tokens: Sequence[str], doc_id: str,
               params: Bm25Params = BM25_PARAMS) -> float:
    """BM25 score of one document; repeated query tokens count once per occurrence"""
    if doc_id not in index.doc_lengths:
        raise ValueError(f"unknown document id {doc_id!r}")
    score = 0.0
    for term in query_tokens:
        tf = index.tf(term, doc_id)
        if tf:
            score += _term_weight(index, term, tf, index.doc_lengths[doc_id], params)
    return score


def search(index: Index, query: str, k: int, params: Bm25Params = BM25_PARAMS) -> List[Tuple[str, float]]:
    """Top-k documents by score, ties broken by id; zero-score documents are left out"""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: Dict[str, float] = {}
    # Term-at-a-time in query order, so every document sums its terms as bm25_score does
    for term in tokenize(query):
        for doc_id, tf in index.postings.get(term, {}).items():
            scores[doc_id] = scores.get(doc_id, 0.0) + _term_weight(
                index, term, tf, index.doc_lengths[doc_id], params)
    ranked = sorted(((doc_id, s) for doc_id, s in scores.items() if s > 0.0), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def expand_query(query: str, dictionary: Dictionary) -> Tuple[str, bool]:
    """Append the dictionary variants of every query token after the original text"""
    tokens = tokenize(query)
    existing = set(tokens)
    appended: List[str] = []
    for token in tokens:
        for variant in dictionary.variants(token):
            if variant in existing or variant in appended:
                continue
            appended.append(variant)
    if not appended:
        return query, False
    return f"{query} {' '.join(appended)}", True


def search_queries(index: Index, queries: Mapping[str, str], k: int, dictionary: Optional[Dictionary] = None,
                   params: Bm25Params = BM25_PARAMS) -> Tuple[Run, int]:
    """Run every query, expanding it first when a dictionary is given; returns the run and n_aug"""
    run: Run = {}
    n_aug = 0
    for qid, text in queries.items():
        if dictionary is not None:
            text, augmented = expand_query(text, dictionary)
            n_aug += augmented
        run[qid] = search(index, text, k, params)
    if dictionary is not None:
        logger.info("expanded %d of %d queries", n_aug, len(queries))
    return run, n_aug


# ---------------------------------------------------------------------------
# Persistence and readers

def save_index(index: Index, path: Union[str, Path]) -> Path:
    """Write the index as a directory of JSON files"""
    meta = {"schema": INDEX_SCHEMA, "version": INDEX_VERSION, "doc_count": index.doc_count}
    return atomic_write_dir(path, {
        "meta.json": json.dumps(meta, sort_keys=True) + "\n",
        "doc_lengths.json": json.dumps(index.doc_lengths, ensure_ascii=False, sort_keys=True) + "\n",
        "postings.json": json.dumps(index.postings, ensure_ascii=False, sort_keys=True) + "\n",
    })


def load_index(path: Union[str, Path]) -> Index:
    """Read an index directory written by save_index"""
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"index directory not found: {path}")
    docs = {}
    for name in ("meta.json", "doc_lengths.json", "postings.json"):
        filepath = require_file(path / name)
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                docs[name] = json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc}", filepath) from None
    meta = docs["meta.json"]
    if meta.get("schema") != INDEX_SCHEMA or meta.get("version") != INDEX_VERSION:
        raise DataError(f"not a {INDEX_SCHEMA} v{INDEX_VERSION} directory", path)
    index = Index(docs["postings.json"], docs["doc_lengths.json"])
    if index.doc_count != meta.get("doc_count"):
        raise DataError("document count does not match the metadata", path)
    for term, entry in index.postings.items():
        unknown = [doc_id for doc_id in entry if doc_id not in index.doc_lengths]
        if unknown:
            raise DataError(f"postings of {term!r} reference unknown document {unknown[0]!r}", path)
    return index


def read_documents(path: Union[str, Path]) -> Iterator[Document]:
    """JSON-lines collection with `id` and `contents` fields"""
    for line_no, line in iter_lines(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"invalid JSON: {exc.msg}", path, line_no) from None
        if not isinstance(record, dict) or not isinstance(record.get("id"), str) \
                or not isinstance(record.get("contents"), str):
            raise RecordFormatError("expected an object with string fields 'id' and 'contents'", path, line_no)
        yield Document(record["id"], record["contents"])


def read_queries(path: Union[str, Path]) -> Dict[str, str]:
    """`qid<TAB>text` lines, in file order"""
    queries: Dict[str, str] = {}
    for line_no, line in iter_lines(path):
        qid, sep, text = line.partition("\t")
        if not sep or not qid:
            raise RecordFormatError("expected `qid<TAB>text`", path, line_no)
        if qid in queries:
            raise RecordFormatError(f"duplicate query id {qid!r}", path, line_no)
        queries[qid] = text
    return queries


@dataclass
class Qrels:
    """Relevance grade of every judged (query, document) pair"""
    judgments: Dict[Tuple[str, str], int] = field(default_factory=dict)

    def query_ids(self) -> List[str]:
        return sorted({qid for qid, _ in self.judgments})

    def grades(self, qid: str) -> Dict[str, int]:
        """Positive grades of one query"""
        return {doc_id: rel for (q, doc_id), rel in self.judgments.items() if q == qid and rel > 0}

    def by_query(self) -> Dict[str, Dict[str, int]]:
        grouped: Dict[str, Dict[str, int]] = {}
        for (qid, doc_id), rel in self.judgments.items():
            grouped.setdefault(qid, {})
            if rel > 0:
                grouped[qid][doc_id] = rel
        return grouped

    def to_trec_dict(self) -> Dict[str, Dict[str, int]]:
        """Every grade, zeros included, nested as {qid: {docid: rel}}"""
        nested: Dict[str, Dict[str, int]] = {}
        for (qid, doc_id), rel in self.judgments.items():
            nested.setdefault(qid, {})[doc_id] = rel
        return nested


def _parse_trec_line(reader: Callable[[io.StringIO], Iterator[Any]], line: str, layout: str,
                     path: Union[str, Path], line_no: int) -> Any:
    """Parse one record with an ir_measures reader, reporting the line on failure"""
    try:
        return next(iter(reader(io.StringIO(line + "\n"))))
    except (ValueError, TypeError, StopIteration):
        raise RecordFormatError(f"expected `{layout}`", path, line_no) from None


def read_qrels(path: Union[str, Path]) -> Qrels:
    """Whitespace-separated `qid 0 docid rel` lines"""
    judgments: Dict[Tuple[str, str], int] = {}
    for line_no, line in iter_lines(path):
        qrel = _parse_trec_line(ir_measures.read_trec_qrels, line, "qid 0 docid relevance", path, line_no)
        if qrel.relevance < 0:
            raise RecordFormatError(f"negative relevance {qrel.relevance}", path, line_no)
        if (qrel.query_id, qrel.doc_id) in judgments:
            raise RecordFormatError(f"duplicate judgment for ({qrel.query_id}, {qrel.doc_id})", path, line_no)
        judgments[(qrel.query_id, qrel.doc_id)] = int(qrel.relevance)
    return Qrels(judgments)


def format_run(run: Run, tag: str = "dialex") -> str:
    lines = []
    for qid, ranking in run.items():
        for rank, (doc_id, score) in enumerate(ranking, start=1):
            lines.append(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}\n")
    return "".join(lines)


def write_run(run: Run, path: Union[str, Path], tag: str = "dialex") -> Path:
    """Trec run file `qid Q0 docid rank score tag`"""
    return atomic_write_text(path, format_run(run, tag))


def read_run(path: Union[str, Path]) -> Run:
    """Parse a trec run file; rankings follow descending score, ties in file order"""
    rows: Dict[str, List[Tuple[str, float]]] = {}
    for line_no, line in iter_lines(path):
        scored = _parse_trec_line(ir_measures.read_trec_run, line, "qid Q0 docid rank score tag", path, line_no)
        rows.setdefault(scored.query_id, []).append((scored.doc_id, float(scored.score)))
    return {qid: sorted(ranking, key=lambda item: -item[1]) for qid, ranking in rows.items()}


# ---------------------------------------------------------------------------
# Metrics

def _doc_ids(ranking: Sequence) -> List[str]:
    return [item[0] if isinstance(item, tuple) else item for item in ranking]


def _rank_scores(ranking: Sequence) -> Dict[str, float]:
    """Scores that reproduce the list order exactly, so evaluation never re-breaks ties"""
    doc_ids = _doc_ids(ranking)
    scores: Dict[str, float] = {}
    for i, doc_id in enumerate(doc_ids):
        scores.setdefault(doc_id, float(len(doc_ids) - i))
    return scores


def _measure(run: Mapping[str, Sequence], qrels: Qrels, measures: Sequence[Any]) -> Dict[str, Dict[str, float]]:
    """ir_measures values per query and measure name; unranked or unjudged queries are absent"""
    judged = qrels.to_trec_dict()
    scored = {qid: _rank_scores(ranking) for qid, ranking in run.items() if ranking and qid in judged}
    values: Dict[str, Dict[str, float]] = {}
    if not scored:
        return values
    for metric in ir_measures.iter_calc(list(measures), {qid: judged[qid] for qid in scored}, scored):
        values.setdefault(metric.query_id, {})[str(metric.measure)] = float(metric.value)
    return values


def _check_cutoff(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def ndcg_at_k(ranking: Sequence, qrels: Qrels, qid: str, k: int = 10) -> float:
    """DCG of the top k normalized by the ideal DCG; 0 without relevant documents"""
    _check_cutoff(k)
    measure = nDCG @ k
    return _measure({qid: ranking}, qrels, [measure]).get(qid, {}).get(str(measure), 0.0)


def recall_at_k(ranking: Sequence, qrels: Qrels, qid: str, k: int = 100) -> float:
    """Share of the relevant documents found in the top k; 0 without relevant documents"""
    _check_cutoff(k)
    measure = R @ k
    return _measure({qid: ranking}, qrels, [measure]).get(qid, {}).get(str(measure), 0.0)


@dataclass(frozen=True)
class RunEvaluation:
    """Per-query nDCG and recall with their means"""
    per_query: Dict[str, Tuple[float, float]]
    ndcg: float
    recall: float
    ndcg_k: int
    recall_k: int


def evaluate_run(run: Run, qrels: Qrels, ndcg_k: int = 10, recall_k: int = 100,
                 query_ids: Optional[Sequence[str]] = None) -> RunEvaluation:
    """Average over all judged queries; a query missing from the run scores 0"""
    _check_cutoff(ndcg_k)
    _check_cutoff(recall_k)
    grouped = qrels.by_query()
    qids = list(query_ids) if query_ids is not None else sorted(grouped)
    for qid in run:
        if qid not in grouped:
            logger.warning("run contains query %s without judgments", qid)
    ndcg_measure, recall_measure = nDCG @ ndcg_k, R @ recall_k
    values = _measure({qid: run[qid] for qid in qids if qid in run}, qrels, [ndcg_measure, recall_measure])
    per_query = {}
    for qid in qids:
        found = values.get(qid, {})
        per_query[qid] = (found.get(str(ndcg_measure), 0.0), found.get(str(recall_measure), 0.0))
    if per_query:
        values = np.array(list(per_query.values()), dtype=np.float64)
        ndcg, recall = float(values[:, 0].mean()), float(values[:, 1].mean())
    else:
        ndcg = recall = 0.0
    return RunEvaluation(per_query, ndcg, recall, ndcg_k, recall_k)


def format_run_evaluation(evaluation: RunEvaluation) -> str:
    """TSV with per-query values and a final `all` row"""
    lines = [f"qid\tndcg@{evaluation.ndcg_k}\trecall@{evaluation.recall_k}"]
    for qid, (ndcg, recall) in evaluation.per_query.items():
        lines.append(f"{qid}\t{ndcg:.4f}\t{recall:.4f}")
    lines.append(f"all\t{evaluation.ndcg:.4f}\t{evaluation.recall:.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Query expansion experiment

@dataclass
class QECollection:
    """Everything one dialect contributes to the expansion experiment"""
    docs: List[Document]
    queries: Dict[str, str]
    qrels: Qrels
    dictionary: Dictionary


@dataclass(frozen=True)
class QERow:
    """Base and expanded retrieval quality of one dialect (fractions, not percentages)"""
    name: str
    ndcg_base: float
    ndcg_qe: float
    ndcg_delta: float
    ndcg_delta_pct: float
    recall_base: float
    recall_qe: float
    recall_delta: float
    recall_delta_pct: float
    n_aug: float
    n_query: float
    pct_aug: float

    @classmethod
    def from_values(cls, name: str, ndcg_base: float, ndcg_qe: float, recall_base: float, recall_qe: float,
                    n_aug: float, n_query: float) -> "QERow":
        return cls(name, ndcg_base, ndcg_qe, ndcg_qe - ndcg_base, relative_change(ndcg_base, ndcg_qe),
                   recall_base, recall_qe, recall_qe - recall_base, relative_change(recall_base, recall_qe),
                   n_aug, n_query, n_aug / n_query if n_query else 0.0)


@dataclass(frozen=True)
class QEReport:
    """Dialect rows, the ALL row and the id problems found per query"""
    rows: Tuple[QERow, ...]
    all_row: QERow
    issues: Tuple[str, ...] = ()


def relative_change(base: float, new: float) -> float:
    """(new - base) / base, 0 when nothing changed from a zero base and inf otherwise"""
    delta = new - base
    if base == 0.0:
        return 0.0 if delta == 0.0 else math.inf
    return delta / base


def _check_ids(name: str, collection: QECollection) -> Tuple[List[str], List[str]]:
    """Queries to evaluate and the mismatches found, one message per query"""
    doc_ids = {doc.id for doc in collection.docs}
    grouped = collection.qrels.by_query()
    issues = []
    for qid in collection.queries:
        if qid not in grouped:
            issues.append(f"{name}: query {qid} has no judgments")
    for qid, grades in grouped.items():
        if qid not in collection.queries:
            issues.append(f"{name}: judged query {qid} is missing from the queries")
        missing = sorted(doc_id for doc_id in grades if doc_id not in doc_ids)
        if missing:
            issues.append(f"{name}: query {qid} judges unknown document(s) {', '.join(missing)}")
    evaluated = [qid for qid in collection.queries if qid in grouped]
    return evaluated, issues


def _qe_dialect(params: Bm25Params, ndcg_k: int, recall_k: int, depth: int,
                item: Tuple[str, QECollection]) -> Tuple[QERow, List[str]]:
    name, collection = item
    evaluated, issues = _check_ids(name, collection)
    queries = {qid: collection.queries[qid] for qid in evaluated}
    index = build_index(collection.docs)
    k = max(depth, ndcg_k, recall_k)
    base_run, _ = search_queries(index, queries, k, None, params)
    qe_run, n_aug = search_queries(index, queries, k, collection.dictionary, params)
    base = evaluate_run(base_run, collection.qrels, ndcg_k, recall_k, evaluated)
    expanded = evaluate_run(qe_run, collection.qrels, ndcg_k, recall_k, evaluated)
    row = QERow.from_values(name, base.ndcg, expanded.ndcg, base.recall, expanded.recall,
                            float(n_aug), float(len(evaluated)))
    return row, issues


def qe_experiment(collections: Mapping[str, QECollection], params: Bm25Params = BM25_PARAMS,
                  ndcg_k: int = 10, recall_k: int = 100, depth: int = 1000, jobs: int = 1) -> QEReport:
    """Compare BM25 on original and expanded queries for every dialect"""
    if not collections:
        raise ValueError("at least one collection is required")
    results = ordered_map(partial(_qe_dialect, params, ndcg_k, recall_k, depth), list(collections.items()), jobs)
    rows = tuple(row for row, _ in results)
    issues = tuple(message for _, found in results for message in found)
    for message in issues:
        logger.warning(message)

    # ALL is the unweighted mean of the dialect rows, column by column
    columns = np.array([[r.ndcg_base, r.ndcg_qe, r.ndcg_delta, r.ndcg_delta_pct,
                         r.recall_base, r.recall_qe, r.recall_delta, r.recall_delta_pct,
                         r.n_aug, r.n_query, r.pct_aug] for r in rows], dtype=np.float64)
    # Relative deltas from a zero base are infinite and left out of the mean
    means = []
    for column in columns.T:
        finite = column[np.isfinite(column)]
        means.append(float(finite.mean()) if len(finite) else math.inf)
    all_row = QERow("ALL", *means)
    for row in rows + (all_row,):
        logger.info("%s: nDCG %.4f -> %.4f, recall %.4f -> %.4f, %g of %g queries expanded",
                    row.name, row.ndcg_base, row.ndcg_qe, row.recall_base, row.recall_qe, row.n_aug, row.n_query)
    return QEReport(rows, all_row, issues)


def _pct(value: float) -> str:
    return f"{value * 100:.2f}%" if math.isfinite(value) else "inf"


def _published_qe_line(name: str, row: Mapping[str, float]) -> str:
    """Published row; its relative deltas and pct_aug are already percentages"""
    return "\t".join([
        f"published:{name}",
        f"{row['ndcg10_base']:.4f}", f"{row['ndcg10_qe']:.4f}", f"{row['ndcg10_delta']:.4f}",
        f"{row['ndcg10_delta_pct']:.2f}%",
        f"{row['recall100_base']:.4f}", f"{row['recall100_qe']:.4f}", f"{row['recall100_delta']:.4f}",
        f"{row['recall100_delta_pct']:.2f}%",
        f"{row['n_aug']:g}", f"{row['n_query']:g}", f"{row['pct_aug']:.2f}%",
    ])


def format_qe_report(report: QEReport, ndcg_k: int = 10, recall_k: int = 100,
                     published: Optional[Mapping[str, Mapping[str, float]]] = None) -> str:
    """TSV with base, expanded, delta and relative delta per metric plus augmentation counts

    Published rows of the reported dialects are appended when the cutoffs are nDCG@10 and Recall@100.
    """
    header = ["dialect",
              f"ndcg@{ndcg_k}_bm25", f"ndcg@{ndcg_k}_qe", "delta", "delta_pct",
              f"recall@{recall_k}_bm25", f"recall@{recall_k}_qe", "delta", "delta_pct",
              "n_aug", "n_query", "pct_aug"]
    lines = ["\t".join(header)]
    for row in report.rows + (report.all_row,):
        lines.append("\t".join([
            row.name,
            f"{row.ndcg_base:.4f}", f"{row.ndcg_qe:.4f}", f"{row.ndcg_delta:.4f}", _pct(row.ndcg_delta_pct),
            f"{row.recall_base:.4f}", f"{row.recall_qe:.4f}", f"{row.recall_delta:.4f}", _pct(row.recall_delta_pct),
            f"{row.n_aug:g}", f"{row.n_query:g}", _pct(row.pct_aug),
        ]))
    if published and (ndcg_k, recall_k) == (10, 100):
        for row in report.rows + (report.all_row,):
            if row.name in published:
                lines.append(_published_qe_line(row.name, published[row.name]))
    return "\n".join(lines) + "\n"


def load_qe_collections(manifest_path: Union[str, Path]) -> Dict[str, QECollection]:
    """Read a JSON manifest mapping dialect -> {docs, queries, qrels, dictionary}"""
    manifest_path = require_file(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: invalid JSON: {exc}") from None
    if not isinstance(manifest, dict) or not manifest:
        raise ConfigError(f"{manifest_path}: expected a non-empty object of dialects")
    base = manifest_path.parent
    collections = {}
    for name, entry in manifest.items():
        required = ("docs", "queries", "qrels", "dictionary")
        if not isinstance(entry, dict) or sorted(entry) != sorted(required):
            raise ConfigError(f"{manifest_path}: entry {name!r} must have exactly the keys {', '.join(required)}")
        paths = {key: base / entry[key] for key in required}
        dialect_id = name if name in DIALECT_IDS else "other"
        collections[name] = QECollection(
            docs=list(read_documents(paths["docs"])),
            queries=read_queries(paths["queries"]),
            qrels=read_qrels(paths["qrels"]),
            dictionary=import_tsv(paths["dictionary"], dialect_id),
        )
    return collections


def check_run_ids(run: Run, qrels: Qrels) -> None:
    """Raise when no run query has judgments"""
    if run and not set(run) & set(qrels.query_ids()):
        raise IdMismatchError("no query id of the run appears in the judgments")
