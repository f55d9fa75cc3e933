"""
Command-line controller for dialect lexicon induction
Binds the core modules into the induction, intrinsic evaluation and retrieval pipelines
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.core.bli_eval import (ablation_curve, bli_protocol, cross_dialect_matrix, evaluate, format_cross_matrix,
                               format_curve, format_metrics_report, format_protocol_report, split_dataset, SplitSpec)
from src.core.candidates import (extract_vocab, generate_candidates, read_tokens, read_vocab, write_candidates,
                                 write_vocab)
from src.core.classifier import load_forest_file, save_forest_file, split_counts, train_forest
from src.core.dialex_config import DIALECT_IDS, RunConfig, load_run_config
from src.core.errors import ConfigError, DialexError
from src.core.file_io import atomic_write_dir, atomic_write_text, require_file, with_header
from src.core.lexicon import (dictionary_stats, export_tsv, format_stats_report, import_tsv, induce_dictionary,
                              read_dictionary_tsv)
from src.core.pair_data import format_feature_rows, read_labeled_pairs
from src.core.parallel import resolve_jobs
from src.core.published_results import PublishedResults
from src.core.retrieval import (build_index, check_run_ids, evaluate_run, format_qe_report, format_run_evaluation,
                                load_index, load_qe_collections, qe_experiment, read_documents, read_qrels,
                                read_queries, read_run, save_index, search_queries, write_run)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
PRESETS = ("dialemma-full",)


class DialexApp:
    """Runs one subcommand under an effective configuration"""

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()
        self.published = PublishedResults()

    @property
    def jobs(self) -> int:
        return self.config.jobs

    def _write_report(self, body: str, output: Optional[Path]) -> Optional[Path]:
        """Write a TSV report with the provenance header, or print it when no output is given"""
        text = with_header(body, self.config.provenance())
        if output is None:
            sys.stdout.write(text)
            return None
        return atomic_write_text(output, text)

    def _read_pairs(self, path: Path):
        return read_labeled_pairs(path, self.config.features, self.config.lexicon.inflected_positive, self.jobs)

    # -- candidate generation -------------------------------------------------

    def cmd_vocab(self, corpus: Path, output: Path) -> Path:
        """Count a tokenized corpus into a frequency-ranked vocabulary"""
        vocab = extract_vocab(read_tokens(corpus), self.config.candidates.top_n, self.config.features.lowercase)
        logger.info("kept %d vocabulary terms", len(vocab))
        return write_vocab(vocab, output, self.config.provenance())

    def cmd_candidates(self, lemmas: Path, dialect_vocab: Path, output: Path) -> Path:
        """Dump every lemma's k nearest dialect terms"""
        lowercase = self.config.features.lowercase
        sets = generate_candidates(read_vocab(lemmas, lowercase), read_vocab(dialect_vocab, lowercase),
                                   self.config.candidates.k, self.jobs)
        return write_candidates(list(sets), output, self.config.provenance())

    # -- classifier and intrinsic evaluation ----------------------------------

    def cmd_features(self, pairs: Path, output: Optional[Path]) -> Optional[Path]:
        """Feature table of a labeled pair file"""
        return self._write_report(format_feature_rows(self._read_pairs(pairs)), output)

    def cmd_train(self, pairs: Path, output: Path, preset: Optional[str] = None,
                  heldout: Optional[Path] = None) -> Path:
        """Train a forest on a seeded train split, or on all pairs with the dialemma-full preset"""
        data = self._read_pairs(pairs)
        params = self.config.forest
        if preset == "dialemma-full":
            train = data
        else:
            spec = SplitSpec(self.config.evaluation.train_fraction, params.seed, self.config.evaluation.stratify)
            train, test = split_dataset(data, spec)
            logger.info("training on %d pairs, holding out %d", len(train), len(test))
            if heldout is not None:
                lines = "".join(f"{p.german}\t{p.dialect}\t{int(p.label)}\n" for p in test)
                atomic_write_text(heldout, with_header(lines, self.config.provenance()))
        forest = train_forest(train, params, self.jobs)
        logger.info("split counts: %s", ", ".join(f"{k}={v}" for k, v in split_counts(forest).items()))
        return save_forest_file(forest, output)

    def cmd_eval_bli(self, pairs: Path, output: Optional[Path], model: Optional[Path] = None) -> Optional[Path]:
        """Evaluate a trained model on pairs, or run the repeated-split protocol when no model is given"""
        data = self._read_pairs(pairs)
        evaluation = self.config.evaluation
        if model is not None:
            metrics = evaluate(load_forest_file(model), data, evaluation.threshold)
            logger.info("P=%.4f R=%.4f F1=%.4f", metrics.precision, metrics.recall, metrics.f1)
            return self._write_report(format_metrics_report(metrics), output)
        result = bli_protocol(data, evaluation.seeds, self.config.forest, evaluation.train_fraction,
                              evaluation.stratify, evaluation.threshold, self.jobs)
        published = [(row.name, row.precision, row.recall, row.f1) for row in self.published.bli_comparison()]
        return self._write_report(format_protocol_report(result, published), output)

    def cmd_cross(self, datasets: Sequence[Tuple[str, Path]], output: Path) -> Path:
        """Cross-dialect F1, precision and recall matrices, written into one directory"""
        data = {name: self._read_pairs(path) for name, path in datasets}
        evaluation = self.config.evaluation
        matrix = cross_dialect_matrix(data, evaluation.seeds, self.config.forest, evaluation.train_fraction,
                                      evaluation.stratify, evaluation.threshold, self.jobs)
        provenance = self.config.provenance()
        return atomic_write_dir(output, {
            f"{metric}.tsv": with_header(format_cross_matrix(matrix, metric, self.published.cross_dialect(metric)),
                                         provenance)
            for metric in ("f1", "precision", "recall")
        })

    def cmd_ablate(self, pairs: Path, output: Optional[Path]) -> Optional[Path]:
        """F1 against training-set size"""
        ablation = self.config.ablation
        curve = ablation_curve(self._read_pairs(pairs), ablation.fractions, ablation.seeds, self.config.forest,
                               ablation.test_fraction, ablation.split_seed, ablation.nested,
                               self.config.evaluation.threshold, self.jobs)
        return self._write_report(format_curve(curve, self.published.training_size_anchors()), output)

    # -- dictionaries -----------------------------------------------------------

    def cmd_induce(self, lemmas: Path, dialect_vocab: Path, model: Path, output: Path,
                   stats_output: Optional[Path] = None) -> Path:
        """Induce a dialect dictionary and report its statistics"""
        lexicon = self.config.lexicon
        forest = load_forest_file(model)
        lowercase = self.config.features.lowercase
        dictionary = induce_dictionary(read_vocab(lemmas, lowercase), read_vocab(dialect_vocab, lowercase), forest,
                                       self.config.candidates.k, lexicon.threshold, lexicon.dialect_id,
                                       lowercase, self.jobs)
        stats = dictionary_stats(dictionary)
        logger.info("%s: %d lemmas, %d variants, %.2f variants per lemma", lexicon.dialect_id,
                    stats.lemma_count, stats.variant_count, stats.variants_per_lemma)
        path = export_tsv(dictionary, output, self.config.provenance())
        if stats_output is not None:
            report = format_stats_report({lexicon.dialect_id: stats}, self.published.dictionary_stats())
            self._write_report(report, stats_output)
        return path

    def cmd_stats(self, dictionaries: Sequence[Tuple[str, Path]], output: Optional[Path]) -> Optional[Path]:
        """Lemma and variant counts of one or more dictionary files"""
        stats = {}
        for name, path in dictionaries:
            dictionary, duplicates = read_dictionary_tsv(path, name if name in DIALECT_IDS else "other",
                                                         self.config.features.lowercase)
            if duplicates:
                logger.warning("%s: dropped %d duplicate pair(s)", path, duplicates)
            stats[name] = dictionary_stats(dictionary)
        return self._write_report(format_stats_report(stats, self.published.dictionary_stats()), output)

    # -- retrieval --------------------------------------------------------------

    def cmd_index(self, docs: Path, output: Path) -> Path:
        """Build and save a BM25 index"""
        return save_index(build_index(read_documents(docs)), output)

    def cmd_search(self, index_dir: Path, queries: Path, output: Path, dictionary: Optional[Path] = None) -> Path:
        """Rank documents for every query, expanding queries when a dictionary is given"""
        index = load_index(index_dir)
        expansion = import_tsv(dictionary) if dictionary is not None else None
        run, n_aug = search_queries(index, read_queries(queries), self.config.retrieval.depth, expansion,
                                    self.config.bm25)
        if expansion is not None:
            logger.info("n_aug=%d", n_aug)
        return write_run(run, output, self.config.retrieval.run_tag)

    def cmd_eval_ir(self, run: Path, qrels: Path, output: Optional[Path]) -> Optional[Path]:
        """nDCG@k and Recall@k of a run"""
        retrieval = self.config.retrieval
        parsed_run, parsed_qrels = read_run(run), read_qrels(qrels)
        check_run_ids(parsed_run, parsed_qrels)
        evaluation = evaluate_run(parsed_run, parsed_qrels, retrieval.ndcg_k, retrieval.recall_k)
        return self._write_report(format_run_evaluation(evaluation), output)

    def cmd_qe_experiment(self, manifest: Path, output: Optional[Path]) -> Optional[Path]:
        """Base against expanded BM25 for every dialect of a manifest"""
        retrieval = self.config.retrieval
        report = qe_experiment(load_qe_collections(manifest), self.config.bm25, retrieval.ndcg_k,
                               retrieval.recall_k, retrieval.depth, self.jobs)
        return self._write_report(format_qe_report(report, retrieval.ndcg_k, retrieval.recall_k,
                                                   self.published.query_expansion()), output)


# ---------------------------------------------------------------------------
# Argument parsing

def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _named_path(text: str) -> Tuple[str, Path]:
    """`name=path`, or a bare path named after its stem"""
    name, sep, path = text.partition("=")
    if not sep:
        return Path(text).stem, Path(text)
    if not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return name, Path(path)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file (sections of RunConfig)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: $DIALEX_JOBS or 1)")
    common.add_argument("--seed", type=int, default=None, help="forest and split seed")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    parser = argparse.ArgumentParser(prog="dialex", description="Dialect lexicon induction and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", parents=[common], help="corpus tokens -> vocabulary TSV")
    p.add_argument("corpus", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--top-n", type=int)

    p = sub.add_parser("candidates", parents=[common], help="k nearest dialect terms per lemma")
    p.add_argument("lemmas", type=Path)
    p.add_argument("dialect_vocab", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--k", type=int)

    p = sub.add_parser("features", parents=[common], help="labeled pairs -> feature table")
    p.add_argument("pairs", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--inflected-positive", action="store_true", default=None)

    p = sub.add_parser("train", parents=[common], help="train a random forest")
    p.add_argument("pairs", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--heldout", type=Path, help="write the held-out pairs here")
    p.add_argument("--n-trees", type=int)
    p.add_argument("--max-features", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--class-weight", choices=("balanced",))
    p.add_argument("--inflected-positive", action="store_true", default=None)

    p = sub.add_parser("eval-bli", parents=[common], help="precision/recall/F1 of pair classification")
    p.add_argument("pairs", type=Path)
    p.add_argument("--model", type=Path, help="evaluate this model instead of running the seeded protocol")
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--threshold", type=float)
    p.add_argument("--inflected-positive", action="store_true", default=None)

    p = sub.add_parser("cross", parents=[common], help="cross-dialect transfer matrices")
    p.add_argument("datasets", type=_named_path, nargs="+", metavar="DIALECT=PAIRS")
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--seeds", type=_int_list)

    p = sub.add_parser("ablate", parents=[common], help="F1 against training-set size")
    p.add_argument("pairs", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--fractions", type=_float_list)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--nested", action="store_true", default=None)

    p = sub.add_parser("induce", parents=[common], help="induce a dialect dictionary")
    p.add_argument("lemmas", type=Path)
    p.add_argument("dialect_vocab", type=Path)
    p.add_argument("model", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--stats-output", type=Path)
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--dialect", choices=DIALECT_IDS)

    p = sub.add_parser("stats", parents=[common], help="dictionary statistics")
    p.add_argument("dictionaries", type=_named_path, nargs="+", metavar="DIALECT=DICT")
    p.add_argument("-o", "--output", type=Path)

    p = sub.add_parser("index", parents=[common], help="build a BM25 index")
    p.add_argument("docs", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="index directory")

    p = sub.add_parser("search", parents=[common], help="rank documents for queries")
    p.add_argument("index", type=Path)
    p.add_argument("queries", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--dictionary", type=Path, help="expand queries with this dictionary")
    p.add_argument("--depth", type=int)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)

    p = sub.add_parser("eval-ir", parents=[common], help="nDCG and recall of a run")
    p.add_argument("run", type=Path)
    p.add_argument("qrels", type=Path)
    p.add_argument("-o", "--output", type=Path)

    p = sub.add_parser("qe-experiment", parents=[common], help="base against expanded retrieval")
    p.add_argument("manifest", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    """Command-line values per config section; unset flags stay None and are ignored"""
    def arg(name: str) -> Any:
        return getattr(args, name, None)

    seeds = arg("seeds")
    return {
        "candidates": {"k": arg("k"), "top_n": arg("top_n")},
        "forest": {"seed": args.seed, "n_trees": arg("n_trees"), "max_features": arg("max_features"),
                   "max_depth": arg("max_depth"), "class_weight": arg("class_weight")},
        "evaluation": {"seeds": seeds if args.command in ("eval-bli", "cross") else None,
                       "threshold": arg("threshold") if args.command == "eval-bli" else None},
        "ablation": {"fractions": arg("fractions"), "seeds": seeds if args.command == "ablate" else None,
                     "nested": arg("nested")},
        "bm25": {"k1": arg("k1"), "b": arg("b")},
        "lexicon": {"dialect_id": arg("dialect"), "inflected_positive": arg("inflected_positive"),
                    "threshold": arg("threshold") if args.command == "induce" else None},
        "retrieval": {"depth": arg("depth")},
    }


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def _dispatch(app: DialexApp, args: argparse.Namespace) -> None:
    command = args.command
    if command == "vocab":
        app.cmd_vocab(args.corpus, args.output)
    elif command == "candidates":
        app.cmd_candidates(args.lemmas, args.dialect_vocab, args.output)
    elif command == "features":
        app.cmd_features(args.pairs, args.output)
    elif command == "train":
        app.cmd_train(args.pairs, args.output, args.preset, args.heldout)
    elif command == "eval-bli":
        app.cmd_eval_bli(args.pairs, args.output, args.model)
    elif command == "cross":
        names = [name for name, _ in args.datasets]
        if len(set(names)) != len(names):
            raise ConfigError(f"dialect names must be unique, got {', '.join(names)}")
        app.cmd_cross(args.datasets, args.output)
    elif command == "ablate":
        app.cmd_ablate(args.pairs, args.output)
    elif command == "induce":
        app.cmd_induce(args.lemmas, args.dialect_vocab, args.model, args.output, args.stats_output)
    elif command == "stats":
        app.cmd_stats(args.dictionaries, args.output)
    elif command == "index":
        app.cmd_index(args.docs, args.output)
    elif command == "search":
        app.cmd_search(args.index, args.queries, args.output, args.dictionary)
    elif command == "eval-ir":
        app.cmd_eval_ir(args.run, args.qrels, args.output)
    elif command == "qe-experiment":
        app.cmd_qe_experiment(args.manifest, args.output)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the subcommand and return the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = load_run_config(args.config, _overrides(args), resolve_jobs(args.jobs))
        for path_arg in ("corpus", "pairs", "lemmas", "dialect_vocab", "model", "docs", "queries", "run", "qrels",
                         "manifest", "dictionary"):
            path = getattr(args, path_arg, None)
            if path is not None:
                require_file(path)
        _dispatch(DialexApp(config), args)
    except DialexError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValueError as exc:
        logger.error("%s", exc)
        return 1
    return 0
