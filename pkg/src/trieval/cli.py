"""Batch command-line pipeline.

Commands:
  index             build a generative-retrieval index directory
  retrieve          decode docids for a query file into a TREC run
  eval              score a run against qrels (JSONL report + figure)
  compare-decoders  run several decoding strategies side by side

Configuration comes from an INI file (sections [paths], [docid],
[querygen], [scorer], [decoder]) selected via --config or the
TRIEVAL_CONFIG environment variable; command-line flags win over the
file.  Exit codes: 0 success, 1 usage, 2 data/integrity error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .corpus import (
    RunEntry,
    TaskInstruction,
    load_corpus,
    load_instructions,
    load_qrels,
    load_run,
    write_run,
)
from .decoder import STRATEGIES, DecoderSpec, decode_query, run_entries
from .docid import (
    DEFAULT_DOCID_LENGTH,
    TfidfDocidGenerator,
    assign_docids,
    load_assignment,
    load_external_docids,
    load_stopwords,
)
from .errors import IntegrityError, ParseError, TrievalError
from .evaluation import (
    MetricReport,
    RetrievalQuery,
    compare_decoders,
    comparison_rows,
    evaluate_run,
    format_comparison,
)
from .querygen import generate_batch, load_external_queries
from .scorer import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_BETA_GRID,
    LexicalScorer,
    LexicalScorerParams,
    TrainingPair,
    fit,
)
from .trie import build_trie
from .vocab import Vocabulary, build_vocabulary, tokenize

CONFIG_ENV_VAR = "TRIEVAL_CONFIG"
DEFAULT_INSTRUCTION = TaskInstruction(
    "default", "retrieve documents relevant to the query"
)

INDEX_FILES = ("vocabulary.txt", "docids.jsonl", "scorer.jsonl", "manifest.json")


@dataclass
class PipelineConfig:
    """Effective settings after merging defaults, config file, and flags."""

    corpus: str | None = None
    instructions: str | None = None
    qrels: str | None = None
    queries: str | None = None
    output_dir: str = "out"

    docid_length: int = DEFAULT_DOCID_LENGTH
    dedup_policy: str = "suffix-term"
    external_docids: str | None = None

    queries_per_doc: int = 8
    querygen_seed: int = 0
    external_queries: str | None = None

    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID

    strategy: str = "reverse-annealing"
    num_docids: int = 100
    slope: float = 10.0
    midpoint: float = 0.5
    max_temperature: float = 1.0
    top_p: float = 0.9
    beam_width: int = 10
    decoder_seed: int = 0

    instruction_id: str | None = None
    threads: int = 1

    def decoder_spec(self, strategy: str | None = None) -> DecoderSpec:
        return DecoderSpec(
            strategy=strategy or self.strategy,
            total_docids=self.num_docids,
            slope=self.slope,
            midpoint=self.midpoint,
            max_temperature=self.max_temperature,
            top_p=self.top_p,
            width=self.beam_width,
            seed=self.decoder_seed,
        )

    def config_hash(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_grid(value: str) -> tuple[float, ...]:
    return tuple(float(x) for x in value.replace(",", " ").split())


_KNOWN_KEYS = {
    "paths": {"corpus", "instructions", "qrels", "queries", "output_dir", "instruction_id"},
    "docid": {"length", "dedup", "external"},
    "querygen": {"queries_per_doc", "seed", "external"},
    "scorer": {"alpha_grid", "beta_grid"},
    "decoder": {
        "strategy", "num_docids", "slope", "midpoint",
        "max_temperature", "top_p", "width", "seed",
    },
}


def load_config(path: str | None) -> PipelineConfig:
    """Read the INI config file; unknown sections or keys are rejected."""
    config = PipelineConfig()
    if path is None:
        return config
    if not os.path.exists(path):
        raise IntegrityError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise IntegrityError(f"{path}: unknown config section [{section}]")
        for key in parser.options(section):
            if key not in _KNOWN_KEYS[section]:
                raise IntegrityError(f"{path}: unknown config key {section}.{key}")

    def take(section: str, key: str, cast, current):
        if parser.has_option(section, key):
            return cast(parser.get(section, key))
        return current

    config.corpus = take("paths", "corpus", str, config.corpus)
    config.instructions = take("paths", "instructions", str, config.instructions)
    config.qrels = take("paths", "qrels", str, config.qrels)
    config.queries = take("paths", "queries", str, config.queries)
    config.output_dir = take("paths", "output_dir", str, config.output_dir)

    config.docid_length = take("docid", "length", int, config.docid_length)
    config.dedup_policy = take("docid", "dedup", str, config.dedup_policy)
    config.external_docids = take("docid", "external", str, config.external_docids)

    config.queries_per_doc = take(
        "querygen", "queries_per_doc", int, config.queries_per_doc
    )
    config.querygen_seed = take("querygen", "seed", int, config.querygen_seed)
    config.external_queries = take("querygen", "external", str, config.external_queries)

    config.alpha_grid = take("scorer", "alpha_grid", _parse_grid, config.alpha_grid)
    config.beta_grid = take("scorer", "beta_grid", _parse_grid, config.beta_grid)

    config.strategy = take("decoder", "strategy", str, config.strategy)
    config.num_docids = take("decoder", "num_docids", int, config.num_docids)
    config.slope = take("decoder", "slope", float, config.slope)
    config.midpoint = take("decoder", "midpoint", float, config.midpoint)
    config.max_temperature = take(
        "decoder", "max_temperature", float, config.max_temperature
    )
    config.top_p = take("decoder", "top_p", float, config.top_p)
    config.beam_width = take("decoder", "width", int, config.beam_width)
    config.decoder_seed = take("decoder", "seed", int, config.decoder_seed)

    config.instruction_id = take("paths", "instruction_id", str, config.instruction_id)
    return config


def _require_file(path: str | None, what: str) -> str:
    if path is None:
        raise IntegrityError(f"no {what} path configured")
    if not os.path.exists(path):
        raise IntegrityError(f"{what} path does not exist: {path}")
    return path


def _resolve_instruction(
    config: PipelineConfig,
) -> tuple[TaskInstruction, dict[str, TaskInstruction]]:
    """The task instruction for indexing plus the full instruction table."""
    if config.instructions is None:
        return DEFAULT_INSTRUCTION, {DEFAULT_INSTRUCTION.instr_id: DEFAULT_INSTRUCTION}
    table = load_instructions(_require_file(config.instructions, "instructions"))
    if not table:
        raise IntegrityError(f"no instructions in {config.instructions}")
    if config.instruction_id is not None:
        if config.instruction_id not in table:
            raise IntegrityError(
                f"instruction_id {config.instruction_id!r} not in {config.instructions}"
            )
        return table[config.instruction_id], table
    first = next(iter(table.values()))
    return first, table


def load_retrieval_queries(path: str) -> list[dict]:
    """JSONL evaluation queries: {"query_id", "text", optional "instr_id"}."""
    queries: list[dict] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if "query_id" not in obj or "text" not in obj:
                raise ParseError(
                    path, line_no, "expected object with keys 'query_id' and 'text'"
                )
            query_id = str(obj["query_id"])
            if query_id in seen:
                raise IntegrityError(f"{path}: duplicate query_id {query_id!r}")
            seen.add(query_id)
            queries.append(
                {
                    "query_id": query_id,
                    "text": str(obj["text"]),
                    "instr_id": str(obj["instr_id"]) if "instr_id" in obj else None,
                }
            )
    return queries


def cmd_index(config: PipelineConfig) -> int:
    """assign docids -> generate queries -> build vocab -> fit scorer -> dump."""
    corpus = load_corpus(_require_file(config.corpus, "corpus"))
    instruction, _ = _resolve_instruction(config)
    stopwords = load_stopwords()

    truncated = 0
    if config.external_docids is not None:
        source, truncated = load_external_docids(
            _require_file(config.external_docids, "external docids"),
            corpus,
            config.docid_length,
        )
        docid_source = "external"
    else:
        source = TfidfDocidGenerator(corpus, config.docid_length, stopwords)
        docid_source = "tf-idf"
    assignment = assign_docids(corpus, source, config.dedup_policy)

    if config.external_queries is not None:
        batch = load_external_queries(
            _require_file(config.external_queries, "external queries"), corpus
        )
        query_source = "external"
    else:
        batch = generate_batch(
            corpus, instruction, config.queries_per_doc, config.querygen_seed, stopwords
        )
        query_source = "generated"

    vocab = build_vocabulary(
        (assignment.docids[d].terms for d in corpus.doc_ids),
        [tokenize(q.text) for q in batch] + [tokenize(instruction.text)],
    )
    trie = build_trie(assignment, vocab)

    queries_per_doc = batch.queries_per_doc
    train: list[TrainingPair] = []
    heldout: list[TrainingPair] = []
    for doc_id in corpus.doc_ids:
        for query in batch[doc_id]:
            pair = TrainingPair(query, assignment.docids[doc_id])
            if queries_per_doc >= 2 and query.seed_index == queries_per_doc - 1:
                heldout.append(pair)
            else:
                train.append(pair)
    params = fit(
        train,
        heldout,
        config.alpha_grid,
        config.beta_grid,
        vocab=vocab,
        trie=trie,
        instructions=instruction,
        stopwords=stopwords,
    )

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(str(out / "vocabulary.txt"))
    assignment.dump(str(out / "docids.jsonl"))
    params.save(str(out / "scorer.jsonl"))
    manifest = {
        "config_hash": config.config_hash(),
        "n": len(corpus),
        "conflict_rate": assignment.conflict_rate_before_dedup,
        "docid_length": config.docid_length,
        "dedup_policy": config.dedup_policy,
        "docid_source": docid_source,
        "truncated_external_docids": truncated,
        "query_source": query_source,
        "queries_per_doc": queries_per_doc,
        "querygen_seed": config.querygen_seed,
        "alpha": params.alpha,
        "beta": params.beta,
        "fit_on_training": params.fit_on_training,
        "instruction_id": instruction.instr_id,
        "vocab_size": len(vocab),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        f.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"indexed {len(corpus)} documents into {out}")
    return 0


def _load_index(index_dir: str, stopwords: frozenset[str]):
    index = Path(_require_file(index_dir, "index directory"))
    for name in INDEX_FILES:
        _require_file(str(index / name), name)
    vocab = Vocabulary.load(str(index / "vocabulary.txt"))
    docids = load_assignment(str(index / "docids.jsonl"))
    params = LexicalScorerParams.load(str(index / "scorer.jsonl"))
    scorer = LexicalScorer(params, vocab, stopwords)
    trie = build_trie(docids, vocab)
    with open(index / "manifest.json", "r", encoding="utf-8") as f:
        manifest = json.load(f)
    return vocab, trie, scorer, manifest


def _instruction_text_for(
    instr_id: str | None,
    table: dict[str, TaskInstruction],
    manifest: dict,
) -> str:
    if instr_id is not None and instr_id in table:
        return table[instr_id].text
    default_id = manifest.get("instruction_id")
    if default_id in table:
        return table[default_id].text
    return ""


def _decode_all(
    config: PipelineConfig,
    spec: DecoderSpec,
    scorer,
    trie,
    vocab: Vocabulary,
    queries: list[RetrievalQuery],
) -> list[tuple[RetrievalQuery, list[RunEntry], object]]:
    def one(query: RetrievalQuery):
        retrieval = decode_query(
            spec,
            scorer,
            trie,
            vocab.encode(tokenize(query.instr_text)),
            vocab.encode(tokenize(query.text)),
            query.query_id,
        )
        return (
            query,
            run_entries(retrieval, query.query_id, spec.tag(), spec.total_docids),
            retrieval,
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(one, queries))
    return [one(q) for q in queries]


def _build_queries(
    config: PipelineConfig, queries_path: str, manifest: dict
) -> list[RetrievalQuery]:
    rows = load_retrieval_queries(queries_path)
    table: dict[str, TaskInstruction] = {}
    if config.instructions is not None:
        table = load_instructions(_require_file(config.instructions, "instructions"))
    elif manifest.get("instruction_id") == DEFAULT_INSTRUCTION.instr_id:
        table = {DEFAULT_INSTRUCTION.instr_id: DEFAULT_INSTRUCTION}
    return [
        RetrievalQuery(
            row["query_id"],
            row["text"],
            _instruction_text_for(row["instr_id"], table, manifest),
        )
        for row in rows
    ]


def cmd_retrieve(config: PipelineConfig, index_dir: str, out_path: str) -> int:
    """Decode every query and write the run plus an auxiliary docid file."""
    stopwords = load_stopwords()
    vocab, trie, scorer, manifest = _load_index(index_dir, stopwords)
    queries = _build_queries(
        config, _require_file(config.queries, "queries"), manifest
    )
    spec = config.decoder_spec()

    decoded = _decode_all(config, spec, scorer, trie, vocab, queries)
    entries = [entry for _, query_entries, _ in decoded for entry in query_entries]
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_run(entries, out_path)

    aux_path = str(Path(out_path).with_suffix("")) + ".docids.jsonl"
    with open(aux_path, "w", encoding="utf-8") as f:
        for query, _, retrieval in decoded:
            for doc in retrieval.results:
                row = {
                    "query_id": query.query_id,
                    "doc_id": doc.doc_id,
                    "rank": doc.emission_index,
                    "docid": " ".join(vocab.decode(doc.docid_path)),
                    "logprob": doc.logprob,
                    "decoder": retrieval.decoder,
                    "seed": retrieval.seed,
                }
                f.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"wrote {len(entries)} run entries for {len(queries)} queries to {out_path}")
    return 0


def _report_rows(report: MetricReport) -> list[dict]:
    rows: list[dict] = []
    for query_id, values in report.per_query.items():
        rows.append({"query_id": query_id, **values})
    rows.append(
        {
            "query_id": "_mean_",
            "acc_at_1": report.acc_at_1,
            "ndcg_at_10": report.ndcg_at_10,
            "recall_at_100": report.recall_at_100,
            "evaluated": report.evaluated,
            "skipped": report.skipped,
        }
    )
    return rows


def cmd_eval(run_path: str, qrels_path: str, out_dir: str) -> int:
    """Score a run file; write the JSONL report and the metric figure."""
    from .plots import save_metric_bars

    run = load_run(_require_file(run_path, "run"))
    qrels = load_qrels(_require_file(qrels_path, "qrels"))
    report = evaluate_run(run, qrels)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eval_report.jsonl", "w", encoding="utf-8") as f:
        for row in _report_rows(report):
            f.write(json.dumps(row, sort_keys=True) + "\n")
    save_metric_bars(report, str(out / "eval_report.png"))
    print(
        f"acc@1={report.acc_at_1:.4f} ndcg@10={report.ndcg_at_10:.4f} "
        f"recall@100={report.recall_at_100:.4f} "
        f"(queries={max(report.evaluated.values(), default=0)})"
    )
    return 0


def cmd_compare(
    config: PipelineConfig, index_dir: str, strategies: list[str], out_dir: str
) -> int:
    """Run each strategy over the same index and tabulate the metrics."""
    from .plots import save_decoder_comparison

    stopwords = load_stopwords()
    vocab, trie, scorer, manifest = _load_index(index_dir, stopwords)
    queries = _build_queries(
        config, _require_file(config.queries, "queries"), manifest
    )
    qrels = load_qrels(_require_file(config.qrels, "qrels"))
    specs = [config.decoder_spec(strategy) for strategy in strategies]
    rows = compare_decoders(scorer, trie, vocab, queries, qrels, specs)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.jsonl", "w", encoding="utf-8") as f:
        for row in comparison_rows(rows):
            f.write(json.dumps(row, sort_keys=True) + "\n")
    table = format_comparison(rows)
    with open(out / "comparison.txt", "w", encoding="utf-8") as f:
        f.write(table)
    save_decoder_comparison(rows, str(out / "comparison.png"))
    print(table, end="")
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 (argparse defaults to 2, which is reserved for data errors)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"trieval: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trieval", description=__doc__)
    parser.add_argument("--config", help="INI config file (or $TRIEVAL_CONFIG)")
    parser.add_argument("--seed", type=int, help="override the command's seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build an index directory")
    p_index.add_argument("--corpus", help="corpus JSONL (overrides config)")
    p_index.add_argument("--out", help="index output directory")

    p_retrieve = sub.add_parser("retrieve", help="decode docids into a TREC run")
    p_retrieve.add_argument("--index-dir", required=True)
    p_retrieve.add_argument("--queries", help="queries JSONL (overrides config)")
    p_retrieve.add_argument("--strategy", choices=STRATEGIES)
    p_retrieve.add_argument("--out", help="run file path")

    p_eval = sub.add_parser("eval", help="score a run against qrels")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--qrels", help="qrels path (overrides config)")
    p_eval.add_argument("--out", help="report output directory")

    p_compare = sub.add_parser("compare-decoders", help="compare decoding strategies")
    p_compare.add_argument("--index-dir", required=True)
    p_compare.add_argument("--queries", help="queries JSONL (overrides config)")
    p_compare.add_argument("--qrels", help="qrels path (overrides config)")
    p_compare.add_argument(
        "--strategies",
        default=",".join(STRATEGIES),
        help="comma-separated strategy list",
    )
    p_compare.add_argument("--out", help="comparison output directory")
    return parser


def _effective_config(args: argparse.Namespace) -> PipelineConfig:
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    config = load_config(config_path)
    overrides: dict = {}
    if getattr(args, "corpus", None):
        overrides["corpus"] = args.corpus
    if getattr(args, "queries", None):
        overrides["queries"] = args.queries
    if getattr(args, "qrels", None):
        overrides["qrels"] = args.qrels
    if getattr(args, "strategy", None):
        overrides["strategy"] = args.strategy
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["querygen_seed"] = args.seed
        overrides["decoder_seed"] = args.seed
    if getattr(args, "out", None) and args.command == "index":
        overrides["output_dir"] = args.out
    return replace(config, **overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _effective_config(args)
        if args.command == "index":
            return cmd_index(config)
        if args.command == "retrieve":
            out = args.out or str(Path(config.output_dir) / "run.trec")
            return cmd_retrieve(config, args.index_dir, out)
        if args.command == "eval":
            qrels_path = args.qrels or config.qrels
            out = args.out or config.output_dir
            return cmd_eval(args.run, qrels_path, out)
        strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
        unknown = [s for s in strategies if s not in STRATEGIES]
        if unknown:
            raise IntegrityError(f"unknown strategies: {', '.join(unknown)}")
        out = args.out or config.output_dir
        return cmd_compare(config, args.index_dir, strategies, out)
    except TrievalError as exc:
        print(f"trieval: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"trieval: error: missing file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        # bad config values (e.g. num_docids = 0) or filesystem failures
        print(f"trieval: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
