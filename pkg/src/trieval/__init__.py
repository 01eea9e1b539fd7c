"""Generative retrieval over keyword-docid tries.

A corpus is indexed by assigning every document a short keyword docid,
pairing documents with instruction-conditioned pseudo-queries, and
fitting a conditional next-token scorer on the resulting pairs.
Retrieval decodes docids token-by-token inside a prefix tree of all
assigned docids; the reverse-annealing decoder raises the sampling
temperature across emissions to trade precision against recall.
"""

from .corpus import (
    Corpus,
    Document,
    Qrels,
    RunEntry,
    TaskInstruction,
    load_corpus,
    load_instructions,
    load_qrels,
    load_run,
    write_run,
)
from .decoder import (
    DecoderSpec,
    Retrieval,
    RetrievedDoc,
    TemperatureSchedule,
    beam,
    decode_query,
    greedy_no_replacement,
    nucleus,
    reverse_annealing,
    run_entries,
    sample_step,
)
from .docid import (
    Docid,
    DocidAssignment,
    TfidfDocidGenerator,
    assign_docids,
    generate_docid,
    load_external_docids,
    load_stopwords,
)
from .errors import (
    ContractError,
    DegenerateDocumentError,
    IntegrityError,
    ParseError,
    TrievalError,
)
from .evaluation import (
    MetricReport,
    RetrievalQuery,
    acc_at_1,
    compare_decoders,
    conflict_rate,
    evaluate_run,
    ndcg_at_10,
    recall_at_100,
)
from .querygen import (
    PseudoQuery,
    QueryBatch,
    avg_query_length,
    generate_batch,
    generate_queries,
    load_external_queries,
)
from .scorer import (
    LexicalScorer,
    LexicalScorerParams,
    ScorerContext,
    TableScorer,
    TrainingPair,
    fit,
    masked_log_softmax,
    sequence_logprob,
)
from .trie import DocidTrie, build_trie
from .vocab import BOS, EOS, UNK, TokenSeq, Vocabulary, build_vocabulary, tokenize

__version__ = "0.1.0"
