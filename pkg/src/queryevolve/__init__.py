"""Evolves boolean search queries against an n-gram bitmap index."""

from .corpus import (
    CorpusIndex,
    CorpusStore,
    DocBitVector,
    Document,
    Label,
    Phrase,
    Source,
    VocabularyIndex,
    append_documents,
    build_index,
    extract_ngrams,
    index_corpus,
    tokenize,
)
from .evaluate import (
    ConfusionCounts,
    CorpusEvaluator,
    LossParams,
    PhraseBitmaps,
    evaluate_corpus,
    loss,
    loss_from_rates,
    matches,
    matches_text,
)
from .engine import (
    GaConfig,
    Individual,
    RunState,
    RunStatus,
    crossover,
    mutate_clause_add,
    mutate_negate,
    mutate_phrase_add,
    mutate_simplify,
    mutate_swap,
    select_fetch_candidate,
    step_generation,
    swatch_insert,
)
from .provider import (
    ProviderRequest,
    ProviderResponse,
    SearchProvider,
    SimulatedProvider,
    TokenBudget,
    ingest_response,
)
from .query import (
    ClauseQuery,
    Genome,
    Literal,
    QueryAst,
    decode,
    encode,
    normalize,
    parse,
    serialize,
)

__version__ = "0.1.0"
