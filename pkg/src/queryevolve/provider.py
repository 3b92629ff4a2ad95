"""Remote-search abstraction for the dual-evaluation scheme.

The engine periodically sends one elite query to a provider and folds the
returned documents into the local database; the rest of the population is
only ever evaluated locally. The simulated provider serves from a hidden
held-out corpus using exactly the evaluator's matching semantics. A real
HTTP adapter is specified as a contract and ships disabled.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Sequence
from urllib.parse import parse_qs

from .corpus import CorpusStore, Document, Label, Source, index_corpus
from .evaluate import PhraseBitmaps
from .query import (
    ClauseQuery,
    QUERY_LENGTH_LIMIT,
    QuerySyntaxError,
    normalize,
    parse,
)

#: Documents returned per token, or as many as exist.
DOCS_PER_TOKEN = 500


class BudgetExhausted(RuntimeError):
    """The request would spend more tokens than the budget has left."""


class MalformedQuery(ValueError):
    """The provider rejected the content query as unparseable."""


class QueryTooLong(ValueError):
    """The content query exceeds the provider's character limit."""


@dataclass
class TokenBudget:
    """Spend tracker for remote-search tokens."""

    total: int
    spent: int = 0

    def __post_init__(self) -> None:
        if self.total < 0 or self.spent < 0 or self.spent > self.total:
            raise ValueError(f"bad budget: spent {self.spent} of {self.total}")

    @property
    def remaining(self) -> int:
        return self.total - self.spent

    def charge(self, tokens: int) -> None:
        if tokens < 1:
            raise ValueError("must charge at least one token")
        if self.spent + tokens > self.total:
            raise BudgetExhausted(
                f"{tokens} token(s) requested, {self.remaining} of {self.total} left"
            )
        self.spent += tokens


@dataclass(frozen=True)
class ProviderRequest:
    """One remote search call: a content query plus opaque metadata query.

    ``content_query`` must serialize within the provider character limit;
    providers reject longer ones with QueryTooLong.
    """

    content_query: str
    metadata_query: str = ""
    tokens_spent: int = 1

    def __post_init__(self) -> None:
        if self.tokens_spent < 1:
            raise ValueError("tokens_spent must be positive")


@dataclass(frozen=True)
class ProviderResponse:
    documents: tuple[Document, ...]
    tokens_charged: int
    exhausted: bool

    def __post_init__(self) -> None:
        if len(self.documents) > DOCS_PER_TOKEN * self.tokens_charged:
            raise ValueError("response exceeds the per-token document cap")


class SearchProvider(ABC):
    """Contract all providers implement; fetch is serialized per run."""

    @abstractmethod
    def fetch(self, request: ProviderRequest, budget: TokenBudget) -> ProviderResponse:
        """Execute one search, charging the budget. Raises BudgetExhausted,
        MalformedQuery or QueryTooLong without returning documents."""


class SimulatedProvider(SearchProvider):
    """Serves a hidden corpus with the engine's own matching semantics.

    Results come back newest-first (descending timestamp, then id) and are
    de-duplicated across the whole run: once returned, a document is never
    returned again by this instance, whatever the query.
    """

    def __init__(self, hidden_docs: Sequence[Document], query_limit: int = QUERY_LENGTH_LIMIT):
        self._index = index_corpus(hidden_docs)
        self._bitmaps = PhraseBitmaps(self._index.vectors)
        self._query_limit = query_limit
        self._served: set[str] = set()
        docs = self._index.documents
        self._order = sorted(
            range(len(docs)),
            key=lambda j: (-(docs[j].fetched_at or 0.0), docs[j].id),
        )

    def fetch(self, request: ProviderRequest, budget: TokenBudget) -> ProviderResponse:
        if len(request.content_query) > self._query_limit:
            raise QueryTooLong(
                f"content query is {len(request.content_query)} chars, "
                f"limit {self._query_limit}"
            )
        query = self._parse_query(request.content_query)
        if budget.remaining < request.tokens_spent:
            raise BudgetExhausted(
                f"{request.tokens_spent} token(s) requested, {budget.remaining} left"
            )

        mask = self._bitmaps.match_mask(query, unknown_ids_absent=True)
        since, until = _timestamp_window(request.metadata_query)
        docs = self._index.documents
        candidates = []
        for j in self._order:
            if not mask >> j & 1:
                continue
            doc = docs[j]
            if doc.id in self._served:
                continue
            stamp = doc.fetched_at or 0.0
            if since is not None and stamp < since:
                continue
            if until is not None and stamp > until:
                continue
            candidates.append(doc)

        budget.charge(request.tokens_spent)
        cap = DOCS_PER_TOKEN * request.tokens_spent
        returned = candidates[:cap]
        self._served.update(doc.id for doc in returned)
        out = tuple(
            replace(doc, source=Source.PROVIDER_FETCH, label=Label.UNLABELED)
            for doc in returned
        )
        return ProviderResponse(
            documents=out,
            tokens_charged=request.tokens_spent,
            exhausted=len(candidates) <= cap,
        )

    def _parse_query(self, content_query: str) -> ClauseQuery:
        if not content_query:
            return ClauseQuery(())  # match-all sentinel
        try:
            ast = parse(content_query)
        except QuerySyntaxError as exc:
            raise MalformedQuery(str(exc)) from exc
        # phrases the hidden corpus has never seen simply never match
        return normalize(ast, self._index.vocabulary, unknown_as_absent=True)


def _timestamp_window(metadata_query: str) -> tuple[float | None, float | None]:
    """The only metadata the simulation interprets: since=<ts>&until=<ts>."""
    if not metadata_query:
        return None, None
    fields = parse_qs(metadata_query)

    def first_float(key: str) -> float | None:
        values = fields.get(key)
        if not values:
            return None
        try:
            return float(values[0])
        except ValueError:
            return None

    return first_float("since"), first_float("until")


Labeler = Callable[[Sequence[Document]], None]


def ingest_response(response: ProviderResponse, store: CorpusStore, labeler: Labeler) -> int:
    """Fold fetched documents into the local database.

    Documents whose id already exists are skipped; the rest are appended as a
    new index snapshot and handed to the labeler (an oracle labels them on the
    spot, an interactive labeler queues them for a human). Returns the number
    of appended documents.
    """
    existing = store.snapshot.doc_ids()
    fresh = [doc for doc in response.documents if doc.id not in existing]
    if fresh:
        store.append(fresh)
        labeler(fresh)
    return len(fresh)


REAL_ADAPTER_CONTRACT = """\
Real-provider adapter contract (HTTP, JSON bodies):

  POST <endpoint>/search
  request body  {"content_query": str (<= 1024 chars),
                 "metadata_query": str,
                 "tokens": int >= 1}
  response body {"documents": [{"id": str, "text": str,
                                "fetched_at": float | null}, ...],
                 "tokens_charged": int,
                 "exhausted": bool}

  Constraints mirror ProviderRequest/ProviderResponse: at most 500 documents
  per token charged; HTTP 402 maps to BudgetExhausted, 400 to MalformedQuery,
  414 to QueryTooLong. Rate-limit responses (429) must be retried with
  exponential backoff before surfacing an error; pagination, if the service
  has it, is hidden behind the per-token cap.
"""


class RealProviderAdapter(SearchProvider):
    """Placeholder for a live search service; ships disabled.

    See REAL_ADAPTER_CONTRACT for the wire format an implementation must
    speak. Instantiating is allowed (so configuration can be validated);
    fetching is not.
    """

    def __init__(self, endpoint: str, api_key: str | None = None):
        self.endpoint = endpoint
        self.api_key = api_key

    def fetch(self, request: ProviderRequest, budget: TokenBudget) -> ProviderResponse:
        raise NotImplementedError(
            "live provider access is disabled in this build; "
            "see REAL_ADAPTER_CONTRACT for the adapter wire format"
        )
