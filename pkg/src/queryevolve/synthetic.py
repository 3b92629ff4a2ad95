"""Synthetic labeled corpora with a planted ground-truth query.

Documents are token sequences drawn from a Zipf-weighted pool. A planted
clause query over specific tokens assigns the ground-truth labels, so runs
against these corpora have an exact notion of relevance.

Every content token is separated by a document-unique filler token, which
keeps any 2- or 3-gram from ever recurring across documents: the built
vocabulary is then exactly the content unigrams, a size the generator
controls.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import Document, Label, Phrase, VocabularyIndex
from .query import ClauseQuery, Literal, UnknownPhrase


@dataclass(frozen=True)
class PlantedQuery:
    """Ground-truth clause query expressed over token strings."""

    clauses: tuple[tuple[tuple[str, bool], ...], ...]

    def matches_tokens(self, tokens: frozenset[str] | set[str]) -> bool:
        return all(
            any((token in tokens) != negated for token, negated in clause)
            for clause in self.clauses
        )

    def to_clause_query(self, vocab: VocabularyIndex) -> ClauseQuery:
        clauses = []
        for clause in self.clauses:
            literals = set()
            for token, negated in clause:
                pid = vocab.get(Phrase((token,)))
                if pid is None:
                    raise UnknownPhrase(token)
                literals.add(Literal(pid, negated))
            clauses.append(frozenset(literals))
        return ClauseQuery(tuple(clauses))

    def to_query_string(self) -> str:
        rendered = []
        for clause in self.clauses:
            parts = [
                f"(NOT {token})" if negated and len(clause) > 1
                else f"NOT {token}" if negated
                else token
                for token, negated in clause
            ]
            rendered.append(" OR ".join(parts))
        if len(rendered) == 1:
            return rendered[0]
        return " AND ".join(f"({text})" for text in rendered)


def default_planted_query() -> PlantedQuery:
    """The stock 2-clause / 4-literal target used by benchmarks."""
    return PlantedQuery((
        ((_token(2), False), (_token(5), False)),
        ((_token(3), False), (_token(8), False)),
    ))


@dataclass
class SyntheticSpec:
    """Knobs for corpus generation.

    ``topic_rate`` docs are drawn as on-topic: they get one token from each
    target clause with high probability, which concentrates relevance and
    gives partial queries a gradient to climb. The rest are background noise
    that still hits target tokens at their natural Zipf rates.
    """

    n_docs: int = 5000
    vocab_size: int = 500
    zipf_exponent: float = 0.8
    min_tokens: int = 6
    max_tokens: int = 12
    topic_rate: float = 0.18
    topic_dropout: float = 0.10
    seed: int = 0
    id_prefix: str = "d"
    target: PlantedQuery = field(default_factory=default_planted_query)


def _token(rank: int) -> str:
    return f"t{rank:03d}"


class _Zipf:
    def __init__(self, size: int, exponent: float):
        self.size = size
        weights = [(rank + 1) ** -exponent for rank in range(size)]
        total = sum(weights)
        self.cumulative = []
        acc = 0.0
        for w in weights:
            acc += w / total
            self.cumulative.append(acc)

    def draw(self, rng: random.Random) -> int:
        x = rng.random()
        lo, hi = 0, self.size - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.cumulative[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        return lo


def generate_corpus(spec: SyntheticSpec) -> tuple[list[Document], PlantedQuery]:
    """Generate labeled documents plus the planted query that labeled them."""
    rng = random.Random(spec.seed)
    zipf = _Zipf(spec.vocab_size, spec.zipf_exponent)
    positive_clause_tokens = [
        [token for token, negated in clause if not negated]
        for clause in spec.target.clauses
    ]

    token_lists: list[list[str]] = []
    for _ in range(spec.n_docs):
        length = rng.randint(spec.min_tokens, spec.max_tokens)
        tokens = [_token(zipf.draw(rng)) for _ in range(length)]
        if rng.random() < spec.topic_rate:
            # on-topic: plant one positive token per clause, with dropout;
            # the first listed token dominates so partial queries still score
            for choices in positive_clause_tokens:
                if choices and rng.random() >= spec.topic_dropout:
                    pick = 0 if len(choices) == 1 or rng.random() < 0.8 else \
                        rng.randrange(1, len(choices))
                    tokens[rng.randrange(len(tokens))] = choices[pick]
        token_lists.append(tokens)

    # every content token must reach document frequency 2 so the built
    # vocabulary has exactly vocab_size entries
    df: dict[str, int] = {}
    for tokens in token_lists:
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1
    for rank in range(spec.vocab_size):
        token = _token(rank)
        while df.get(token, 0) < 2:
            victim = token_lists[rng.randrange(spec.n_docs)]
            if token in victim:
                continue
            victim.append(token)
            df[token] = df.get(token, 0) + 1

    docs = []
    for i, tokens in enumerate(token_lists):
        label = (
            Label.RELEVANT if spec.target.matches_tokens(set(tokens)) else Label.IRRELEVANT
        )
        docs.append(
            Document(
                id=f"{spec.id_prefix}{i:05d}",
                text=_weave_fillers(tokens, f"{spec.id_prefix}{i}"),
                label=label,
                fetched_at=float(i),
            )
        )
    return docs, spec.target


def _weave_fillers(tokens: list[str], doc_key: str) -> str:
    # fillers carry the corpus prefix so documents from separately generated
    # corpora never share a 2/3-gram either
    parts = []
    for slot, token in enumerate(tokens):
        parts.append(token)
        if slot < len(tokens) - 1:
            parts.append(f"x{doc_key}y{slot}")
    return " ".join(parts)
