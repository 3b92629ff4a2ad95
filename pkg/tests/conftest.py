import random

import pytest

from queryevolve.corpus import Phrase, VocabularyIndex
from queryevolve.query import ClauseQuery, Literal


def make_vocab(size: int, multi_token_every: int = 0) -> VocabularyIndex:
    """A synthetic vocabulary with descending fake frequencies.

    With ``multi_token_every`` > 0, every k-th entry is a two-token phrase so
    quoting paths get exercised.
    """
    entries = []
    for i in range(size):
        if multi_token_every and i and i % multi_token_every == 0:
            phrase = Phrase((f"p{i:03d}", "extra"))
        else:
            phrase = Phrase((f"p{i:03d}",))
        entries.append((phrase, size - i + 1))
    return VocabularyIndex(entries)


def random_genome(rng: random.Random, vocab_size: int, max_len: int = 12) -> tuple[int, ...]:
    length = rng.randrange(max_len + 1)
    out = []
    for _ in range(length):
        if rng.random() < 0.2:
            out.append(0)
        else:
            value = rng.randrange(1, vocab_size + 1)
            out.append(-value if rng.random() < 0.3 else value)
    return tuple(out)


def random_clause_query(
    rng: random.Random, vocab_size: int, max_clauses: int = 4, max_literals: int = 3
) -> ClauseQuery:
    clauses = []
    for _ in range(rng.randrange(max_clauses + 1)):
        literals = frozenset(
            Literal(rng.randrange(vocab_size), rng.random() < 0.3)
            for _ in range(rng.randrange(max_literals + 1))
        )
        clauses.append(literals)
    return ClauseQuery(tuple(clauses))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
