"""Corpus ingestion: tokenization, n-gram vocabulary, bit-packed document vectors.

The local database has two parts: a frequency-ordered vocabulary of all
1/2/3-grams occurring in at least two documents, and one presence bitmap per
document over that vocabulary, packed into 64-bit words. Vocabulary ids are
append-only: growing the corpus never renumbers an existing phrase, so integer
genomes that reference ids stay valid across appends.
"""

from __future__ import annotations

import threading
from array import array
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Sequence

MAX_NGRAM = 3

_TOKEN_PREFIXES = "#@"


class Label(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"
    UNLABELED = "unlabeled"


class Source(str, Enum):
    SEED_CORPUS = "seed-corpus"
    PROVIDER_FETCH = "provider-fetch"


class DuplicateDocumentId(ValueError):
    """A document id collides with one already in the corpus."""


class EmptyCorpus(ValueError):
    """An index build was attempted on zero documents."""


@dataclass(frozen=True)
class Document:
    """One raw text record with label state and provenance."""

    id: str
    text: str
    label: Label = Label.UNLABELED
    source: Source = Source.SEED_CORPUS
    fetched_at: float | None = None  # UTC seconds

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")


@dataclass(frozen=True, slots=True)
class Phrase:
    """A contiguous 1-3 token n-gram, the atomic matching unit."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.tokens) <= MAX_NGRAM:
            raise ValueError(f"phrase must have 1..{MAX_NGRAM} tokens, got {len(self.tokens)}")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"bad phrase token: {tok!r}")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @classmethod
    def from_text(cls, text: str) -> "Phrase":
        return cls(tuple(text.split(" ")))

    def __str__(self) -> str:
        return self.text


def tokenize(text: str) -> list[str]:
    """Split text into normalized tokens.

    Lowercases, splits on whitespace, and strips punctuation except a leading
    '#' or '@' and internal hyphens (road names like "i-264" stay one token).
    Degenerate input yields an empty list.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        prefix = chunk[0] if chunk[0] in _TOKEN_PREFIXES else ""
        body = chunk[len(prefix):]
        body = "".join(ch for ch in body if ch.isalnum() or ch == "-").strip("-")
        if body:
            tokens.append(prefix + body)
    return tokens


def extract_ngrams(tokens: Sequence[str]) -> set[Phrase]:
    """All contiguous 1-, 2- and 3-grams of a token sequence, as a set."""
    grams: set[Phrase] = set()
    for size in range(1, MAX_NGRAM + 1):
        for i in range(len(tokens) - size + 1):
            grams.add(Phrase(tuple(tokens[i:i + size])))
    return grams


def text_ngrams(text: str) -> frozenset[Phrase]:
    return frozenset(extract_ngrams(tokenize(text)))


def document_ngrams(doc: Document) -> frozenset[Phrase]:
    return text_ngrams(doc.text)


class VocabularyIndex:
    """Frequency-ordered phrase list with a phrase -> id mapping.

    Ids are 0-based positions in the entry list. At build time entries are
    sorted by descending document frequency (ties by phrase text); appended
    entries keep whatever ids they were given and never move.
    """

    __slots__ = ("_entries", "_ids")

    def __init__(self, entries: Iterable[tuple[Phrase, int]] = ()):
        self._entries: list[tuple[Phrase, int]] = list(entries)
        self._ids: dict[Phrase, int] = {p: i for i, (p, _) in enumerate(self._entries)}
        if len(self._ids) != len(self._entries):
            raise ValueError("duplicate phrase in vocabulary entries")

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def size(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[Phrase, int]]:
        return iter(self._entries)

    def __contains__(self, phrase: Phrase) -> bool:
        return phrase in self._ids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VocabularyIndex):
            return NotImplemented
        return self._entries == other._entries

    def phrase(self, phrase_id: int) -> Phrase:
        return self._entries[phrase_id][0]

    def frequency(self, phrase_id: int) -> int:
        return self._entries[phrase_id][1]

    def id_of(self, phrase: Phrase) -> int:
        return self._ids[phrase]

    def get(self, phrase: Phrase) -> int | None:
        return self._ids.get(phrase)

    def entries(self) -> list[tuple[Phrase, int]]:
        return list(self._entries)


WORD_BITS = 64
_WORD_MASK = (1 << WORD_BITS) - 1


@dataclass(frozen=True)
class DocBitVector:
    """Per-document phrase-presence bitmap packed into 64-bit words.

    Bit i is set iff the vocabulary phrase with id i occurs in the document.
    ``words`` holds ceil(bit_length / 64) unsigned 64-bit words, little-endian
    within the vector (bit i lives in word i // 64); bits past ``bit_length``
    are always zero. Treated as immutable after construction.
    """

    doc_id: str
    words: array
    bit_length: int

    def __post_init__(self) -> None:
        expected = (self.bit_length + WORD_BITS - 1) // WORD_BITS
        if len(self.words) != expected:
            raise ValueError(
                f"vector for {self.doc_id!r}: {len(self.words)} words, expected {expected}"
            )

    def test(self, bit: int) -> bool:
        if not 0 <= bit < self.bit_length:
            raise IndexError(f"bit {bit} out of range for length {self.bit_length}")
        return bool(self.words[bit >> 6] >> (bit & 63) & 1)

    def popcount(self) -> int:
        return sum(w.bit_count() for w in self.words)

    def as_int(self) -> int:
        """The bitmap as one arbitrary-precision integer (bit i = phrase i)."""
        return int.from_bytes(self.words.tobytes(), "little")

    @classmethod
    def from_bits(cls, doc_id: str, bits: Iterable[int], bit_length: int) -> "DocBitVector":
        value = 0
        for bit in bits:
            if not 0 <= bit < bit_length:
                raise IndexError(f"bit {bit} out of range for length {bit_length}")
            value |= 1 << bit
        return cls.from_int(doc_id, value, bit_length)

    @classmethod
    def from_int(cls, doc_id: str, value: int, bit_length: int) -> "DocBitVector":
        n_words = (bit_length + WORD_BITS - 1) // WORD_BITS
        words = array("Q", value.to_bytes(n_words * 8, "little") if n_words else b"")
        return cls(doc_id, words, bit_length)


def _vector_for(doc: Document, grams: frozenset[Phrase], vocab: VocabularyIndex) -> DocBitVector:
    ids = (vocab.get(p) for p in grams)
    return DocBitVector.from_bits(doc.id, (i for i in ids if i is not None), vocab.size)


def _check_unique_ids(docs: Sequence[Document], seen: set[str] | None = None) -> None:
    seen = set() if seen is None else set(seen)
    for doc in docs:
        if doc.id in seen:
            raise DuplicateDocumentId(doc.id)
        seen.add(doc.id)


def build_index(corpus: Sequence[Document]) -> tuple[VocabularyIndex, list[DocBitVector]]:
    """Build the vocabulary and one bit vector per document.

    The vocabulary holds exactly the n-grams whose document frequency is >= 2,
    ordered by descending frequency then ascending phrase text. Raises
    EmptyCorpus / DuplicateDocumentId on bad input.
    """
    if not corpus:
        raise EmptyCorpus("cannot build an index from zero documents")
    _check_unique_ids(corpus)

    gram_sets = [document_ngrams(doc) for doc in corpus]
    freq: Counter[Phrase] = Counter()
    for grams in gram_sets:
        freq.update(grams)

    kept = [(p, n) for p, n in freq.items() if n >= 2]
    kept.sort(key=lambda entry: (-entry[1], entry[0].text))
    vocab = VocabularyIndex(kept)
    vectors = [_vector_for(doc, grams, vocab) for doc, grams in zip(corpus, gram_sets)]
    return vocab, vectors


@dataclass(frozen=True)
class CorpusIndex:
    """Immutable snapshot of documents plus their built index.

    Snapshots are safe to read from any thread; appends produce a new snapshot
    with a bumped version, never touching the old one.
    """

    documents: tuple[Document, ...]
    vocabulary: VocabularyIndex
    vectors: tuple[DocBitVector, ...]
    gram_sets: tuple[frozenset[Phrase], ...] = field(repr=False, default=())
    version: int = 0

    @property
    def size(self) -> int:
        return len(self.documents)

    def doc_ids(self) -> set[str]:
        return {d.id for d in self.documents}

    def labels(self) -> dict[str, Label]:
        return {d.id: d.label for d in self.documents}


def index_corpus(corpus: Sequence[Document]) -> CorpusIndex:
    """Build a CorpusIndex snapshot (version 0) from scratch."""
    vocab, vectors = build_index(corpus)
    grams = tuple(document_ngrams(doc) for doc in corpus)
    return CorpusIndex(tuple(corpus), vocab, tuple(vectors), grams, version=0)


def append_documents(index: CorpusIndex, new_docs: Sequence[Document]) -> CorpusIndex:
    """Extend a snapshot with new documents, keeping existing phrase ids fixed.

    N-grams that reach document frequency 2 once the new documents are counted
    are appended after the last existing id (descending combined frequency,
    then phrase text). Existing vectors are widened; a widened vector gains a
    bit when its document contains a phrase that just crossed the threshold.
    """
    _check_unique_ids(new_docs, seen=index.doc_ids())
    if not new_docs:
        return index

    new_gram_sets = [document_ngrams(doc) for doc in new_docs]
    freq: Counter[Phrase] = Counter()
    for grams in index.gram_sets:
        freq.update(grams)
    for grams in new_gram_sets:
        freq.update(grams)

    fresh = [
        (p, n) for p, n in freq.items()
        if n >= 2 and p not in index.vocabulary
    ]
    fresh.sort(key=lambda entry: (-entry[1], entry[0].text))

    entries = [(p, freq[p]) for p, _ in index.vocabulary] + fresh
    vocab = VocabularyIndex(entries)

    old_n = index.vocabulary.size
    vectors: list[DocBitVector] = []
    if vocab.size == old_n:
        vectors.extend(index.vectors)
    else:
        appended_ids = {p: i for i, (p, _) in enumerate(entries[old_n:], start=old_n)}
        for vec, grams in zip(index.vectors, index.gram_sets):
            extra = vec.as_int()
            for phrase, pid in appended_ids.items():
                if phrase in grams:
                    extra |= 1 << pid
            vectors.append(DocBitVector.from_int(vec.doc_id, extra, vocab.size))

    for doc, grams in zip(new_docs, new_gram_sets):
        vectors.append(_vector_for(doc, grams, vocab))

    return CorpusIndex(
        documents=index.documents + tuple(new_docs),
        vocabulary=vocab,
        vectors=tuple(vectors),
        gram_sets=index.gram_sets + tuple(new_gram_sets),
        version=index.version + 1,
    )


class CorpusStore:
    """Single-writer holder for the live CorpusIndex snapshot.

    Readers grab ``.snapshot`` (an immutable value) at any time; ``append``
    serializes writers and swaps the snapshot atomically, so a reader never
    observes a half-applied update.
    """

    def __init__(self, snapshot: CorpusIndex):
        self._snapshot = snapshot
        self._lock = threading.Lock()

    @property
    def snapshot(self) -> CorpusIndex:
        return self._snapshot

    def append(self, new_docs: Sequence[Document]) -> CorpusIndex:
        with self._lock:
            updated = append_documents(self._snapshot, new_docs)
            self._snapshot = updated
            return updated


def relabel(doc: Document, label: Label) -> Document:
    return replace(doc, label=label)
