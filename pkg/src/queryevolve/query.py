"""Clause-structured queries: AST parsing, normalization, genome codec, rendering.

A clause-structured query is a conjunction of clauses, each clause a
disjunction of possibly-negated phrases (strict operator order AND < OR <
NOT). Arbitrary boolean query strings are parsed to an AST and rearranged into
this form by pushing NOT to the leaves and distributing OR over AND.

Genomes encode these queries as signed-integer sequences: value v > 0 is the
positive literal for phrase id v - 1, v < 0 the negated literal for id -v - 1,
and 0 separates clauses.

Input grammar (keywords case-insensitive)::

    query  := or
    or     := and ("OR" and)*
    and    := unary ("AND" unary)*
    unary  := "NOT" unary | "(" query ")" | PHRASE
    PHRASE := quoted string | bare word
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Union

from .corpus import MAX_NGRAM, Phrase, VocabularyIndex, tokenize

QUERY_LENGTH_LIMIT = 1024
DEFAULT_CLAUSE_CAP = 64

#: Serialized form of a query with no non-empty clauses; matches everything.
MATCH_ALL = ""


class QuerySyntaxError(ValueError):
    """Malformed query string; ``offset`` is a byte offset into the UTF-8 input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownPhrase(KeyError):
    """A query phrase is not in the vocabulary."""

    def __init__(self, text: str):
        super().__init__(text)
        self.text = text

    def __str__(self) -> str:
        return f"phrase not in vocabulary: {self.text!r}"


class BlowupLimitExceeded(ValueError):
    """Distribution would exceed the configured clause count cap."""


class PhraseIdOutOfRange(IndexError):
    """A literal references a phrase id outside the vocabulary."""


class LengthExceeded(ValueError):
    """A serialized query is longer than the provider limit."""

    def __init__(self, actual: int, limit: int):
        super().__init__(f"serialized query is {actual} chars, limit {limit}")
        self.actual = actual
        self.limit = limit


class EmptyQueryWarning(UserWarning):
    """A query with zero non-empty clauses serialized to the match-all sentinel."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class PhraseNode:
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class NotNode:
    child: "QueryAst"


@dataclass(frozen=True)
class AndNode:
    children: tuple["QueryAst", ...]


@dataclass(frozen=True)
class OrNode:
    children: tuple["QueryAst", ...]


QueryAst = Union[PhraseNode, NotNode, AndNode, OrNode]


class _Token(NamedTuple):
    kind: str  # LPAREN RPAREN AND OR NOT PHRASE END
    tokens: tuple[str, ...]
    offset: int  # byte offset of the lexeme start


_KEYWORDS = {"and": "AND", "or": "OR", "not": "NOT"}
_BREAK_CHARS = set('()"')


def _lex(text: str) -> list[_Token]:
    out: list[_Token] = []
    i = 0
    n = len(text)
    # byte offset tracks the UTF-8 encoding of everything consumed so far
    offset = 0

    def advance(chunk: str) -> None:
        nonlocal offset
        offset += len(chunk.encode("utf-8"))

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(ch)
            i += 1
            continue
        start = offset
        if ch == "(":
            out.append(_Token("LPAREN", (), start))
            advance(ch)
            i += 1
        elif ch == ")":
            out.append(_Token("RPAREN", (), start))
            advance(ch)
            i += 1
        elif ch == '"':
            end = text.find('"', i + 1)
            if end < 0:
                raise QuerySyntaxError("unterminated quote", start)
            inner = text[i + 1:end]
            toks = tokenize(inner)
            if not toks:
                raise QuerySyntaxError("empty quotes", start)
            out.append(_Token("PHRASE", tuple(toks), start))
            advance(text[i:end + 1])
            i = end + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in _BREAK_CHARS:
                j += 1
            word = text[i:j]
            keyword = _KEYWORDS.get(word.lower())
            if keyword:
                out.append(_Token(keyword, (), start))
            else:
                toks = tokenize(word)
                if not toks:
                    raise QuerySyntaxError(f"not a phrase: {word!r}", start)
                out.append(_Token("PHRASE", tuple(toks), start))
            advance(word)
            i = j
    out.append(_Token("END", (), offset))
    return out


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse_query(self) -> QueryAst:
        node = self.parse_or()
        tok = self.peek()
        if tok.kind != "END":
            if tok.kind == "RPAREN":
                raise QuerySyntaxError("unbalanced parenthesis", tok.offset)
            raise QuerySyntaxError(f"unexpected {tok.kind}", tok.offset)
        return node

    def parse_or(self) -> QueryAst:
        parts = [self.parse_and()]
        while self.peek().kind == "OR":
            self.next()
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else OrNode(tuple(parts))

    def parse_and(self) -> QueryAst:
        parts = [self.parse_unary()]
        while self.peek().kind == "AND":
            self.next()
            parts.append(self.parse_unary())
        return parts[0] if len(parts) == 1 else AndNode(tuple(parts))

    def parse_unary(self) -> QueryAst:
        tok = self.next()
        if tok.kind == "NOT":
            return NotNode(self.parse_unary())
        if tok.kind == "LPAREN":
            node = self.parse_or()
            closing = self.next()
            if closing.kind != "RPAREN":
                raise QuerySyntaxError("unbalanced parenthesis", closing.offset)
            return node
        if tok.kind == "PHRASE":
            return PhraseNode(tok.tokens)
        if tok.kind == "END":
            raise QuerySyntaxError("dangling operator or empty query", tok.offset)
        raise QuerySyntaxError(f"unexpected {tok.kind}", tok.offset)


def parse(query_string: str) -> QueryAst:
    """Parse a boolean query string (precedence NOT > AND > OR)."""
    return _Parser(_lex(query_string)).parse_query()


# ---------------------------------------------------------------------------
# Clause-structured form


class Literal(NamedTuple):
    phrase_id: int
    negated: bool


Clause = frozenset  # frozenset[Literal]


@dataclass(frozen=True)
class ClauseQuery:
    """Conjunction of clauses; each clause is a set of signed literals.

    Empty clauses are legal and vacuously true: they exist as staging points
    for mutation, not as match-nothing traps. A query with zero clauses
    matches every document.
    """

    clauses: tuple[frozenset[Literal], ...] = ()

    def non_empty_clauses(self) -> tuple[frozenset[Literal], ...]:
        return tuple(c for c in self.clauses if c)

    def max_phrase_id(self) -> int:
        """Largest phrase id referenced, or -1 for a literal-free query."""
        ids = [lit.phrase_id for clause in self.clauses for lit in clause]
        return max(ids) if ids else -1

    def to_json(self) -> str:
        clauses = [
            [{"id": lit.phrase_id, "neg": lit.negated} for lit in sorted(clause)]
            for clause in self.clauses
        ]
        return json.dumps({"clauses": clauses})

    @classmethod
    def from_json(cls, data: str) -> "ClauseQuery":
        raw = json.loads(data)
        return cls(tuple(
            frozenset(Literal(int(lit["id"]), bool(lit["neg"])) for lit in clause)
            for clause in raw["clauses"]
        ))


def _to_nnf(node: QueryAst, negated: bool) -> QueryAst:
    """Push negations down to the leaves, cancelling double negations."""
    if isinstance(node, NotNode):
        return _to_nnf(node.child, not negated)
    if isinstance(node, PhraseNode):
        return NotNode(node) if negated else node
    if isinstance(node, AndNode):
        children = tuple(_to_nnf(c, negated) for c in node.children)
        return OrNode(children) if negated else AndNode(children)
    if isinstance(node, OrNode):
        children = tuple(_to_nnf(c, negated) for c in node.children)
        return AndNode(children) if negated else OrNode(children)
    raise TypeError(f"not an AST node: {node!r}")


class _IdResolver:
    """Phrase -> id lookup, optionally inventing ids for unknown phrases.

    With ``unknown_as_absent`` the ids n, n+1, ... are handed out (in first
    encounter order) to phrases missing from the vocabulary; such literals can
    never be satisfied positively, which is exactly how a corpus that has
    never seen the phrase behaves.
    """

    def __init__(self, vocab: VocabularyIndex, unknown_as_absent: bool):
        self.vocab = vocab
        self.unknown_as_absent = unknown_as_absent
        self.virtual: dict[tuple[str, ...], int] = {}

    def resolve(self, tokens: tuple[str, ...]) -> int:
        if 1 <= len(tokens) <= MAX_NGRAM:
            pid = self.vocab.get(Phrase(tokens))
            if pid is not None:
                return pid
        if not self.unknown_as_absent:
            raise UnknownPhrase(" ".join(tokens))
        return self.virtual.setdefault(tokens, self.vocab.size + len(self.virtual))


def _distribute(node: QueryAst, resolver: _IdResolver, cap: int) -> list[frozenset[Literal]]:
    if isinstance(node, PhraseNode):
        return [frozenset({Literal(resolver.resolve(node.tokens), False)})]
    if isinstance(node, NotNode):
        # NNF guarantees the child is a leaf here
        assert isinstance(node.child, PhraseNode)
        return [frozenset({Literal(resolver.resolve(node.child.tokens), True)})]
    if isinstance(node, AndNode):
        clauses: list[frozenset[Literal]] = []
        for child in node.children:
            clauses.extend(_distribute(child, resolver, cap))
            if len(clauses) > cap:
                raise BlowupLimitExceeded(f"more than {cap} clauses")
        return clauses
    if isinstance(node, OrNode):
        acc: list[frozenset[Literal]] = [frozenset()]
        for child in node.children:
            child_clauses = _distribute(child, resolver, cap)
            if len(acc) * len(child_clauses) > cap:
                raise BlowupLimitExceeded(f"more than {cap} clauses")
            acc = [a | c for a in acc for c in child_clauses]
        return acc
    raise TypeError(f"not an AST node: {node!r}")


def normalize(
    ast: QueryAst,
    vocab: VocabularyIndex,
    max_clauses: int = DEFAULT_CLAUSE_CAP,
    unknown_as_absent: bool = False,
) -> ClauseQuery:
    """Rearrange an AST into an equivalent clause-structured query.

    NOTs move to the leaves via De Morgan's laws and ORs distribute over ANDs;
    the result is logically equivalent to the input on every phrase-presence
    assignment. Distribution is worst-case exponential, so exceeding
    ``max_clauses`` raises BlowupLimitExceeded rather than truncating.
    """
    resolver = _IdResolver(vocab, unknown_as_absent)
    clauses = _distribute(_to_nnf(ast, False), resolver, max_clauses)
    return ClauseQuery(tuple(clauses))


# ---------------------------------------------------------------------------
# Genome codec

Genome = tuple[int, ...]


def genome_is_valid(seq: Iterable[int], vocab_size: int) -> bool:
    return all(abs(v) <= vocab_size for v in seq)


def decode(genome: Iterable[int], vocab_size: int | None = None) -> ClauseQuery:
    """Interpret a signed-integer sequence as a clause-structured query.

    The sequence splits on zeros; each segment (possibly empty) becomes one
    clause. An empty genome has zero clauses. With ``vocab_size`` given,
    magnitudes above it raise PhraseIdOutOfRange.
    """
    seq = tuple(genome)
    if not seq:
        return ClauseQuery(())
    clauses: list[frozenset[Literal]] = []
    current: set[Literal] = set()
    for value in seq:
        if value == 0:
            clauses.append(frozenset(current))
            current = set()
            continue
        if vocab_size is not None and abs(value) > vocab_size:
            raise PhraseIdOutOfRange(f"genome value {value} exceeds vocabulary size {vocab_size}")
        current.add(Literal(abs(value) - 1, value < 0))
    clauses.append(frozenset(current))
    return ClauseQuery(tuple(clauses))


def encode(query: ClauseQuery) -> Genome:
    """Inverse of decode, with literals in (id, sign) order inside each clause.

    Note the codec cannot distinguish "no clauses" from "one empty clause";
    both encode to the empty genome, which decodes to zero clauses.
    """
    segments: list[list[int]] = [
        [
            (-lit.phrase_id - 1) if lit.negated else (lit.phrase_id + 1)
            for lit in sorted(clause, key=lambda l: (l.negated, l.phrase_id))
        ]
        for clause in query.clauses
    ]
    out: list[int] = []
    for i, segment in enumerate(segments):
        if i:
            out.append(0)
        out.extend(segment)
    return tuple(out)


# ---------------------------------------------------------------------------
# Rendering


def _render_phrase(vocab: VocabularyIndex, phrase_id: int) -> str:
    if phrase_id >= vocab.size:
        raise PhraseIdOutOfRange(f"phrase id {phrase_id} exceeds vocabulary size {vocab.size}")
    phrase = vocab.phrase(phrase_id)
    return f'"{phrase.text}"' if len(phrase.tokens) > 1 else phrase.text


def _render_clause(clause: frozenset[Literal], vocab: VocabularyIndex) -> str:
    parts = []
    for lit in sorted(clause, key=lambda l: (l.negated, l.phrase_id)):
        text = _render_phrase(vocab, lit.phrase_id)
        if lit.negated:
            text = f"(NOT {text})" if len(clause) > 1 else f"NOT {text}"
        parts.append(text)
    return " OR ".join(parts)


def serialize(query: ClauseQuery, vocab: VocabularyIndex, limit: int = QUERY_LENGTH_LIMIT) -> str:
    """Render a clause query as a provider query string.

    Empty clauses are dropped. Positive literals render as the phrase (quoted
    when multi-token), negative ones as NOT; clauses join with AND and get
    parenthesized whenever there is more than one. A query with no non-empty
    clauses returns the match-all sentinel "" and raises EmptyQueryWarning.
    Raises LengthExceeded past ``limit`` characters.
    """
    clauses = query.non_empty_clauses()
    if not clauses:
        warnings.warn(
            "query has no non-empty clauses; serialized to match-all sentinel",
            EmptyQueryWarning,
            stacklevel=2,
        )
        return MATCH_ALL
    rendered = [_render_clause(c, vocab) for c in clauses]
    if len(rendered) == 1:
        out = rendered[0]
    else:
        out = " AND ".join(f"({text})" for text in rendered)
    if len(out) > limit:
        raise LengthExceeded(len(out), limit)
    return out
