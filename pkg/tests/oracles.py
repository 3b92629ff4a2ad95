"""Independent reference implementations used to check the real ones.

Everything here is deliberately written from the contracts, not by importing
package internals: set-scanning instead of bit-packing, recursive truth
evaluation instead of clause normalization, string splitting instead of the
genome codec.
"""

from __future__ import annotations

from queryevolve.query import (
    AndNode,
    ClauseQuery,
    NotNode,
    OrNode,
    PhraseNode,
    QueryAst,
)


def naive_tokenize(text: str) -> list[str]:
    """Re-statement of the tokenization rules: lowercase, whitespace split,
    keep leading #/@ and internal hyphens, drop other punctuation."""
    out = []
    for raw in text.lower().split():
        kept = []
        for i, ch in enumerate(raw):
            if ch.isalnum():
                kept.append(ch)
            elif ch in "#@" and i == 0:
                kept.append(ch)
            elif ch == "-":
                kept.append(ch)
        word = "".join(kept)
        if word.startswith(("#", "@")):
            word = word[0] + word[1:].strip("-")
        else:
            word = word.strip("-")
        if word and word not in ("#", "@"):
            out.append(word)
    return out


def naive_ngram_strings(text: str) -> set[str]:
    """All 1-3 gram strings of a text, joined with single spaces."""
    tokens = naive_tokenize(text)
    grams = set()
    for size in (1, 2, 3):
        for i in range(len(tokens) - size + 1):
            grams.add(" ".join(tokens[i:i + size]))
    return grams


def naive_matches(query: ClauseQuery, phrase_texts: list[str], text: str) -> bool:
    """Evaluate a clause query against raw text by n-gram set scanning.

    ``phrase_texts[i]`` is the text of vocabulary phrase i.
    """
    grams = naive_ngram_strings(text)
    for clause in query.clauses:
        if not clause:
            continue
        satisfied = False
        for lit in clause:
            present = phrase_texts[lit.phrase_id] in grams
            if present != lit.negated:
                satisfied = True
                break
        if not satisfied:
            return False
    return True


def eval_ast(node: QueryAst, presence: dict[tuple[str, ...], bool]) -> bool:
    """Truth-table evaluation of an AST under a phrase-presence assignment."""
    if isinstance(node, PhraseNode):
        return presence[node.tokens]
    if isinstance(node, NotNode):
        return not eval_ast(node.child, presence)
    if isinstance(node, AndNode):
        return all(eval_ast(c, presence) for c in node.children)
    if isinstance(node, OrNode):
        return any(eval_ast(c, presence) for c in node.children)
    raise TypeError(node)


def eval_clause_query(query: ClauseQuery, present_ids: set[int]) -> bool:
    """Clause semantics straight from the definition: every non-empty clause
    needs one literal whose sign equals the phrase's presence (XNOR)."""
    for clause in query.clauses:
        if not clause:
            continue
        if not any((lit.phrase_id in present_ids) != lit.negated for lit in clause):
            return False
    return True


def split_segments(seq: list[int]) -> list[list[int]]:
    """Brute-force splitter fixing the separator convention: k zeros make
    k + 1 segments; the empty sequence has no segments at all."""
    if not seq:
        return []
    segments: list[list[int]] = [[]]
    for value in seq:
        if value == 0:
            segments.append([])
        else:
            segments[-1].append(value)
    return segments
