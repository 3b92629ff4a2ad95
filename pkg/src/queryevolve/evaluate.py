"""Query evaluation against bit-packed corpora, confusion counts, and loss.

A literal is satisfied by a document when its sign agrees with the phrase's
presence (boolean equality / XNOR): a positive literal wants the phrase
present, a negative one wants it absent. A clause is satisfied when any of its
literals is; a query matches when every non-empty clause is satisfied. Empty
clauses are vacuously true, and a query with zero clauses matches everything.

Two evaluation routes exist and must agree bit-exactly: per-document bit tests
on the row-major vectors, and word-parallel operations on a phrase-major
transposed bitmap (one integer per phrase, one bit per document).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import DocBitVector, Label, VocabularyIndex, text_ngrams
from .query import ClauseQuery, PhraseIdOutOfRange


class NoLabeledData(ValueError):
    """Loss is undefined: one of the label classes has zero documents."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Match outcomes of a query over the labeled part of a corpus."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def labeled_relevant(self) -> int:
        return self.tp + self.fn

    @property
    def labeled_irrelevant(self) -> int:
        return self.fp + self.tn

    @property
    def false_positive_rate(self) -> float:
        if self.labeled_irrelevant == 0:
            raise NoLabeledData("no labeled-irrelevant documents")
        return self.fp / self.labeled_irrelevant

    @property
    def false_negative_rate(self) -> float:
        if self.labeled_relevant == 0:
            raise NoLabeledData("no labeled-relevant documents")
        return self.fn / self.labeled_relevant

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0


@dataclass(frozen=True)
class LossParams:
    """Loss shape controls.

    ``eps_*`` bias the numerator (how much a zero error rate still costs),
    ``delta_*`` the denominator (how sharply the worst rates blow up), and
    ``lambda_len`` is the mild per-element pressure against genome length.
    """

    eps_fp: float = 0.01
    eps_fn: float = 0.01
    delta_fp: float = 0.05
    delta_fn: float = 0.05
    lambda_len: float = 0.001


def loss_from_rates(f_p: float, f_n: float, genome_length: int, params: LossParams) -> float:
    """(f_p + eps_fp)(f_n + eps_fn) / ((1 + delta_fp - f_p)(1 + delta_fn - f_n)),
    scaled by the length penalty (1 + lambda_len * genome_length).

    When a denominator factor is not positive the query is as bad as queries
    get; +inf keeps it orderable without raising.
    """
    d_fp = 1.0 + params.delta_fp - f_p
    d_fn = 1.0 + params.delta_fn - f_n
    if d_fp <= 0.0 or d_fn <= 0.0:
        return math.inf
    ratio = (f_p + params.eps_fp) * (f_n + params.eps_fn) / (d_fp * d_fn)
    return ratio * (1.0 + params.lambda_len * genome_length)


def loss(counts: ConfusionCounts, genome_length: int, params: LossParams) -> float:
    """Loss of a query with the given confusion counts and genome length.

    Raises NoLabeledData when either label class is empty (the rates would be
    undefined).
    """
    return loss_from_rates(
        counts.false_positive_rate, counts.false_negative_rate, genome_length, params
    )


def matches(query: ClauseQuery, doc: DocBitVector) -> bool:
    """Row-route evaluation: does the query match this document's bitmap?"""
    top = query.max_phrase_id()
    if top >= doc.bit_length:
        raise PhraseIdOutOfRange(f"phrase id {top} exceeds bit length {doc.bit_length}")
    words = doc.words
    for clause in query.clauses:
        if not clause:
            continue
        for lit in clause:
            present = words[lit.phrase_id >> 6] >> (lit.phrase_id & 63) & 1
            if bool(present) != lit.negated:
                break
        else:
            return False
    return True


class PhraseBitmaps:
    """Phrase-major transpose of a vector set: one doc-bitmap int per phrase.

    Column i has bit j set iff document j (in vector order) contains phrase i.
    Recomputable from the row form at any time; used for word-parallel clause
    evaluation.
    """

    def __init__(self, vectors: Sequence[DocBitVector]):
        self.doc_ids = [v.doc_id for v in vectors]
        self.n_docs = len(vectors)
        self.n_phrases = vectors[0].bit_length if vectors else 0
        self.all_mask = (1 << self.n_docs) - 1
        cols = [0] * self.n_phrases
        for j, vec in enumerate(vectors):
            doc_bit = 1 << j
            row = vec.as_int()
            while row:
                low = row & -row
                cols[low.bit_length() - 1] |= doc_bit
                row ^= low
        self.cols = cols

    def match_mask(self, query: ClauseQuery, unknown_ids_absent: bool = False) -> int:
        """Bitmap of matching documents (bit j = doc j matches).

        With ``unknown_ids_absent`` phrase ids beyond the transposed
        vocabulary count as never-present instead of raising; the simulated
        provider relies on this for queries mentioning phrases its corpus has
        never seen.
        """
        top = query.max_phrase_id()
        if top >= self.n_phrases and not unknown_ids_absent:
            raise PhraseIdOutOfRange(f"phrase id {top} exceeds vocabulary size {self.n_phrases}")
        all_mask = self.all_mask
        mask = all_mask
        for clause in query.clauses:
            if not clause:
                continue
            clause_mask = 0
            for lit in clause:
                if lit.phrase_id < self.n_phrases:
                    col = self.cols[lit.phrase_id]
                else:
                    col = 0
                clause_mask |= (col ^ all_mask) if lit.negated else col
                if clause_mask == all_mask:
                    break
            mask &= clause_mask
            if not mask:
                break
        return mask


class CorpusEvaluator:
    """Bit-parallel evaluator bound to one vector set and one label assignment."""

    def __init__(self, vectors: Sequence[DocBitVector], labels: Mapping[str, Label]):
        self.bitmaps = PhraseBitmaps(vectors)
        relevant = 0
        irrelevant = 0
        for j, doc_id in enumerate(self.bitmaps.doc_ids):
            label = labels.get(doc_id, Label.UNLABELED)
            if label is Label.RELEVANT:
                relevant |= 1 << j
            elif label is Label.IRRELEVANT:
                irrelevant |= 1 << j
        self.relevant_mask = relevant
        self.irrelevant_mask = irrelevant
        self.n_relevant = relevant.bit_count()
        self.n_irrelevant = irrelevant.bit_count()

    def counts(self, query: ClauseQuery) -> ConfusionCounts:
        mask = self.bitmaps.match_mask(query)
        tp = (mask & self.relevant_mask).bit_count()
        fp = (mask & self.irrelevant_mask).bit_count()
        return ConfusionCounts(
            tp=tp, fp=fp, tn=self.n_irrelevant - fp, fn=self.n_relevant - tp
        )


def evaluate_corpus(
    query: ClauseQuery,
    vectors: Sequence[DocBitVector],
    labels: Mapping[str, Label],
    use_cache: bool = True,
) -> ConfusionCounts:
    """Confusion counts of a query over the labeled documents of a corpus.

    Unlabeled documents are excluded from all four counts. ``use_cache``
    selects the phrase-major route; the per-document route is kept as the
    independent slow path and the two always agree.
    """
    if use_cache:
        return CorpusEvaluator(vectors, labels).counts(query)
    tp = fp = tn = fn = 0
    for vec in vectors:
        label = labels.get(vec.doc_id, Label.UNLABELED)
        if label is Label.UNLABELED:
            continue
        hit = matches(query, vec)
        if label is Label.RELEVANT:
            tp, fn = (tp + 1, fn) if hit else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if hit else (fp, tn + 1)
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def matches_text(query: ClauseQuery, vocab: VocabularyIndex, text: str) -> bool:
    """Evaluate a query directly against raw text via its n-gram set.

    Set-membership route, independent of any bit packing; used by oracle
    labelers and ground-truth generation.
    """
    grams = text_ngrams(text)
    for clause in query.clauses:
        if not clause:
            continue
        for lit in clause:
            present = vocab.phrase(lit.phrase_id) in grams
            if present != lit.negated:
                break
        else:
            return False
    return True
