import random

import pytest
from hypothesis import given, settings, strategies as st

from queryevolve.query import (
    ClauseQuery,
    Literal,
    PhraseIdOutOfRange,
    decode,
    encode,
)

from .conftest import random_genome
from .oracles import split_segments


def clause(*pairs):
    return frozenset(Literal(pid, neg) for pid, neg in pairs)


class TestDecode:
    def test_two_clauses(self):
        got = decode((5, -3, 0, 7))
        assert got.clauses == (clause((4, False), (2, True)), clause((6, False)))

    def test_empty_genome_has_zero_clauses(self):
        assert decode(()).clauses == ()

    def test_two_separators_make_three_empty_clauses(self):
        # locked against the brute-force splitter
        assert split_segments([0, 0]) == [[], [], []]
        assert decode((0, 0)).clauses == (frozenset(), frozenset(), frozenset())

    def test_split_convention_matches_oracle(self, rng):
        for _ in range(500):
            genome = random_genome(rng, vocab_size=9)
            segments = split_segments(list(genome))
            got = decode(genome)
            assert len(got.clauses) == len(segments)
            for seg, cl in zip(segments, got.clauses):
                expected = {Literal(abs(v) - 1, v < 0) for v in seg}
                assert cl == expected

    def test_out_of_range_value(self):
        with pytest.raises(PhraseIdOutOfRange):
            decode((11,), vocab_size=10)
        with pytest.raises(PhraseIdOutOfRange):
            decode((-11,), vocab_size=10)
        assert decode((10,), vocab_size=10).clauses == (clause((9, False)),)


class TestEncode:
    def test_single_positive(self):
        assert encode(ClauseQuery((clause((0, False)),))) == (1,)

    def test_inverse_of_decode_example(self):
        query = ClauseQuery((clause((4, False), (2, True)), clause((6, False))))
        assert encode(query) == (5, -3, 0, 7)

    def test_zero_clauses(self):
        assert encode(ClauseQuery(())) == ()

    def test_empty_clauses_become_separators(self):
        query = ClauseQuery((clause((0, False)), frozenset(), clause((1, True))))
        assert encode(query) == (1, 0, 0, -2)


@given(st.integers(0, 2**32))
@settings(max_examples=500)
def test_codec_round_trip(seed):
    genome = random_genome(random.Random(seed), vocab_size=14)
    query = decode(genome)
    again = decode(encode(query))
    assert again.clauses == query.clauses
