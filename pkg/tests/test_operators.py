import random
from collections import Counter

import pytest

from queryevolve.engine import (
    EmptyVocabulary,
    GenomeTooShort,
    NoTerms,
    crossover,
    mutate_clause_add,
    mutate_negate,
    mutate_phrase_add,
    mutate_simplify,
    mutate_swap,
    negate_at,
    sample_cut,
    sample_phrase_id,
    swatch_insert,
)
from queryevolve.query import decode

from .conftest import random_genome


class _ScriptedRng(random.Random):
    """Feeds predetermined choices/positions to one operator call."""

    def __init__(self, choices=(), randranges=(), expo=()):
        super().__init__(0)
        self._choices = list(choices)
        self._randranges = list(randranges)
        self._expo = list(expo)

    def choices(self, population, weights=None, k=1):
        return [self._choices.pop(0)]

    def randrange(self, *args):
        return self._randranges.pop(0)

    def expovariate(self, lambd):
        return self._expo.pop(0)


class TestPhraseAdd:
    def test_length_grows_by_one(self, rng):
        for _ in range(200):
            g = random_genome(rng, 9)
            out = mutate_phrase_add(g, 9, rng)
            assert len(out) == len(g) + 1

    def test_inserted_value_is_positive_and_in_range(self, rng):
        for _ in range(300):
            g = random_genome(rng, 9)
            out = mutate_phrase_add(g, 9, rng)
            added = list(Counter(out) - Counter(g))
            assert len(added) == 1
            assert 1 <= added[0] <= 9

    def test_insertion_into_empty_genome(self, rng):
        out = mutate_phrase_add((), 9, rng)
        assert len(out) == 1 and out[0] >= 1

    def test_empty_vocabulary(self, rng):
        with pytest.raises(EmptyVocabulary):
            mutate_phrase_add((1,), 0, rng)

    def test_gamma_zero_is_uniform(self):
        # chi-squared goodness of fit over 10**5 draws
        from scipy.stats import chi2

        rng = random.Random(12345)
        size = 50
        draws = 100_000
        counts = Counter(sample_phrase_id(size, 0.0, rng) for _ in range(draws))
        expected = draws / size
        stat = sum((counts.get(i, 0) - expected) ** 2 / expected for i in range(size))
        assert stat < chi2.ppf(0.999, df=size - 1)

    def test_positive_gamma_favors_frequent(self):
        rng = random.Random(4)
        counts = Counter(sample_phrase_id(100, 0.5, rng) for _ in range(50_000))
        head = sum(counts.get(i, 0) for i in range(10))
        tail = sum(counts.get(i, 0) for i in range(90, 100))
        assert head > tail * 1.5


class TestClauseAdd:
    def test_splits_clause(self):
        out = mutate_clause_add((5, 7), _ScriptedRng(randranges=[1]))
        assert out == (5, 0, 7)
        assert decode(out).clauses == (
            decode((5,)).clauses[0],
            decode((7,)).clauses[0],
        )

    def test_trailing_empty_clause(self):
        out = mutate_clause_add((5,), _ScriptedRng(randranges=[1]))
        assert out == (5, 0)

    def test_empty_genome(self, rng):
        assert mutate_clause_add((), rng) == (0,)

    def test_length_grows_by_one(self, rng):
        for _ in range(200):
            g = random_genome(rng, 9)
            assert len(mutate_clause_add(g, rng)) == len(g) + 1


class TestSwap:
    def test_only_possible_swap(self, rng):
        assert mutate_swap((5, 7), rng) == (7, 5)

    def test_too_short(self, rng):
        with pytest.raises(GenomeTooShort):
            mutate_swap((5,), rng)

    def test_swap_within_clause_is_silent(self, rng):
        g = (3, 5, 7, 0, 2)
        for _ in range(100):
            # force distance 1 inside the first clause
            scripted = _ScriptedRng(randranges=[rng.randrange(2)], expo=[0.0])
            out = mutate_swap(g, scripted, distance_mean=2.0)
            assert decode(out) == decode(g)

    def test_swap_across_separator_changes_clauses(self):
        out = mutate_swap((5, 0, 7), _ScriptedRng(randranges=[0], expo=[0.0]))
        assert out == (0, 5, 7)
        assert decode(out).clauses != decode((5, 0, 7)).clauses
        assert decode(out).clauses[0] == frozenset()

    def test_multiset_preserved(self, rng):
        for _ in range(300):
            g = random_genome(rng, 9)
            if len(g) < 2:
                continue
            out = mutate_swap(g, rng)
            assert Counter(out) == Counter(g)
            assert len(out) == len(g)

    def test_distance_clamped_to_range(self, rng):
        for _ in range(100):
            out = mutate_swap((1, 2), rng, distance_mean=50.0)
            assert out == (2, 1)


class TestNegate:
    def test_singleton(self, rng):
        assert mutate_negate((5,), rng) == (-5,)
        assert mutate_negate((-5,), rng) == (5,)

    def test_separators_immune(self, rng):
        g = (5, 0, 7)
        for _ in range(100):
            out = mutate_negate(g, rng)
            assert out in ((-5, 0, 7), (5, 0, -7))

    def test_no_terms(self, rng):
        with pytest.raises(NoTerms):
            mutate_negate((0, 0), rng)

    def test_involution_at_fixed_position(self, rng):
        for _ in range(300):
            g = random_genome(rng, 9)
            positions = [i for i, v in enumerate(g) if v != 0]
            if not positions:
                continue
            pos = positions[rng.randrange(len(positions))]
            assert negate_at(negate_at(g, pos), pos) == g


class TestSimplify:
    def test_duplicate_within_clause_removed(self):
        assert mutate_simplify((5, 5, 0, 7)) == (5, 0, 7)

    def test_duplicates_across_clauses_kept(self):
        assert mutate_simplify((5, 0, 5)) == (5, 0, 5)

    def test_opposite_signs_are_not_duplicates(self):
        assert mutate_simplify((5, -5)) == (5, -5)

    def test_idempotent(self, rng):
        for _ in range(300):
            g = random_genome(rng, 9)
            once = mutate_simplify(g)
            assert mutate_simplify(once) == once
            assert len(once) <= len(g)

    def test_first_occurrence_kept(self):
        assert mutate_simplify((5, 3, 5, 3, 5)) == (5, 3)


class TestCrossover:
    def test_derived_example_cut_after_zeros(self):
        # cut a=[1,2,0,3] after its 0 (pos 3), b=[4,0,5] after its 0 (pos 2)
        scripted = _ScriptedRng(choices=[3, 2])
        assert crossover((1, 2, 0, 3), (4, 0, 5), scripted) == (1, 2, 0, 5)

    def test_boundary_cuts_can_return_either_parent(self):
        assert crossover((1, 2), (3, 4), _ScriptedRng(choices=[0, 0])) == (3, 4)
        assert crossover((1, 2), (3, 4), _ScriptedRng(choices=[2, 2])) == (1, 2)

    def test_child_is_prefix_plus_suffix(self, rng):
        for _ in range(500):
            a, b = random_genome(rng, 9), random_genome(rng, 9)
            child = crossover(a, b, rng)
            assert any(
                child == a[:i] + b[j:]
                for i in range(len(a) + 1)
                for j in range(len(b) + 1)
            )

    def test_closure_magnitudes_stay_in_range(self, rng):
        for _ in range(500):
            a, b = random_genome(rng, 9), random_genome(rng, 9)
            child = crossover(a, b, rng)
            assert all(abs(v) <= 9 for v in child)

    def test_length_cap_returns_first_parent(self, rng):
        a = tuple([1] * 200)
        b = tuple([2] * 200)
        child = crossover(a, b, rng, max_length=256)
        assert len(child) <= 256 or child == a
        for _ in range(50):
            assert len(crossover(a, b, rng, max_length=256)) <= 256


class TestSwatchInsert:
    def test_derived_example(self):
        # donor [1,0,2,0,3] cut around "2,0" (cuts 2 and 4), host [9] cut at 1
        scripted = _ScriptedRng(choices=[2, 4, 1])
        assert swatch_insert((1, 0, 2, 0, 3), (9,), scripted) == (9, 2, 0)

    def test_empty_swatch_returns_host(self):
        scripted = _ScriptedRng(choices=[2, 2, 0])
        assert swatch_insert((1, 0, 2), (9,), scripted) == (9,)

    def test_empty_host(self):
        scripted = _ScriptedRng(choices=[1, 2, 0])
        assert swatch_insert((1, 0, 2), (), scripted) == (0,)

    def test_length_identity(self, rng):
        for _ in range(500):
            donor, host = random_genome(rng, 9), random_genome(rng, 9)
            child = swatch_insert(donor, host, rng)
            assert len(host) <= len(child) <= len(host) + len(donor)
            assert all(abs(v) <= 9 for v in child)


class TestCutDistribution:
    def test_boundary_positions_favored(self):
        rng = random.Random(0)
        g = (1, 2, 3, 0, 4, 5, 6, 7)
        counts = Counter(sample_cut(g, rng) for _ in range(40_000))
        # boundary cuts: 0, 3, 4 (around the zero) and 8 (end); interior: 2
        interior = counts[2] / 40_000
        for boundary in (0, 3, 4, 8):
            assert counts[boundary] / 40_000 > 2.5 * interior
