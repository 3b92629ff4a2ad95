"""Genetic engine: genome operators, selection loop, checkpoints.

Genomes are signed-integer tuples (see queryevolve.query). The engine applies
five mutation operators (phrase insertion, clause split, swap, negate,
simplify) and two recombination operators (crossover, swatch insertion), all
pure functions over an explicit random.Random. Every stochastic decision is
drawn from that single generator in a fixed order, so a run is a deterministic
function of its seed.
"""

from __future__ import annotations

import functools
import json
import os
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import accumulate
from typing import Callable, Mapping, Sequence

from .corpus import VocabularyIndex
from .query import Genome, LengthExceeded, QUERY_LENGTH_LIMIT, decode, serialize

MAX_GENOME_LENGTH = 256

#: Fixed application order of the mutation pipeline; simplify runs last.
MUTATION_ORDER = ("phrase_add", "clause_add", "swap", "negate", "simplify")

DEFAULT_OPERATOR_RATES: dict[str, float] = {
    "crossover": 0.30,
    "swatch_insert": 0.15,
    "phrase_add": 0.35,
    "clause_add": 0.10,
    "swap": 0.30,
    "negate": 0.20,
    "simplify": 0.20,
}


class EmptyVocabulary(ValueError):
    """Phrase insertion needs at least one vocabulary entry."""


class GenomeTooShort(ValueError):
    """Swap needs at least two elements."""


class NoTerms(ValueError):
    """Negate needs at least one nonzero element."""


class NoServiceableQuery(LookupError):
    """No genome in the population serializes under the length limit."""


class RunStatus(str, Enum):
    RUNNING = "running"
    PAUSED = "paused"
    STOPPED = "stopped"


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 200
    tournament_size: int = 3
    elitism: int = 2
    fetch_every: int = 25
    swap_distance_mean: float = 2.0
    phrase_sample_gamma: float = 0.5
    boundary_cut_weight: float = 4.0
    max_genome_length: int = MAX_GENOME_LENGTH
    rng_seed: int = 0
    operator_rates: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_OPERATOR_RATES)
    )

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")
        if not 0 <= self.elitism <= self.population_size:
            raise ValueError("elitism must fit in the population")
        if self.swap_distance_mean <= 0:
            raise ValueError("swap_distance_mean must be positive")
        unknown = set(self.operator_rates) - set(DEFAULT_OPERATOR_RATES)
        if unknown:
            raise ValueError(f"unknown operators: {sorted(unknown)}")
        for name, rate in self.operator_rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"operator rate {name}={rate} outside [0, 1]")

    def rate(self, name: str) -> float:
        return self.operator_rates.get(name, 0.0)

    def to_dict(self) -> dict:
        return {
            "population_size": self.population_size,
            "tournament_size": self.tournament_size,
            "elitism": self.elitism,
            "fetch_every": self.fetch_every,
            "swap_distance_mean": self.swap_distance_mean,
            "phrase_sample_gamma": self.phrase_sample_gamma,
            "boundary_cut_weight": self.boundary_cut_weight,
            "max_genome_length": self.max_genome_length,
            "rng_seed": self.rng_seed,
            "operator_rates": dict(sorted(self.operator_rates.items())),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "GaConfig":
        return cls(**{k: (dict(v) if k == "operator_rates" else v) for k, v in raw.items()})


@dataclass
class Individual:
    genome: Genome
    cached_loss: float | None = None
    evaluated_against: int | None = None  # eval-context version stamp


@dataclass
class RunState:
    population: list[Individual]
    generation: int = 0
    status: RunStatus = RunStatus.RUNNING
    pending_injections: deque = field(default_factory=deque)


# ---------------------------------------------------------------------------
# Mutation operators


@functools.lru_cache(maxsize=16)
def _phrase_cum_weights(vocab_size: int, gamma: float) -> tuple[float, ...]:
    # rank-power bias: weight of rank r is (r + 1) ** -gamma
    return tuple(accumulate((r + 1) ** -gamma for r in range(vocab_size)))


def sample_phrase_id(vocab_size: int, gamma: float, rng: random.Random) -> int:
    """Draw a phrase id, slightly favoring more frequent (lower-id) phrases."""
    if vocab_size <= 0:
        raise EmptyVocabulary("cannot sample from an empty vocabulary")
    cum = _phrase_cum_weights(vocab_size, gamma)
    return bisect_right(cum, rng.random() * cum[-1])


def mutate_phrase_add(
    g: Genome,
    vocab_size: int,
    rng: random.Random,
    gamma: float = 0.5,
    max_length: int = MAX_GENOME_LENGTH,
) -> Genome:
    """Insert one positive phrase literal at a uniformly random position."""
    if vocab_size <= 0:
        raise EmptyVocabulary("cannot sample from an empty vocabulary")
    if len(g) >= max_length:
        return g
    pos = rng.randrange(len(g) + 1)
    value = sample_phrase_id(vocab_size, gamma, rng) + 1
    return g[:pos] + (value,) + g[pos:]


def mutate_clause_add(g: Genome, rng: random.Random, max_length: int = MAX_GENOME_LENGTH) -> Genome:
    """Insert a zero separator, splitting a clause or opening an empty one."""
    if len(g) >= max_length:
        return g
    pos = rng.randrange(len(g) + 1)
    return g[:pos] + (0,) + g[pos:]


def mutate_swap(g: Genome, rng: random.Random, distance_mean: float = 2.0) -> Genome:
    """Transpose two elements; the separation is exponentially distributed.

    Within a clause this is a silent mutation, but it walks elements toward
    separators and eventually across them.
    """
    if len(g) < 2:
        raise GenomeTooShort("swap needs at least two elements")
    distance = 1 + int(rng.expovariate(1.0 / distance_mean))
    distance = min(distance, len(g) - 1)
    i = rng.randrange(len(g) - distance)
    j = i + distance
    swapped = list(g)
    swapped[i], swapped[j] = swapped[j], swapped[i]
    return tuple(swapped)


def negate_at(g: Genome, pos: int) -> Genome:
    if g[pos] == 0:
        raise ValueError("cannot negate a separator")
    return g[:pos] + (-g[pos],) + g[pos + 1:]


def mutate_negate(g: Genome, rng: random.Random) -> Genome:
    """Flip the sign of one uniformly chosen term; separators are immune."""
    positions = [i for i, v in enumerate(g) if v != 0]
    if not positions:
        raise NoTerms("no nonzero element to negate")
    return negate_at(g, positions[rng.randrange(len(positions))])


def mutate_simplify(g: Genome) -> Genome:
    """Drop repeated identical terms within each clause (first kept).

    Clause boundaries and order are preserved; opposite signs of one phrase
    are distinct terms and both survive.
    """
    out: list[int] = []
    seen: set[int] = set()
    for value in g:
        if value == 0:
            out.append(0)
            seen.clear()
        elif value not in seen:
            out.append(value)
            seen.add(value)
    return tuple(out)


# ---------------------------------------------------------------------------
# Recombination operators


def sample_cut(g: Genome, rng: random.Random, boundary_weight: float = 4.0) -> int:
    """Pick a cut position in 0..len(g), favoring clause boundaries.

    A position adjacent to a zero, or at either end, carries ``boundary_weight``;
    interior positions carry 1.
    """
    n = len(g)
    weights = [
        boundary_weight
        if i == 0 or i == n or g[i - 1] == 0 or g[i] == 0
        else 1.0
        for i in range(n + 1)
    ]
    return rng.choices(range(n + 1), weights=weights)[0]


def crossover(
    a: Genome,
    b: Genome,
    rng: random.Random,
    boundary_weight: float = 4.0,
    max_length: int = MAX_GENOME_LENGTH,
) -> Genome:
    """Prefix of one parent glued to a suffix of the other.

    Both cut points are boundary-biased and may fall at either end. A child
    that would exceed ``max_length`` is discarded in favor of the first parent.
    """
    cut_a = sample_cut(a, rng, boundary_weight)
    cut_b = sample_cut(b, rng, boundary_weight)
    child = a[:cut_a] + b[cut_b:]
    return child if len(child) <= max_length else a


def swatch_insert(
    donor: Genome,
    host: Genome,
    rng: random.Random,
    boundary_weight: float = 4.0,
    max_length: int = MAX_GENOME_LENGTH,
) -> Genome:
    """Splice a boundary-biased middle segment of the donor into the host."""
    first = sample_cut(donor, rng, boundary_weight)
    second = sample_cut(donor, rng, boundary_weight)
    lo, hi = min(first, second), max(first, second)
    cut = sample_cut(host, rng, boundary_weight)
    child = host[:cut] + donor[lo:hi] + host[cut:]
    return child if len(child) <= max_length else host


# ---------------------------------------------------------------------------
# Generation step


def _rank_key(ind: Individual) -> tuple:
    cached = ind.cached_loss if ind.cached_loss is not None else float("inf")
    return (cached, len(ind.genome), ind.genome)


def _tournament(ranked: Sequence[Individual], size: int, rng: random.Random) -> Individual:
    picks = [ranked[rng.randrange(len(ranked))] for _ in range(size)]
    return min(picks, key=_rank_key)


def _make_child(
    ranked: Sequence[Individual],
    config: GaConfig,
    vocab_size: int,
    rng: random.Random,
) -> Genome:
    genome = _tournament(ranked, config.tournament_size, rng).genome
    if rng.random() < config.rate("crossover"):
        other = _tournament(ranked, config.tournament_size, rng).genome
        genome = crossover(genome, other, rng, config.boundary_cut_weight,
                           config.max_genome_length)
    if rng.random() < config.rate("swatch_insert"):
        donor = _tournament(ranked, config.tournament_size, rng).genome
        genome = swatch_insert(donor, genome, rng, config.boundary_cut_weight,
                               config.max_genome_length)
    for name in MUTATION_ORDER:
        if rng.random() >= config.rate(name):
            continue
        if name == "phrase_add":
            if vocab_size > 0:
                genome = mutate_phrase_add(genome, vocab_size, rng,
                                           config.phrase_sample_gamma,
                                           config.max_genome_length)
        elif name == "clause_add":
            genome = mutate_clause_add(genome, rng, config.max_genome_length)
        elif name == "swap":
            if len(genome) >= 2:
                genome = mutate_swap(genome, rng, config.swap_distance_mean)
        elif name == "negate":
            if any(v != 0 for v in genome):
                genome = mutate_negate(genome, rng)
        elif name == "simplify":
            genome = mutate_simplify(genome)
    return genome


def step_generation(
    state: RunState,
    eval_fn: Callable[[Genome], float],
    config: GaConfig,
    rng: random.Random,
    vocab_size: int,
    eval_version: int = 0,
) -> RunState:
    """Advance the population by one generation.

    Evaluates individuals whose cached loss is stale, keeps the top
    ``elitism`` unchanged, refills the rest through tournament selection,
    recombination and the mutation pipeline, then drains pending injections
    over the worst slots. Deterministic given the rng state.
    """
    if state.status is not RunStatus.RUNNING:
        raise ValueError(f"cannot step a {state.status.value} run")

    evaluated = [
        ind if ind.cached_loss is not None and ind.evaluated_against == eval_version
        else Individual(ind.genome, eval_fn(ind.genome), eval_version)
        for ind in state.population
    ]
    ranked = sorted(evaluated, key=_rank_key)

    elites = [replace(ind) for ind in ranked[:config.elitism]]
    children = [
        Individual(_make_child(ranked, config, vocab_size, rng))
        for _ in range(config.population_size - len(elites))
    ]
    population = elites + children

    pending = deque(state.pending_injections)
    if pending:
        population.sort(key=_rank_key)
        slot = len(population) - 1
        while pending and slot >= 0:
            population[slot] = Individual(pending.popleft())
            slot -= 1

    return RunState(
        population=population,
        generation=state.generation + 1,
        status=state.status,
        pending_injections=pending,
    )


def select_fetch_candidate(
    state: RunState,
    vocab: VocabularyIndex,
    limit: int = QUERY_LENGTH_LIMIT,
) -> Genome:
    """Lowest-loss genome whose serialized query fits the provider limit.

    Ties break toward shorter genomes, then lexicographically smaller ones.
    Raises NoServiceableQuery when every genome serializes over the limit.
    """
    for ind in sorted(state.population, key=_rank_key):
        try:
            serialize(decode(ind.genome, vocab.size), vocab, limit)
        except LengthExceeded:
            continue
        return ind.genome
    raise NoServiceableQuery(f"no genome serializes within {limit} characters")


# ---------------------------------------------------------------------------
# Checkpoints

CHECKPOINT_FORMAT_VERSION = 1


def checkpoint_dict(
    state: RunState,
    config: GaConfig,
    rng: random.Random,
    loss_params: Mapping[str, float] | None = None,
    eval_version: int = 0,
) -> dict:
    return {
        "format": "queryevolve-checkpoint",
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "generation": state.generation,
        "status": state.status.value,
        "eval_version": eval_version,
        "ga_config": config.to_dict(),
        "loss_params": dict(loss_params or {}),
        "rng_state": _rng_state_to_json(rng.getstate()),
        "population": [
            {
                "genome": list(ind.genome),
                "loss": ind.cached_loss,
                "evaluated_against": ind.evaluated_against,
            }
            for ind in state.population
        ],
        "pending_injections": [list(g) for g in state.pending_injections],
    }


def save_checkpoint(path: str, payload: dict) -> None:
    """Write a checkpoint atomically (tmp file + rename)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "queryevolve-checkpoint":
        raise ValueError(f"{path} is not a checkpoint file")
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    return payload


def restore_state(payload: dict) -> tuple[RunState, GaConfig, random.Random]:
    config = GaConfig.from_dict(payload["ga_config"])
    population = [
        Individual(tuple(item["genome"]), item["loss"], item["evaluated_against"])
        for item in payload["population"]
    ]
    state = RunState(
        population=population,
        generation=payload["generation"],
        status=RunStatus(payload["status"]),
        pending_injections=deque(tuple(g) for g in payload["pending_injections"]),
    )
    rng = random.Random()
    rng.setstate(_rng_state_from_json(payload["rng_state"]))
    return state, config, rng


def _rng_state_to_json(state: tuple) -> list:
    version, internal, gauss_next = state
    return [version, list(internal), gauss_next]


def _rng_state_from_json(raw: Sequence) -> tuple:
    version, internal, gauss_next = raw
    return (version, tuple(internal), gauss_next)
