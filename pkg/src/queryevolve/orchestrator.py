"""Run orchestration: configuration, lifecycle, metrics, human-in-the-loop hooks.

The run loop owns all engine state. External control (the HTTP API, and
through it the browser UI) never mutates that state directly: commands are
queued and applied at generation boundaries, so checkpoints always capture
whole generations and injected queries enter the population atomically.
"""

from __future__ import annotations

import csv
import logging
import queue
import random
import statistics
import sys
import threading
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .corpus import CorpusIndex, CorpusStore, Document, Label, index_corpus
from .engine import (
    GaConfig,
    Individual,
    NoServiceableQuery,
    RunState,
    RunStatus,
    checkpoint_dict,
    save_checkpoint,
    select_fetch_candidate,
    step_generation,
)
from .evaluate import CorpusEvaluator, LossParams, NoLabeledData, loss
from .indexio import load_corpus
from .provider import (
    ProviderRequest,
    SearchProvider,
    SimulatedProvider,
    TokenBudget,
    ingest_response,
)
from .query import (
    ClauseQuery,
    EmptyQueryWarning,
    Genome,
    LengthExceeded,
    QUERY_LENGTH_LIMIT,
    DEFAULT_CLAUSE_CAP,
    PhraseIdOutOfRange,
    QuerySyntaxError,
    UnknownPhrase,
    decode,
    encode,
    normalize,
    parse,
    serialize,
)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """The run configuration is unusable."""


@dataclass
class RunConfig:
    corpus_path: str
    mode: str = "batch"  # "batch" | "interactive"
    seed_queries_path: str | None = None
    hidden_corpus_path: str | None = None
    labels_path: str | None = None
    generations: int = 100  # <= 0 means unlimited (interactive)
    checkpoint_dir: str = "run"
    checkpoint_every: int = 50
    metrics_csv: str | None = None  # default: <checkpoint_dir>/metrics.csv
    pause_every: int = 0  # scheduled pause period, 0 = off
    query_length_limit: int = QUERY_LENGTH_LIMIT
    max_clauses: int = DEFAULT_CLAUSE_CAP
    http_host: str = "127.0.0.1"
    http_port: int = 8753
    ui_dir: str | None = None
    budget_total: int = 0
    tokens_per_fetch: int = 1
    oracle_target_query: str | None = None  # auto-label fetches (synthetic runs)
    ga: GaConfig = field(default_factory=GaConfig)
    loss: LossParams = field(default_factory=LossParams)

    def validate(self) -> None:
        if self.mode not in ("batch", "interactive"):
            raise ConfigError(f"mode must be batch or interactive, not {self.mode!r}")
        for label, path in (
            ("corpus", self.corpus_path),
            ("seed_queries", self.seed_queries_path),
            ("hidden_corpus", self.hidden_corpus_path),
            ("labels", self.labels_path),
        ):
            if path and not Path(path).exists():
                raise ConfigError(f"{label} path does not exist: {path}")
        if self.budget_total < 0:
            raise ConfigError("budget total must be >= 0")
        if self.tokens_per_fetch < 1:
            raise ConfigError("tokens_per_fetch must be >= 1")
        if self.mode == "batch" and self.generations <= 0:
            raise ConfigError("batch mode needs a positive generation limit")

    @property
    def metrics_path(self) -> Path:
        if self.metrics_csv:
            return Path(self.metrics_csv)
        return Path(self.checkpoint_dir) / "metrics.csv"


_TOP_LEVEL_KEYS = {
    "mode": "mode",
    "corpus": "corpus_path",
    "seed_queries": "seed_queries_path",
    "hidden_corpus": "hidden_corpus_path",
    "labels": "labels_path",
    "generations": "generations",
    "checkpoint_dir": "checkpoint_dir",
    "checkpoint_every": "checkpoint_every",
    "metrics_csv": "metrics_csv",
    "pause_every": "pause_every",
    "query_length_limit": "query_length_limit",
    "max_clauses": "max_clauses",
    "oracle_target": "oracle_target_query",
}


def _coerce_override(value: str) -> Any:
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            continue
    return value


def _set_dotted(tree: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {part} is not a table")
    node[parts[-1]] = value


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> RunConfig:
    """Read a TOML run configuration, then apply `key.path=value` overrides."""
    try:
        with open(path, "rb") as fh:
            tree = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must look like key=value: {item!r}")
        _set_dotted(tree, key.strip(), _coerce_override(value.strip()))
    return config_from_dict(tree)


def config_from_dict(tree: Mapping[str, Any]) -> RunConfig:
    kwargs: dict[str, Any] = {}
    for key, attr in _TOP_LEVEL_KEYS.items():
        if key in tree and tree[key] != "":
            kwargs[attr] = tree[key]
    if "corpus_path" not in kwargs:
        raise ConfigError("config is missing the corpus path")

    http = tree.get("http", {})
    kwargs["http_host"] = http.get("host", "127.0.0.1")
    kwargs["http_port"] = http.get("port", 8753)
    if http.get("ui_dir"):
        kwargs["ui_dir"] = http["ui_dir"]

    budget = tree.get("budget", {})
    kwargs["budget_total"] = budget.get("total", 0)
    kwargs["tokens_per_fetch"] = budget.get("tokens_per_fetch", 1)

    ga_tree = dict(tree.get("ga", {}))
    rates = ga_tree.pop("operator_rates", None)
    try:
        ga = GaConfig(**ga_tree) if rates is None else GaConfig(operator_rates=dict(rates), **ga_tree)
        kwargs["ga"] = ga
        kwargs["loss"] = LossParams(**tree.get("loss", {}))
        config = RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def read_seed_queries(path: str | Path) -> list[str]:
    """Seed query file: one query per line, blank lines and # comments skipped."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def load_label_file(path: str | Path) -> dict[str, Label]:
    import json

    labels: dict[str, Label] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                labels[str(raw["id"])] = Label(raw["label"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad label record: {exc}") from exc
    return labels


class LabelStore:
    """Thread-safe document label assignment plus the pending-label queue.

    ``version`` bumps on every change that affects evaluation, letting the run
    loop notice at the next generation boundary.
    """

    def __init__(self, docs: Sequence[Document], extra: Mapping[str, Label] | None = None):
        self._lock = threading.Lock()
        self._labels: dict[str, Label] = {d.id: d.label for d in docs}
        self._texts: dict[str, str] = {d.id: d.text for d in docs}
        self._pending: dict[str, str] = {}
        self.version = 0
        if extra:
            for doc_id, label in extra.items():
                if doc_id in self._labels:
                    self._labels[doc_id] = label

    def add_documents(self, docs: Sequence[Document], pending: bool) -> None:
        with self._lock:
            for doc in docs:
                self._labels.setdefault(doc.id, doc.label)
                self._texts[doc.id] = doc.text
                if pending and self._labels[doc.id] is Label.UNLABELED:
                    self._pending[doc.id] = doc.text
            if not pending:
                self.version += 1

    def assign(self, doc_id: str, label: Label) -> None:
        with self._lock:
            if doc_id not in self._labels:
                raise KeyError(doc_id)
            self._labels[doc_id] = label
            self._pending.pop(doc_id, None)
            self.version += 1

    def snapshot(self) -> dict[str, Label]:
        with self._lock:
            return dict(self._labels)

    def pending(self) -> list[dict[str, str]]:
        with self._lock:
            return [{"id": doc_id, "text": text} for doc_id, text in self._pending.items()]

    def counts(self) -> tuple[int, int]:
        with self._lock:
            values = list(self._labels.values())
        return values.count(Label.RELEVANT), values.count(Label.IRRELEVANT)


@dataclass
class MetricsSnapshot:
    generation: int
    best_loss: float
    median_loss: float
    best_f_p: float
    best_f_n: float
    best_length: int
    length_min: int
    length_median: float
    length_max: int
    tokens_spent: int
    corpus_size: int
    labeled_relevant: int
    labeled_irrelevant: int
    best_query: str
    best_query_json: str

    @classmethod
    def csv_fields(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.csv_fields()}


class OracleLabeler:
    """Labels fetched documents immediately from a ground-truth query."""

    def __init__(self, target: ClauseQuery, store: CorpusStore, labels: LabelStore):
        from .evaluate import matches_text

        self._matches_text = matches_text
        self.target = target
        self.store = store
        self.labels = labels

    def __call__(self, docs: Sequence[Document]) -> None:
        vocab = self.store.snapshot.vocabulary
        labeled = [
            Document(
                id=d.id,
                text=d.text,
                label=(
                    Label.RELEVANT
                    if self._matches_text(self.target, vocab, d.text)
                    else Label.IRRELEVANT
                ),
                source=d.source,
                fetched_at=d.fetched_at,
            )
            for d in docs
        ]
        self.labels.add_documents(labeled, pending=False)


class InteractiveLabeler:
    """Queues fetched documents for a human to label through the API."""

    def __init__(self, labels: LabelStore):
        self.labels = labels

    def __call__(self, docs: Sequence[Document]) -> None:
        self.labels.add_documents(docs, pending=True)


def seed_population(
    seed_queries: Sequence[str],
    index: CorpusIndex,
    config: GaConfig,
    max_clauses: int = DEFAULT_CLAUSE_CAP,
) -> list[Individual]:
    """Initial population: seed queries first, then single-phrase genomes
    cycling through the most frequent vocabulary entries."""
    genomes: list[Genome] = []
    for text in seed_queries:
        query = normalize(parse(text), index.vocabulary, max_clauses)
        genomes.append(encode(query))
    vocab_size = index.vocabulary.size
    slot = 0
    while len(genomes) < config.population_size:
        genomes.append((slot % vocab_size + 1,) if vocab_size else ())
        slot += 1
    return [Individual(g) for g in genomes[:config.population_size]]


class Runner:
    """Owns one run: engine state, provider traffic, metrics, control surface."""

    def __init__(self, config: RunConfig, provider: SearchProvider | None = None,
                 labeler: Callable[[Sequence[Document]], None] | None = None):
        config.validate()
        self.config = config
        docs = load_corpus(config.corpus_path)
        if not docs:
            raise ConfigError(f"corpus {config.corpus_path} has no documents")
        self.store = CorpusStore(index_corpus(docs))
        extra = load_label_file(config.labels_path) if config.labels_path else None
        self.labels = LabelStore(docs, extra)
        relevant, irrelevant = self.labels.counts()
        if relevant == 0 or irrelevant == 0:
            raise ConfigError(
                "corpus needs at least one relevant and one irrelevant label "
                f"(got {relevant} relevant, {irrelevant} irrelevant)"
            )

        if provider is not None:
            self.provider: SearchProvider | None = provider
        elif config.hidden_corpus_path:
            self.provider = SimulatedProvider(
                load_corpus(config.hidden_corpus_path), config.query_length_limit
            )
        else:
            self.provider = None
        if labeler is not None:
            self.labeler = labeler
        elif config.oracle_target_query:
            try:
                target = normalize(
                    parse(config.oracle_target_query),
                    self.store.snapshot.vocabulary,
                    config.max_clauses,
                )
            except (QuerySyntaxError, UnknownPhrase) as exc:
                raise ConfigError(f"bad oracle target query: {exc}") from exc
            self.labeler = OracleLabeler(target, self.store, self.labels)
        else:
            self.labeler = InteractiveLabeler(self.labels)
        self.budget = TokenBudget(total=config.budget_total)

        seeds = read_seed_queries(config.seed_queries_path) if config.seed_queries_path else []
        try:
            population = seed_population(seeds, self.store.snapshot, config.ga,
                                         config.max_clauses)
        except (QuerySyntaxError, UnknownPhrase) as exc:
            raise ConfigError(f"bad seed query: {exc}") from exc

        self.rng = random.Random(config.ga.rng_seed)
        self.state = RunState(population=population)
        self.history: list[MetricsSnapshot] = []
        self.latest: MetricsSnapshot | None = None

        self._commands: queue.Queue = queue.Queue()
        self._provider_failed = False
        self._budget_warned = False
        self._eval_version = 0
        self._evaluator: CorpusEvaluator | None = None
        self._eval_key: tuple[int, int] = (-1, -1)
        self._genome_cache: dict[Genome, float] = {}
        self._csv_started = False

    # -- evaluation ---------------------------------------------------------

    def _refresh_evaluator(self) -> None:
        key = (self.store.snapshot.version, self.labels.version)
        if key != self._eval_key:
            snapshot = self.store.snapshot
            self._evaluator = CorpusEvaluator(snapshot.vectors, self.labels.snapshot())
            self._eval_key = key
            self._eval_version += 1
            self._genome_cache.clear()

    def _eval_fn(self, genome: Genome) -> float:
        cached = self._genome_cache.get(genome)
        if cached is None:
            query = decode(genome, self.store.snapshot.vocabulary.size)
            counts = self._evaluator.counts(query)
            cached = loss(counts, len(genome), self.config.loss)
            self._genome_cache[genome] = cached
        return cached

    # -- control surface (called from HTTP threads) --------------------------

    def request_pause(self) -> None:
        self._commands.put(("pause",))

    def request_resume(self) -> None:
        self._commands.put(("resume",))

    def request_stop(self) -> None:
        self._commands.put(("stop",))

    def inject(self, queries: Sequence[str]) -> list[Genome]:
        """Parse, normalize and queue query strings for the next boundary.

        Raises QuerySyntaxError / UnknownPhrase / BlowupLimitExceeded verbatim
        so the API layer can surface the diagnostic; raises RuntimeError when
        the run has stopped.
        """
        if self.state.status is RunStatus.STOPPED:
            raise RuntimeError("run is stopped")
        vocab = self.store.snapshot.vocabulary
        genomes = [
            encode(normalize(parse(text), vocab, self.config.max_clauses))
            for text in queries
        ]
        for genome in genomes:
            self._commands.put(("inject", genome))
        return genomes

    def label(self, doc_id: str, label: Label) -> None:
        self.labels.assign(doc_id, label)

    def status_dict(self) -> dict:
        relevant, irrelevant = self.labels.counts()
        return {
            "status": self.state.status.value,
            "generation": self.state.generation,
            "corpus_size": self.store.snapshot.size,
            "labeled_relevant": relevant,
            "labeled_irrelevant": irrelevant,
            "pending_labels": len(self.labels.pending()),
            "budget": {"total": self.budget.total, "spent": self.budget.spent},
            "metrics": self.latest.as_dict() if self.latest else None,
        }

    def population_dict(self, top: int) -> list[dict]:
        vocab = self.store.snapshot.vocabulary
        evaluator = self._evaluator
        ranked = sorted(
            self.state.population,
            key=lambda i: (i.cached_loss if i.cached_loss is not None else float("inf"),
                           len(i.genome), i.genome),
        )
        out = []
        for ind in ranked[:top]:
            query = decode(ind.genome)
            f_p = f_n = None
            if evaluator is not None:
                try:
                    counts = evaluator.counts(query)
                    f_p = counts.false_positive_rate
                    f_n = counts.false_negative_rate
                except (NoLabeledData, PhraseIdOutOfRange):
                    pass
            out.append({
                "loss": ind.cached_loss,
                "length": len(ind.genome),
                "genome": list(ind.genome),
                "query": self._render(query, vocab),
                "f_p": f_p,
                "f_n": f_n,
            })
        return out

    def history_dict(self) -> list[dict]:
        return [m.as_dict() for m in self.history]

    def _render(self, query: ClauseQuery, vocab) -> str | None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyQueryWarning)
            try:
                return serialize(query, vocab, self.config.query_length_limit)
            except LengthExceeded:
                return None

    # -- run loop -----------------------------------------------------------

    def run(self) -> int:
        """Run to the configured limit (batch) or until stopped (interactive)."""
        checkpoint_path = Path(self.config.checkpoint_dir) / "checkpoint.json"
        checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
        limit = self.config.generations
        try:
            while self.state.status is not RunStatus.STOPPED:
                if limit > 0 and self.state.generation >= limit:
                    break
                self._drain_commands()
                if self.state.status is RunStatus.STOPPED:
                    break
                if self.state.status is RunStatus.PAUSED:
                    self._write_checkpoint(checkpoint_path)
                    self._wait_while_paused()
                    continue

                self._refresh_evaluator()
                self.state = step_generation(
                    self.state, self._eval_fn, self.config.ga, self.rng,
                    vocab_size=self.store.snapshot.vocabulary.size,
                    eval_version=self._eval_version,
                )
                self._emit_metrics()
                generation = self.state.generation
                if self._fetch_due(generation):
                    self._fetch_once()
                if self.config.pause_every and self.config.mode == "interactive" \
                        and generation % self.config.pause_every == 0:
                    self.state.status = RunStatus.PAUSED
                if self.config.checkpoint_every > 0 and \
                        generation % self.config.checkpoint_every == 0:
                    self._write_checkpoint(checkpoint_path)
        finally:
            self.state.status = RunStatus.STOPPED
            self._write_checkpoint(checkpoint_path)
        return 0

    def _drain_commands(self) -> None:
        while True:
            try:
                command = self._commands.get_nowait()
            except queue.Empty:
                return
            self._apply_command(command)

    def _wait_while_paused(self) -> None:
        while self.state.status is RunStatus.PAUSED:
            try:
                command = self._commands.get(timeout=0.2)
            except queue.Empty:
                continue
            self._apply_command(command)

    def _apply_command(self, command: tuple) -> None:
        kind = command[0]
        if kind == "pause" and self.state.status is RunStatus.RUNNING:
            self.state.status = RunStatus.PAUSED
        elif kind == "resume" and self.state.status is RunStatus.PAUSED:
            self.state.status = RunStatus.RUNNING
        elif kind == "stop":
            self.state.status = RunStatus.STOPPED
        elif kind == "inject":
            self.state.pending_injections.append(command[1])

    def _fetch_due(self, generation: int) -> bool:
        every = self.config.ga.fetch_every
        if every <= 0 or generation % every != 0:
            return False
        if self.provider is None or self._provider_failed:
            return False
        if self.budget.remaining < self.config.tokens_per_fetch:
            emit = log.debug if self._budget_warned else log.warning
            emit(
                "generation %d: fetch due but budget is exhausted (%d/%d); skipping",
                generation, self.budget.spent, self.budget.total,
            )
            self._budget_warned = True
            return False
        return True

    def _fetch_once(self) -> None:
        vocab = self.store.snapshot.vocabulary
        try:
            genome = select_fetch_candidate(
                self.state, vocab, self.config.query_length_limit
            )
        except NoServiceableQuery as exc:
            log.warning("no serviceable fetch candidate: %s", exc)
            return
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyQueryWarning)
            content = serialize(decode(genome), vocab, self.config.query_length_limit)
        try:
            response = self.provider.fetch(
                ProviderRequest(content, tokens_spent=self.config.tokens_per_fetch),
                self.budget,
            )
            added = ingest_response(response, self.store, self.labeler)
            log.info(
                "fetched %d documents (%d new) for %r",
                len(response.documents), added, content,
            )
        except Exception as exc:  # provider trouble must not kill the run
            if self.config.mode == "interactive":
                log.warning("provider error, pausing run: %s", exc)
                self.state.status = RunStatus.PAUSED
            else:
                log.warning("provider error, disabling further fetches: %s", exc)
                self._provider_failed = True

    def _emit_metrics(self) -> None:
        evaluated = [i for i in self.state.population if i.cached_loss is not None]
        best = min(
            evaluated,
            key=lambda i: (i.cached_loss, len(i.genome), i.genome),
        )
        vocab = self.store.snapshot.vocabulary
        query = decode(best.genome)
        counts = self._evaluator.counts(query)
        lengths = sorted(len(i.genome) for i in self.state.population)
        losses = [i.cached_loss for i in evaluated]
        relevant, irrelevant = self.labels.counts()
        snapshot = MetricsSnapshot(
            generation=self.state.generation,
            best_loss=best.cached_loss,
            median_loss=statistics.median(losses),
            best_f_p=counts.false_positive_rate,
            best_f_n=counts.false_negative_rate,
            best_length=len(best.genome),
            length_min=lengths[0],
            length_median=statistics.median(lengths),
            length_max=lengths[-1],
            tokens_spent=self.budget.spent,
            corpus_size=self.store.snapshot.size,
            labeled_relevant=relevant,
            labeled_irrelevant=irrelevant,
            best_query=self._render(query, vocab) or "",
            best_query_json=query.to_json(),
        )
        self.history.append(snapshot)
        self.latest = snapshot
        self._append_csv(snapshot)

    def _append_csv(self, snapshot: MetricsSnapshot) -> None:
        path = self.config.metrics_path
        path.parent.mkdir(parents=True, exist_ok=True)
        write_header = not self._csv_started and not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=MetricsSnapshot.csv_fields())
            if write_header:
                writer.writeheader()
            writer.writerow(snapshot.as_dict())
        self._csv_started = True

    def _write_checkpoint(self, path: Path) -> None:
        payload = checkpoint_dict(
            self.state, self.config.ga, self.rng,
            loss_params={
                "eps_fp": self.config.loss.eps_fp,
                "eps_fn": self.config.loss.eps_fn,
                "delta_fp": self.config.loss.delta_fp,
                "delta_fn": self.config.loss.delta_fn,
                "lambda_len": self.config.loss.lambda_len,
            },
            eval_version=self._eval_version,
        )
        save_checkpoint(str(path), payload)


def run_from_config(config: RunConfig) -> int:
    """CLI entry: build a Runner (plus control API when interactive) and run."""
    try:
        runner = Runner(config)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    server = None
    if config.mode == "interactive":
        from .control_api import ControlApiServer

        server = ControlApiServer(runner, config.http_host, config.http_port,
                                  ui_dir=config.ui_dir)
        server.start()
        log.info("control API listening on http://%s:%d", *server.address)
    try:
        return runner.run()
    finally:
        if server is not None:
            server.stop()
