"""Command-line interface.

    queryevolve index      build and persist an index from a JSONL corpus
    queryevolve run        run the optimizer from a TOML config
    queryevolve eval       score one query string against a labeled corpus
    queryevolve normalize  print the clause-structured form of a query
    queryevolve report     render figures from a run's metrics CSV
    queryevolve synth      generate a synthetic labeled corpus
"""

from __future__ import annotations

import logging
import sys
import warnings
from pathlib import Path

import click

from . import indexio
from .corpus import build_index, index_corpus
from .evaluate import LossParams, evaluate_corpus, loss
from .orchestrator import ConfigError, load_config, run_from_config
from .query import (
    BlowupLimitExceeded,
    EmptyQueryWarning,
    QuerySyntaxError,
    UnknownPhrase,
    normalize,
    parse,
    serialize,
)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Evolve boolean search queries against an n-gram bitmap index."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="JSONL corpus to index.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output index file.")
def index(corpus_path: str, out_path: str) -> None:
    """Build the vocabulary + bit vectors and persist them."""
    docs = indexio.load_corpus(corpus_path)
    vocab, vectors = build_index(docs)
    indexio.save_index(out_path, vocab, vectors)
    click.echo(
        f"indexed {len(docs)} documents: {vocab.size} phrases, "
        f"wrote {Path(out_path).stat().st_size} bytes to {out_path}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="TOML run configuration.")
@click.option("--override", "-o", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key, e.g. -o ga.rng_seed=7.")
def run(config_path: str, overrides: tuple[str, ...]) -> None:
    """Run the optimizer (batch or interactive per the config)."""
    try:
        config = load_config(config_path, overrides)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    sys.exit(run_from_config(config))


@main.command("eval")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="Labeled JSONL corpus to score against.")
@click.argument("query_string")
def eval_query(corpus_path: str, query_string: str) -> None:
    """Score QUERY_STRING: prints f_p, f_n and the loss."""
    snapshot = index_corpus(indexio.load_corpus(corpus_path))
    try:
        query = normalize(parse(query_string), snapshot.vocabulary)
    except (QuerySyntaxError, UnknownPhrase, BlowupLimitExceeded) as exc:
        raise click.ClickException(str(exc))
    labels = snapshot.labels()
    counts = evaluate_corpus(query, snapshot.vectors, labels)
    if counts.labeled_relevant == 0 or counts.labeled_irrelevant == 0:
        raise click.ClickException("corpus needs both relevant and irrelevant labels")
    genome_length = sum(len(c) for c in query.clauses) + max(len(query.clauses) - 1, 0)
    value = loss(counts, genome_length, LossParams())
    click.echo(f"matched {counts.tp + counts.fp} labeled documents "
               f"(tp={counts.tp} fp={counts.fp} tn={counts.tn} fn={counts.fn})")
    click.echo(f"f_p  = {counts.false_positive_rate:.6f}")
    click.echo(f"f_n  = {counts.false_negative_rate:.6f}")
    click.echo(f"loss = {value:.8f}")


@main.command("normalize")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None,
              help="Resolve phrases against this corpus's vocabulary.")
@click.argument("query_string")
def normalize_query(corpus_path: str | None, query_string: str) -> None:
    """Print the clause-structured form of QUERY_STRING."""
    try:
        ast = parse(query_string)
    except QuerySyntaxError as exc:
        raise click.ClickException(str(exc))
    if corpus_path:
        vocab = index_corpus(indexio.load_corpus(corpus_path)).vocabulary
        unknown_ok = False
    else:
        # no corpus: build a throwaway vocabulary out of the query's phrases
        from .corpus import VocabularyIndex

        vocab = VocabularyIndex()
        unknown_ok = True
    try:
        query = normalize(ast, vocab, unknown_as_absent=unknown_ok)
    except (UnknownPhrase, BlowupLimitExceeded) as exc:
        raise click.ClickException(str(exc))
    if corpus_path:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyQueryWarning)
            click.echo(serialize(query, vocab))
    else:
        click.echo(_render_with_virtual_ids(ast, query))
    click.echo(query.to_json())


def _render_with_virtual_ids(ast, query) -> str:
    """Serialize a query normalized without a real vocabulary."""
    from .corpus import Phrase, VocabularyIndex
    from .query import PhraseNode, NotNode, AndNode, OrNode, _IdResolver

    # re-resolve to learn which tokens got which virtual ids
    resolver = _IdResolver(VocabularyIndex(), unknown_as_absent=True)

    def walk(node):
        if isinstance(node, PhraseNode):
            resolver.resolve(node.tokens)
        elif isinstance(node, NotNode):
            walk(node.child)
        else:
            for child in node.children:
                walk(child)

    walk(ast)
    entries = [(Phrase(tokens), 0) for tokens, _ in
               sorted(resolver.virtual.items(), key=lambda kv: kv[1])]
    vocab = VocabularyIndex(entries)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyQueryWarning)
        return serialize(query, vocab)


@main.command()
@click.option("--metrics", "metrics_path", required=True, type=click.Path(exists=True),
              help="metrics.csv written by a run.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Figure directory (default: next to the CSV).")
def report(metrics_path: str, out_dir: str | None) -> None:
    """Render loss/rate/length figures from a run's metrics CSV."""
    from .report import write_report

    for path in write_report(metrics_path, out_dir):
        click.echo(f"wrote {path}")


@main.command()
@click.option("--docs", "n_docs", default=5000, show_default=True, help="Documents to generate.")
@click.option("--vocab", "vocab_size", default=500, show_default=True, help="Vocabulary size.")
@click.option("--seed", default=0, show_default=True, help="Generator seed.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Corpus JSONL output.")
@click.option("--target-out", type=click.Path(), default=None,
              help="Also write the planted query string here.")
@click.option("--unlabeled", is_flag=True, help="Strip labels (for hidden corpora).")
@click.option("--id-prefix", default="d", show_default=True)
def synth(n_docs: int, vocab_size: int, seed: int, out_path: str,
          target_out: str | None, unlabeled: bool, id_prefix: str) -> None:
    """Generate a synthetic labeled corpus with a planted ground-truth query."""
    from .corpus import Document, Label
    from .synthetic import SyntheticSpec, generate_corpus

    spec = SyntheticSpec(n_docs=n_docs, vocab_size=vocab_size, seed=seed,
                         id_prefix=id_prefix)
    docs, target = generate_corpus(spec)
    if unlabeled:
        docs = [Document(id=d.id, text=d.text, label=Label.UNLABELED,
                         fetched_at=d.fetched_at) for d in docs]
    indexio.save_corpus(out_path, docs)
    relevant = sum(1 for d in docs if d.label is Label.RELEVANT)
    click.echo(f"wrote {len(docs)} documents to {out_path} "
               f"({relevant} relevant under the planted query)")
    if target_out:
        Path(target_out).write_text(target.to_query_string() + "\n", encoding="utf-8")
        click.echo(f"planted query: {target.to_query_string()}")


if __name__ == "__main__":
    main()
