"""Render run figures from a metrics CSV.

Reads the per-generation metrics the orchestrator appends during a run and
writes matplotlib figures next to it (or into --out): the loss curves, the
error rates of the best query, population length statistics, and the spend /
corpus growth picture for runs that fetched.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def read_metrics(path: str | Path) -> dict[str, list[float]]:
    columns: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            for key, value in row.items():
                if key.startswith("best_query"):
                    continue
                try:
                    columns.setdefault(key, []).append(float(value))
                except (TypeError, ValueError):
                    continue
    if not columns.get("generation"):
        raise ValueError(f"{path} has no metric rows")
    return columns


def _finish(fig, axis, path: Path, title: str) -> Path:
    axis.set_xlabel("generation")
    axis.set_title(title)
    axis.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(metrics_csv: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Write the figure set; returns the paths written."""
    metrics_csv = Path(metrics_csv)
    data = read_metrics(metrics_csv)
    out = Path(out_dir) if out_dir else metrics_csv.parent
    out.mkdir(parents=True, exist_ok=True)
    gens = data["generation"]
    written: list[Path] = []

    fig, axis = plt.subplots(figsize=(7, 4))
    axis.plot(gens, data["best_loss"], label="best", color="tab:blue")
    axis.plot(gens, data["median_loss"], label="median", color="tab:orange", alpha=0.8)
    axis.set_yscale("log")
    axis.set_ylabel("loss")
    axis.legend()
    written.append(_finish(fig, axis, out / "loss_curve.png", "Population loss"))

    fig, axis = plt.subplots(figsize=(7, 4))
    axis.plot(gens, data["best_f_p"], label="false positive rate", color="tab:red")
    axis.plot(gens, data["best_f_n"], label="false negative rate", color="tab:green")
    axis.set_ylim(-0.02, 1.02)
    axis.set_ylabel("rate")
    axis.legend()
    written.append(_finish(fig, axis, out / "best_rates.png", "Error rates of best query"))

    fig, axis = plt.subplots(figsize=(7, 4))
    axis.plot(gens, data["length_max"], label="max", color="tab:gray", alpha=0.6)
    axis.plot(gens, data["length_median"], label="median", color="tab:purple")
    axis.plot(gens, data["length_min"], label="min", color="tab:gray", alpha=0.6)
    axis.set_ylabel("genome length")
    axis.legend()
    written.append(_finish(fig, axis, out / "genome_length.png", "Population genome length"))

    if max(data.get("tokens_spent", [0])) > 0:
        fig, axis = plt.subplots(figsize=(7, 4))
        axis.plot(gens, data["corpus_size"], label="corpus size", color="tab:blue")
        axis.set_ylabel("documents")
        twin = axis.twinx()
        twin.plot(gens, data["tokens_spent"], label="tokens spent", color="tab:red")
        twin.set_ylabel("tokens")
        lines = axis.get_lines() + twin.get_lines()
        axis.legend(lines, [l.get_label() for l in lines], loc="lower right")
        written.append(_finish(fig, axis, out / "fetching.png", "Provider spend and corpus growth"))

    return written
