"""Record aggregation into report tables.

Accuracy cells are keyed by (format, model, task, pseudo).  Roll-ups follow
the published layout: a model's per-format overall is the unweighted mean of
its task accuracies, format-level rows average over models, and the overall
score row averages the per-model all-format means.  Equal-weight means are
computed with exact fractions so ties are detected reliably.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from kgtextbench.scoring import EvalRecord, parse_answer

AGG_TASKS = ("AggByRelation", "AggNeighborProperty")
AGG_SIZE_BINS = ("1", "2", "3", "4", "5", "6", "7", "8+")


@dataclass
class CellStat:
    format: str
    model: str
    task: str
    pseudo: bool
    correct: int = 0
    scored: int = 0
    errors: int = 0
    parse_failures: int = 0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.scored if self.scored else None

    def fraction(self) -> Fraction:
        return Fraction(self.correct, self.scored) if self.scored else Fraction(0)


@dataclass
class SummaryTable:
    """Every aggregate the reporting layer emits."""

    cells: list[CellStat]
    token_usage: dict[str, dict[str, float]]
    best_format: dict[str, dict[str, Any]]
    format_overall: dict[str, Any]
    overall_score: dict[str, Any]
    path_length: list[dict[str, Any]]
    predicted_path_length: list[dict[str, Any]]
    agg_size_bins: list[dict[str, Any]]
    degree_direction: list[dict[str, Any]]
    flexible_path: list[dict[str, Any]]

    def cell(self, fmt: str, model: str, task: str, pseudo: bool) -> CellStat | None:
        for c in self.cells:
            if (c.format, c.model, c.task, c.pseudo) == (fmt, model, task, pseudo):
                return c
        return None

    def to_json_dict(self) -> dict:
        return {
            "cells": [
                {
                    "format": c.format,
                    "model": c.model,
                    "task": c.task,
                    "pseudo": c.pseudo,
                    "accuracy": c.accuracy,
                    "n": c.scored,
                    "errors": c.errors,
                    "parse_failures": c.parse_failures,
                }
                for c in self.cells
            ],
            "token_usage": self.token_usage,
            "best_format": self.best_format,
            "format_overall": self.format_overall,
            "overall_score": self.overall_score,
            "path_length": self.path_length,
            "predicted_path_length": self.predicted_path_length,
            "agg_size_bins": self.agg_size_bins,
            "degree_direction": self.degree_direction,
            "flexible_path": self.flexible_path,
        }


def _mean(values: list[Fraction]) -> Fraction | None:
    return sum(values, Fraction(0)) / len(values) if values else None


def _as_float(value: Fraction | None) -> float | None:
    return float(value) if value is not None else None


def _sorted_cells(index: dict[tuple, CellStat]) -> list[CellStat]:
    return [index[k] for k in sorted(index, key=lambda k: (k[0], k[1], k[2], k[3]))]


def aggregate(
    records: Iterable[EvalRecord],
    instance_meta: dict[tuple[str, int, bool], dict] | None = None,
) -> SummaryTable:
    """Compute the full summary from a record set.

    ``instance_meta`` maps (task_id, instance_index, pseudo) to the instance
    metadata dict; when provided it powers the path-length, aggregation-size
    and degree-direction breakdowns.  Aggregation is order-independent.
    """
    records = list(records)
    cells: dict[tuple, CellStat] = {}
    token_sum: dict[str, int] = defaultdict(int)
    token_n: dict[str, int] = defaultdict(int)

    for rec in records:
        key = (rec.format, rec.model_id, rec.task_id, rec.pseudo)
        cell = cells.get(key)
        if cell is None:
            cell = cells[key] = CellStat(
                format=rec.format, model=rec.model_id, task=rec.task_id, pseudo=rec.pseudo
            )
        if rec.error is not None:
            cell.errors += 1
            continue
        cell.scored += 1
        cell.correct += rec.score or 0
        if rec.parse_failed:
            cell.parse_failures += 1
        token_sum[rec.format] += rec.input_tokens
        token_n[rec.format] += 1

    token_usage = {
        fmt: {"mean_input_tokens": token_sum[fmt] / token_n[fmt], "n": token_n[fmt]}
        for fmt in sorted(token_n)
    }

    models = sorted({c.model for c in cells.values()})
    formats = sorted({c.format for c in cells.values()})
    tasks = sorted({c.task for c in cells.values()})
    pseudo_variants = sorted({c.pseudo for c in cells.values()})

    def cell_fraction(fmt: str, model: str, task: str, pseudo: bool) -> Fraction | None:
        c = cells.get((fmt, model, task, pseudo))
        return c.fraction() if c is not None and c.scored else None

    def model_overall(fmt: str, model: str, pseudo: bool) -> Fraction | None:
        vals = [cell_fraction(fmt, model, t, pseudo) for t in tasks]
        vals = [v for v in vals if v is not None]
        return _mean(vals)

    # Format-level rows: per-task mean over models, plus the overall column.
    format_overall: dict[str, Any] = {}
    for fmt in formats:
        for pseudo in pseudo_variants:
            row: dict[str, float | None] = {}
            for task in tasks:
                vals = [cell_fraction(fmt, m, task, pseudo) for m in models]
                row[task] = _as_float(_mean([v for v in vals if v is not None]))
            overalls = [model_overall(fmt, m, pseudo) for m in models]
            row["overall"] = _as_float(_mean([v for v in overalls if v is not None]))
            format_overall[f"{fmt}|pseudo={pseudo}"] = row

    # Overall-score rows: per task, mean over models of each model's
    # all-format mean; overall column nests the format mean inside.
    overall_score: dict[str, Any] = {}
    for pseudo in pseudo_variants:
        row = {}
        for task in tasks:
            per_model = []
            for m in models:
                vals = [cell_fraction(f, m, task, pseudo) for f in formats]
                vals = [v for v in vals if v is not None]
                if vals:
                    per_model.append(_mean(vals))
            row[task] = _as_float(_mean(per_model))
        per_model_overall = []
        for m in models:
            vals = [model_overall(f, m, pseudo) for f in formats]
            vals = [v for v in vals if v is not None]
            if vals:
                per_model_overall.append(_mean(vals))
        row["overall"] = _as_float(_mean(per_model_overall))
        overall_score[f"pseudo={pseudo}"] = row

    best_format = best_format_per_model(list(cells.values()))

    path_length: list[dict[str, Any]] = []
    predicted_path_length: list[dict[str, Any]] = []
    agg_size_bins: list[dict[str, Any]] = []
    degree_direction: list[dict[str, Any]] = []

    if instance_meta:
        path_length = _accuracy_by(
            records, instance_meta, "ShortestPath",
            lambda meta: meta.get("path_length"), "path_length",
        )
        agg_size_bins = _agg_size_bins(records, instance_meta)
        degree_direction = _accuracy_by(
            records, instance_meta, "HighestDegree",
            lambda meta: meta.get("direction"), "direction", split_by_format=True,
        )
        predicted_path_length = _predicted_path_lengths(records)

    return SummaryTable(
        cells=_sorted_cells(cells),
        token_usage=token_usage,
        best_format=best_format,
        format_overall=format_overall,
        overall_score=overall_score,
        path_length=path_length,
        predicted_path_length=predicted_path_length,
        agg_size_bins=agg_size_bins,
        degree_direction=degree_direction,
        flexible_path=_flexible_path_rows(records),
    )


def _flexible_path_rows(records: list[EvalRecord]) -> list[dict[str, Any]]:
    """Exact vs lenient path accuracy per (model, format, pseudo).

    Models that bury a correct path in chain-of-thought prose score higher
    under the lenient column; strict instruction followers show no gap.
    """
    buckets: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
    for rec in records:
        if rec.task_id != "ShortestPath" or rec.error is not None:
            continue
        flexible = rec.flexible_score if rec.flexible_score is not None else rec.score
        buckets[(rec.model_id, rec.format, rec.pseudo)].append((rec.score or 0, flexible or 0))
    rows = []
    for (model, fmt, pseudo) in sorted(buckets):
        pairs = buckets[(model, fmt, pseudo)]
        rows.append({
            "model": model,
            "format": fmt,
            "pseudo": pseudo,
            "exact_accuracy": sum(e for e, _ in pairs) / len(pairs),
            "flexible_accuracy": sum(f for _, f in pairs) / len(pairs),
            "n": len(pairs),
        })
    return rows


def best_format_per_model(cells: Iterable[CellStat]) -> dict[str, dict[str, Any]]:
    """Argmax format per model by unweighted mean over (task, pseudo) cells.

    Means are exact fractions, so ties are detected reliably; they break
    alphabetically by format name and carry a flag.
    """
    by_model_format: dict[tuple[str, str], list[Fraction]] = defaultdict(list)
    for cell in cells:
        if cell.scored:
            by_model_format[(cell.model, cell.format)].append(cell.fraction())
    out: dict[str, dict[str, Any]] = {}
    for model in sorted({m for m, _ in by_model_format}):
        means = {
            fmt: _mean(vals)
            for (m, fmt), vals in by_model_format.items()
            if m == model
        }
        best_value = max(means.values())
        winners = sorted(f for f, v in means.items() if v == best_value)
        out[model] = {
            "format": winners[0],
            "mean_accuracy": float(best_value),
            "tie": len(winners) > 1,
            "tied_with": winners[1:],
        }
    return out


def _accuracy_by(
    records: list[EvalRecord],
    instance_meta: dict[tuple[str, int, bool], dict],
    task_id: str,
    key_fn,
    key_name: str,
    split_by_format: bool = False,
) -> list[dict[str, Any]]:
    buckets: dict[tuple, list[int]] = defaultdict(list)
    for rec in records:
        if rec.task_id != task_id or rec.error is not None:
            continue
        meta = instance_meta.get((rec.task_id, rec.instance_index, rec.pseudo))
        if meta is None:
            continue
        value = key_fn(meta)
        if value is None:
            continue
        bucket = (rec.format, value) if split_by_format else (value,)
        buckets[bucket].append(rec.score or 0)
    rows = []
    for bucket in sorted(buckets, key=str):
        scores = buckets[bucket]
        row = {key_name: bucket[-1], "accuracy": sum(scores) / len(scores), "n": len(scores)}
        if split_by_format:
            row["format"] = bucket[0]
        rows.append(row)
    return rows


def _size_bin(count: int) -> str:
    return str(count) if count < 8 else "8+"


def _agg_size_bins(
    records: list[EvalRecord],
    instance_meta: dict[tuple[str, int, bool], dict],
) -> list[dict[str, Any]]:
    buckets: dict[str, list[int]] = defaultdict(list)
    for rec in records:
        if rec.task_id not in AGG_TASKS or rec.error is not None:
            continue
        meta = instance_meta.get((rec.task_id, rec.instance_index, rec.pseudo))
        if meta is None or "true_count" not in meta:
            continue
        buckets[_size_bin(meta["true_count"])].append(rec.score or 0)
    return [
        {"bin": b, "accuracy": sum(buckets[b]) / len(buckets[b]), "n": len(buckets[b])}
        for b in AGG_SIZE_BINS
        if b in buckets
    ]


def _predicted_path_lengths(records: list[EvalRecord]) -> list[dict[str, Any]]:
    buckets: dict[tuple[str, str], int] = defaultdict(int)
    for rec in records:
        if rec.task_id != "ShortestPath" or rec.error is not None:
            continue
        parsed, failed = parse_answer("ShortestPath", rec.raw_response or "")
        if failed or not parsed:
            predicted = "none"
        else:
            predicted = str(len(parsed) - 1)
        buckets[(rec.model_id, predicted)] += 1
    return [
        {"model": model, "predicted_length": length, "n": n}
        for (model, length), n in sorted(buckets.items())
    ]


# -- serialization ---------------------------------------------------------------


def write_summary_csv(summary: SummaryTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["format", "model", "task", "pseudo", "accuracy", "n", "errors"])
        for c in summary.cells:
            writer.writerow(
                [c.format, c.model, c.task, int(c.pseudo),
                 "" if c.accuracy is None else f"{c.accuracy:.6f}", c.scored, c.errors]
            )


def write_summary_json(summary: SummaryTable, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(summary.to_json_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )


def write_extra_csvs(summary: SummaryTable, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    tables = {
        "token_usage.csv": (
            ["format", "mean_input_tokens", "n"],
            [[f, v["mean_input_tokens"], v["n"]] for f, v in summary.token_usage.items()],
        ),
        "path_length.csv": (
            ["path_length", "accuracy", "n"],
            [[r["path_length"], r["accuracy"], r["n"]] for r in summary.path_length],
        ),
        "agg_size_bins.csv": (
            ["bin", "accuracy", "n"],
            [[r["bin"], r["accuracy"], r["n"]] for r in summary.agg_size_bins],
        ),
        "degree_direction.csv": (
            ["format", "direction", "accuracy", "n"],
            [[r["format"], r["direction"], r["accuracy"], r["n"]]
             for r in summary.degree_direction],
        ),
        "predicted_path_length.csv": (
            ["model", "predicted_length", "n"],
            [[r["model"], r["predicted_length"], r["n"]]
             for r in summary.predicted_path_length],
        ),
        "flexible_path.csv": (
            ["model", "format", "pseudo", "exact_accuracy", "flexible_accuracy", "n"],
            [[r["model"], r["format"], int(r["pseudo"]),
              r["exact_accuracy"], r["flexible_accuracy"], r["n"]]
             for r in summary.flexible_path],
        ),
    }
    for name, (header, rows) in tables.items():
        path = out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        written.append(path)
    return written


_TOKEN_ORDER = ["list_of_edges", "structured_yaml", "structured_json", "rdf_turtle", "json_ld"]


def token_ordering_ok(summary: SummaryTable) -> bool | None:
    """Check the expected cheap-to-expensive format ordering; None if unmeasured."""
    means = []
    for fmt in _TOKEN_ORDER:
        stats = summary.token_usage.get(fmt)
        if stats is None or not stats["n"]:
            return None
        means.append(stats["mean_input_tokens"])
    return all(a < b for a, b in zip(means, means[1:]))


def digest_text(summary: SummaryTable) -> str:
    """Human-readable run digest: best formats, overall rows, token check."""
    lines = ["== Benchmark digest =="]
    for model, info in sorted(summary.best_format.items()):
        tie = " (tie)" if info["tie"] else ""
        lines.append(
            f"best format for {model}: {info['format']}"
            f" (mean accuracy {info['mean_accuracy']:.3f}){tie}"
        )
    for key, row in sorted(summary.overall_score.items()):
        cols = ", ".join(
            f"{task}={val:.3f}" for task, val in sorted(row.items()) if val is not None
        )
        lines.append(f"overall score [{key}]: {cols}")
    ordering = token_ordering_ok(summary)
    if ordering is None:
        lines.append("token ordering: not measured")
    else:
        lines.append(f"token ordering list_of_edges < structured_yaml < structured_json "
                     f"< rdf_turtle < json_ld: {'OK' if ordering else 'VIOLATED'}")
    for fmt, stats in summary.token_usage.items():
        lines.append(f"mean input tokens [{fmt}]: {stats['mean_input_tokens']:.1f} (n={stats['n']})")
    return "\n".join(lines) + "\n"
