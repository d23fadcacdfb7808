"""Render analysis results into machine-readable CSV tables and a text summary.

Output is fully deterministic: categories sort alphabetically with the
dataset-level aggregate last, floats print with fixed precision, and nothing
carries a timestamp.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .analysis import (
    CurvePoint,
    DifficultyReport,
    GainReport,
    JaccardReport,
    MetricReport,
    ReuseReport,
    UniqueSolveReport,
)

FLOAT_FMT = "{:.4f}"
PCT_FMT = "{:.2f}"


def _fmt(value: float) -> str:
    return FLOAT_FMT.format(value)


def _fmt_pct(value: float) -> str:
    return PCT_FMT.format(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8")


def accuracy_table(
    path: Path,
    aggregate_label: str,
    columns: dict[str, MetricReport],
) -> None:
    """One row per category plus the aggregate; two columns (mean, std) per variant."""
    header = ["category"]
    for name in columns:
        header += [f"{name}_mean", f"{name}_std"]
    categories = sorted({c for report in columns.values() for c in report.per_category})
    rows = []
    for category in categories:
        row: list = [category]
        for report in columns.values():
            cell = report.per_category[category]
            row += [_fmt(cell.mean), _fmt(cell.std)]
        rows.append(row)
    aggregate_row: list = [aggregate_label]
    for report in columns.values():
        aggregate_row += [_fmt(report.aggregate.mean), _fmt(report.aggregate.std)]
    rows.append(aggregate_row)
    _write_csv(path, header, rows)


def unique_solve_table(path: Path, aggregate_label: str, report: UniqueSolveReport) -> None:
    modes = ["IMPORT", "CREATE", "SKIP"]
    header = ["category"]
    for mode in modes:
        header += [f"{mode.lower()}_mean", f"{mode.lower()}_std"]
    rows = []
    for category in sorted(report.per_category):
        row: list = [category]
        for mode in modes:
            cell = report.per_category[category][mode]
            row += [_fmt(cell.mean), _fmt(cell.std)]
        rows.append(row)
    aggregate_row: list = [aggregate_label]
    for mode in modes:
        cell = report.aggregate[mode]
        aggregate_row += [_fmt(cell.mean), _fmt(cell.std)]
    rows.append(aggregate_row)
    _write_csv(path, header, rows)


def distinct_table(
    path: Path, aggregate_label: str, primitive: MetricReport, trove: MetricReport
) -> None:
    header = ["category", "primitive_mean", "primitive_std", "trove_mean", "trove_std", "delta"]
    rows = []
    for category in sorted(primitive.per_category):
        p, t = primitive.per_category[category], trove.per_category[category]
        rows.append([category, _fmt(p.mean), _fmt(p.std), _fmt(t.mean), _fmt(t.std), _fmt(t.mean - p.mean)])
    p, t = primitive.aggregate, trove.aggregate
    rows.append([aggregate_label, _fmt(p.mean), _fmt(p.std), _fmt(t.mean), _fmt(t.std), _fmt(t.mean - p.mean)])
    _write_csv(path, header, rows)


def curve_table(path: Path, curves: dict[tuple[str, str], list[CurvePoint]]) -> None:
    """Budget-sweep data: one row per (pipeline, mechanism, k)."""
    header = ["pipeline", "mechanism", "k", "accuracy_mean", "accuracy_std"]
    rows = []
    for (pipeline, mechanism), points in sorted(curves.items()):
        for point in points:
            rows.append([pipeline, mechanism, point.k, _fmt(point.mean), _fmt(point.std)])
    _write_csv(path, header, rows)


def combined_curve_table(path: Path, curves: dict[tuple[str, str], list[tuple[int, float]]]) -> None:
    header = ["pipeline", "mechanism", "k", "accuracy"]
    rows = []
    for (pipeline, mechanism), points in sorted(curves.items()):
        for k, value in points:
            rows.append([pipeline, mechanism, k, _fmt(value)])
    _write_csv(path, header, rows)


def jaccard_table(path: Path, aggregate_label: str, reports: dict[str, JaccardReport]) -> None:
    header = ["category"] + [name for name in reports]
    rows = []
    categories = sorted({c for report in reports.values() for c in report.per_category})
    for category in categories:
        rows.append([category] + [_fmt(report.per_category[category]) for report in reports.values()])
    rows.append([aggregate_label] + [_fmt(report.aggregate) for report in reports.values()])
    _write_csv(path, header, rows)


def coverage_table(path: Path, aggregate_label: str, report: GainReport) -> None:
    header = [
        "category",
        "direction",
        "consistent_count",
        "consistent_pct",
        "potential_count",
        "potential_pct",
    ]
    rows = []
    for category in sorted(report.per_category):
        for direction in sorted(report.per_category[category]):
            cell = report.per_category[category][direction]
            rows.append(
                [
                    category,
                    direction,
                    cell.consistent_count,
                    _fmt_pct(cell.consistent_pct),
                    cell.potential_count,
                    _fmt_pct(cell.potential_pct),
                ]
            )
    for direction in sorted(report.aggregate):
        cell = report.aggregate[direction]
        rows.append(
            [
                aggregate_label,
                direction,
                cell.consistent_count,
                _fmt_pct(cell.consistent_pct),
                cell.potential_count,
                _fmt_pct(cell.potential_pct),
            ]
        )
    _write_csv(path, header, rows)


def difficulty_table(path: Path, aggregate_label: str, reports: dict[str, DifficultyReport]) -> None:
    """Rows per (category, method); absent cells stay empty, not zero."""
    header = ["category", "method", "level_1", "level_2", "level_3", "level_4", "level_5"]
    rows = []
    categories = sorted({c for report in reports.values() for c in report.per_category})
    for category in categories:
        for method, report in reports.items():
            levels = report.per_category.get(category, {})
            rows.append(
                [category, method]
                + [(_fmt_pct(levels[lvl]) if lvl in levels else "") for lvl in range(1, 6)]
            )
    for method, report in reports.items():
        rows.append(
            [aggregate_label, method]
            + [(_fmt_pct(report.aggregate[lvl]) if lvl in report.aggregate else "") for lvl in range(1, 6)]
        )
    _write_csv(path, header, rows)


def reuse_table(path: Path, reports: dict[int, ReuseReport]) -> None:
    header = ["seed", "tool", "origin_task", "origin_category", "created_at_step", "reuse_count"]
    rows = []
    for seed in sorted(reports):
        for t in reports[seed].tools:
            rows.append(
                [seed, t["name"], t["origin_task"], t["origin_category"], t["created_at_step"], t["reuse_count"]]
            )
    _write_csv(path, header, rows)


def write_summary(path: Path, sections: list[tuple[str, list[str]]]) -> None:
    lines: list[str] = []
    for title, body in sections:
        lines.append(f"== {title} ==")
        lines.extend(body)
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
