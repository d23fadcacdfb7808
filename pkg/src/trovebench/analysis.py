"""Every reported metric, computed from persisted run records and selections.

All functions are pure batch computations over immutable inputs. Seed spread is
reported as mean plus population standard deviation over exactly the seed set.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .dataset import Dataset, Task, answers_equivalent
from .errors import UsageError, ValidationError
from .execution import ExecStatus
from .generation import MODE_RANK, TROVE_MODES, Mode
from .lexing import called_names
from .pipelines import Candidate, Pipeline, RunRecord, generation_key
from .selection import (
    Mechanism,
    SelectionResult,
    select_one_stage,
    select_oracle,
    select_two_stage,
)


@dataclass(frozen=True)
class Cell:
    mean: float
    std: float


@dataclass
class MetricReport:
    metric: str
    meta: dict
    per_category: dict[str, Cell]
    aggregate: Cell


@dataclass
class UniqueSolveReport:
    meta: dict
    per_category: dict[str, dict[str, Cell]]
    aggregate: dict[str, Cell]


@dataclass
class JaccardReport:
    meta: dict
    per_category: dict[str, float]
    aggregate: float


@dataclass(frozen=True)
class GainCell:
    consistent_count: int
    consistent_pct: float
    potential_count: int
    potential_pct: float


@dataclass
class GainReport:
    meta: dict
    per_category: dict[str, dict[str, GainCell]]  # category -> direction -> cell
    aggregate: dict[str, GainCell]


@dataclass
class DifficultyReport:
    meta: dict
    per_category: dict[str, dict[int, float]]  # present cells only
    aggregate: dict[int, float]
    excluded_without_difficulty: int


@dataclass(frozen=True)
class CurvePoint:
    k: int
    mean: float
    std: float


@dataclass
class ReuseReport:
    meta: dict
    tools: list[dict]
    learned_per_category: dict[str, int]


def _cell(values: Sequence[float]) -> Cell:
    return Cell(mean=statistics.fmean(values), std=statistics.pstdev(values))


def _grouped_tasks(dataset: Dataset) -> dict[str, list[Task]]:
    groups: dict[str, list[Task]] = {category: [] for category in dataset.categories()}
    for task in dataset.tasks:
        groups[task.category].append(task)
    return groups


def _report_from_per_seed(
    metric: str, meta: dict, dataset: Dataset, per_seed_values: list[dict[str, float]], per_seed_aggregate: list[float]
) -> MetricReport:
    per_category = {
        category: _cell([values[category] for values in per_seed_values])
        for category in dataset.categories()
    }
    return MetricReport(
        metric=metric, meta=meta, per_category=per_category, aggregate=_cell(per_seed_aggregate)
    )


def is_correct(candidate: Candidate, truth) -> bool:
    return (
        candidate.outcome is not None
        and candidate.outcome.status is ExecStatus.SUCCESS
        and candidate.outcome.answer is not None
        and answers_equivalent(candidate.outcome.answer, truth)
    )


def evaluation_order(candidates: Iterable[Candidate], pipeline: Pipeline) -> list[Candidate]:
    """Order used for budget prefixes.

    The flat baseline orders by sample index. The budget-split pipeline
    round-robins across modes so a prefix of length k (k a multiple of 3)
    contains exactly k/3 samples per mode, in mode order.
    """
    if pipeline is Pipeline.TROVE:
        return sorted(candidates, key=lambda c: (c.sample_index, MODE_RANK[c.mode]))
    return sorted(candidates, key=lambda c: c.sample_index)


def first_k(candidates: Iterable[Candidate], pipeline: Pipeline, k: int) -> list[Candidate]:
    ordered = evaluation_order(candidates, pipeline)
    if k > len(ordered):
        raise ValidationError(f"k={k} exceeds the {len(ordered)} candidates recorded per task")
    if pipeline is Pipeline.TROVE and k % 3 != 0:
        raise ValidationError("budget-split records evaluate only at multiples of 3")
    return ordered[:k]


def select_run(
    record: RunRecord, mechanism: Mechanism, dataset: Dataset | None = None
) -> dict[str, SelectionResult]:
    """Apply one selection mechanism to every task of a run."""
    if mechanism is Mechanism.TWO_STAGE and record.pipeline is not Pipeline.TROVE:
        raise UsageError("two-stage selection needs per-mode candidate pools; this run has a single mode")
    truths = dataset.task_map() if dataset is not None else {}
    results: dict[str, SelectionResult] = {}
    for task_id, group in record.by_task().items():
        if mechanism is Mechanism.ONE_STAGE:
            results[task_id] = select_one_stage(group)
        elif mechanism is Mechanism.TWO_STAGE:
            per_mode = {mode: [c for c in group if c.mode is mode] for mode in TROVE_MODES}
            results[task_id] = select_two_stage(per_mode)
        else:
            if task_id not in truths:
                raise UsageError(f"oracle selection needs ground truth for task {task_id}")
            results[task_id] = select_oracle(group, truths[task_id].truth)
    return results


def accuracy(
    selections_by_seed: Mapping[int, Mapping[str, SelectionResult]], dataset: Dataset
) -> MetricReport:
    """Fraction of tasks whose selected answer matches truth; no selection counts as wrong."""
    mechanisms = {
        result.mechanism
        for selections in selections_by_seed.values()
        for result in selections.values()
    }
    if len(mechanisms) > 1:
        raise ValidationError(f"mixed selection mechanisms across seeds: {sorted(m.value for m in mechanisms)}")
    groups = _grouped_tasks(dataset)
    per_seed_values: list[dict[str, float]] = []
    per_seed_aggregate: list[float] = []
    for seed in sorted(selections_by_seed):
        selections = selections_by_seed[seed]
        values: dict[str, float] = {}
        total_correct = 0
        for category, tasks in groups.items():
            correct = 0
            for task in tasks:
                result = selections.get(task.id)
                if result is not None and result.answer is not None and answers_equivalent(
                    result.answer, task.truth
                ):
                    correct += 1
            values[category] = correct / len(tasks)
            total_correct += correct
        per_seed_values.append(values)
        per_seed_aggregate.append(total_correct / len(dataset))
    meta = {
        "mechanism": next(iter(mechanisms)).value if mechanisms else None,
        "seeds": sorted(selections_by_seed),
    }
    return _report_from_per_seed("accuracy", meta, dataset, per_seed_values, per_seed_aggregate)


def _solved_by_prefix(record: RunRecord, task: Task, k: int | None) -> bool:
    group = record.by_task().get(task.id, [])
    pool = first_k(group, record.pipeline, k) if k is not None else group
    return any(is_correct(c, task.truth) for c in pool)


def oracle_solved_set(
    record: RunRecord,
    dataset: Dataset,
    k: int | None = None,
    mode: Mode | None = None,
    per_mode_k: int | None = None,
) -> set[str]:
    """Task ids solved under oracle selection, optionally restricted to one mode's prefix."""
    solved: set[str] = set()
    by_task = record.by_task()
    for task in dataset.tasks:
        group = by_task.get(task.id, [])
        if mode is not None:
            pool = sorted((c for c in group if c.mode is mode), key=lambda c: c.sample_index)
            if per_mode_k is not None:
                pool = pool[:per_mode_k]
        elif k is not None:
            pool = first_k(group, record.pipeline, k)
        else:
            pool = group
        if any(is_correct(c, task.truth) for c in pool):
            solved.add(task.id)
    return solved


def pass_at_k(records_by_seed: Mapping[int, RunRecord], dataset: Dataset, k: int) -> MetricReport:
    """Direct pass@k: any of the first k candidates correct (no combinatorial estimator)."""
    groups = _grouped_tasks(dataset)
    per_seed_values: list[dict[str, float]] = []
    per_seed_aggregate: list[float] = []
    for seed in sorted(records_by_seed):
        record = records_by_seed[seed]
        values: dict[str, float] = {}
        total = 0
        for category, tasks in groups.items():
            solved = sum(1 for task in tasks if _solved_by_prefix(record, task, k))
            values[category] = solved / len(tasks)
            total += solved
        per_seed_values.append(values)
        per_seed_aggregate.append(total / len(dataset))
    meta = {"k": k, "seeds": sorted(records_by_seed)}
    return _report_from_per_seed("pass_at_k", meta, dataset, per_seed_values, per_seed_aggregate)


def _combined_order(records: Mapping[int, RunRecord], task_id: str) -> list[Candidate]:
    combined: list[Candidate] = []
    for seed in sorted(records):
        record = records[seed]
        combined.extend(evaluation_order(record.by_task().get(task_id, []), record.pipeline))
    return combined


def _mechanism_correct(pool: list[Candidate], task: Task, mechanism: Mechanism) -> bool:
    if not pool:
        return False
    if mechanism is Mechanism.ORACLE:
        return any(is_correct(c, task.truth) for c in pool)
    if mechanism is Mechanism.ONE_STAGE:
        result = select_one_stage(pool)
    else:
        per_mode: dict[Mode, list[Candidate]] = {}
        for candidate in pool:
            per_mode.setdefault(candidate.mode, []).append(candidate)
        result = select_two_stage(per_mode)
    return result.answer is not None and answers_equivalent(result.answer, task.truth)


def seed_combined_curve(
    records: Mapping[int, RunRecord],
    dataset: Dataset,
    mechanism: Mechanism = Mechanism.ORACLE,
    k_total: int | None = None,
    ks: Sequence[int] | None = None,
) -> list[tuple[int, float]]:
    """Accuracy over candidates concatenated across seeds in (seed, sample order).

    With the oracle mechanism this is the seed-combined pass curve; agreement
    mechanisms re-run selection on each pooled prefix.
    """
    if not records:
        raise ValidationError("seed combination needs at least one seed")
    depth = sum(record.k for record in records.values())
    if k_total is None:
        k_total = depth
    if k_total > depth:
        raise ValidationError(
            f"k_total={k_total} needs more seeds: {len(records)} seeds provide only {depth} samples"
        )
    pipelines = {record.pipeline for record in records.values()}
    if len(pipelines) > 1:
        raise ValidationError("cannot combine seeds across different pipelines")
    pipeline = next(iter(pipelines))
    if ks is None:
        step = 3 if pipeline is Pipeline.TROVE else 1
        ks = range(step, k_total + 1, step)
    combined = {task.id: _combined_order(records, task.id) for task in dataset.tasks}
    curve: list[tuple[int, float]] = []
    for k in ks:
        solved = sum(
            1 for task in dataset.tasks if _mechanism_correct(combined[task.id][:k], task, mechanism)
        )
        curve.append((k, solved / len(dataset)))
    return curve


def seed_combined_pass(
    records: Mapping[int, RunRecord], dataset: Dataset, k_total: int | None = None
) -> list[tuple[int, float]]:
    """Pass@k over the cross-seed concatenation, up to k_total pooled samples."""
    return seed_combined_curve(records, dataset, Mechanism.ORACLE, k_total)


def budget_curve(
    records_by_seed: Mapping[int, RunRecord],
    dataset: Dataset,
    mechanism: Mechanism,
    ks: Sequence[int] | None = None,
) -> list[CurvePoint]:
    """Per-seed accuracy at truncated budgets, mean and spread across seeds."""
    if not records_by_seed:
        raise ValidationError("budget curve needs at least one seed")
    pipelines = {record.pipeline for record in records_by_seed.values()}
    if len(pipelines) > 1:
        raise ValidationError("budget curve needs records from a single pipeline")
    pipeline = next(iter(pipelines))
    k_max = min(record.k for record in records_by_seed.values())
    if ks is None:
        step = 3 if pipeline is Pipeline.TROVE else 1
        ks = range(step, k_max + 1, step)
    points: list[CurvePoint] = []
    for k in ks:
        per_seed: list[float] = []
        for seed in sorted(records_by_seed):
            record = records_by_seed[seed]
            by_task = record.by_task()
            solved = sum(
                1
                for task in dataset.tasks
                if _mechanism_correct(first_k(by_task.get(task.id, []), pipeline, k), task, mechanism)
            )
            per_seed.append(solved / len(dataset))
        cell = _cell(per_seed)
        points.append(CurvePoint(k=k, mean=cell.mean, std=cell.std))
    return points


def distinct_solutions(records_by_seed: Mapping[int, RunRecord], dataset: Dataset) -> MetricReport:
    """Mean number of answer-equivalence classes among each task's successful candidates."""
    groups = _grouped_tasks(dataset)
    per_seed_values: list[dict[str, float]] = []
    per_seed_aggregate: list[float] = []
    for seed in sorted(records_by_seed):
        record = records_by_seed[seed]
        by_task = record.by_task()
        counts: dict[str, int] = {}
        for task in dataset.tasks:
            counts[task.id] = _distinct_count(by_task.get(task.id, []))
        values = {
            category: statistics.fmean([counts[task.id] for task in tasks])
            for category, tasks in groups.items()
        }
        per_seed_values.append(values)
        per_seed_aggregate.append(statistics.fmean(counts.values()))
    meta = {"seeds": sorted(records_by_seed)}
    return _report_from_per_seed("distinct_solutions", meta, dataset, per_seed_values, per_seed_aggregate)


def _distinct_count(candidates: list[Candidate]) -> int:
    answers = [
        c.outcome.answer
        for c in sorted(candidates, key=generation_key)
        if c.outcome is not None and c.outcome.status is ExecStatus.SUCCESS and c.outcome.answer is not None
    ]
    representatives: list = []
    for answer in answers:
        if not any(answers_equivalent(answer, rep) for rep in representatives):
            representatives.append(answer)
    return len(representatives)


def unique_solve_fraction(
    records_by_seed: Mapping[int, RunRecord], dataset: Dataset, per_mode_k: int | None = None
) -> UniqueSolveReport:
    """Fraction of tasks solved by exactly one mode under per-mode oracle prefixes.

    ``per_mode_k`` defaults to k/3, the per-mode share of the run budget.
    """
    groups = _grouped_tasks(dataset)
    modes = list(TROVE_MODES)
    per_seed: dict[Mode, list[dict[str, float]]] = {mode: [] for mode in modes}
    per_seed_aggregate: dict[Mode, list[float]] = {mode: [] for mode in modes}
    for seed in sorted(records_by_seed):
        record = records_by_seed[seed]
        if record.pipeline is not Pipeline.TROVE:
            raise ValidationError("unique-solve analysis needs budget-split records with three modes")
        budget = per_mode_k if per_mode_k is not None else record.k // 3
        solved = {
            mode: oracle_solved_set(record, dataset, mode=mode, per_mode_k=budget) for mode in modes
        }
        for mode in modes:
            others: set[str] = set()
            for other in modes:
                if other is not mode:
                    others |= solved[other]
            unique = solved[mode] - others
            values = {
                category: len([t for t in tasks if t.id in unique]) / len(tasks)
                for category, tasks in groups.items()
            }
            per_seed[mode].append(values)
            per_seed_aggregate[mode].append(len(unique) / len(dataset))
    per_category = {
        category: {
            mode.value: _cell([values[category] for values in per_seed[mode]]) for mode in modes
        }
        for category in dataset.categories()
    }
    aggregate = {mode.value: _cell(per_seed_aggregate[mode]) for mode in modes}
    meta = {"per_mode_k": per_mode_k, "seeds": sorted(records_by_seed)}
    return UniqueSolveReport(meta=meta, per_category=per_category, aggregate=aggregate)


def mean_jaccard(sets_a: Sequence[set], sets_b: Sequence[set]) -> float:
    """Mean of |A∩B| / |A∪B| over all pairs; two empty sets count as similarity 1."""
    if not sets_a or not sets_b:
        raise ValidationError("jaccard needs at least one solved-set per side")
    total = 0.0
    for left in sets_a:
        for right in sets_b:
            union = left | right
            total += (len(left & right) / len(union)) if union else 1.0
    return total / (len(sets_a) * len(sets_b))


def jaccard_cross_type(
    records_a: Mapping[int, RunRecord],
    records_b: Mapping[int, RunRecord],
    dataset: Dataset,
    mode_a: Mode | None = None,
    mode_b: Mode | None = None,
    per_mode_k: int | None = None,
) -> JaccardReport:
    """Cross-type mean Jaccard similarity of oracle-solved task sets over all seed pairs."""

    def solved_sets(records: Mapping[int, RunRecord], mode: Mode | None) -> list[set[str]]:
        sets = []
        for seed in sorted(records):
            record = records[seed]
            budget = per_mode_k
            if mode is not None and budget is None:
                budget = record.k // 3 if record.pipeline is Pipeline.TROVE else record.k
            sets.append(oracle_solved_set(record, dataset, mode=mode, per_mode_k=budget))
        return sets

    sets_a = solved_sets(records_a, mode_a)
    sets_b = solved_sets(records_b, mode_b)
    per_category: dict[str, float] = {}
    for category in dataset.categories():
        ids = {task.id for task in dataset.tasks if task.category == category}
        per_category[category] = mean_jaccard(
            [s & ids for s in sets_a], [s & ids for s in sets_b]
        )
    meta = {
        "mode_a": mode_a.value if mode_a else None,
        "mode_b": mode_b.value if mode_b else None,
        "per_mode_k": per_mode_k,
    }
    return JaccardReport(meta=meta, per_category=per_category, aggregate=mean_jaccard(sets_a, sets_b))


def gain_sets(sets_a: Sequence[set], sets_b: Sequence[set]) -> tuple[set, set]:
    """Consistent and potential gain of side A over side B.

    Consistent: solved by every A seed and no B seed. Potential: solved by at
    least one A seed, by no B seed, and not by all A seeds.
    """
    inter_a = set.intersection(*map(set, sets_a)) if sets_a else set()
    union_a = set.union(*map(set, sets_a)) if sets_a else set()
    union_b = set.union(*map(set, sets_b)) if sets_b else set()
    consistent = inter_a - union_b
    potential = (union_a - union_b) - consistent
    return consistent, potential


def coverage_gains(
    trove_by_seed: Mapping[int, RunRecord],
    primitive_by_seed: Mapping[int, RunRecord],
    dataset: Dataset,
) -> GainReport:
    """Exclusive oracle coverage in both directions, per category and overall."""
    trove_sets = [
        oracle_solved_set(trove_by_seed[seed], dataset) for seed in sorted(trove_by_seed)
    ]
    primitive_sets = [
        oracle_solved_set(primitive_by_seed[seed], dataset) for seed in sorted(primitive_by_seed)
    ]
    directions = {
        Pipeline.TROVE.value: gain_sets(trove_sets, primitive_sets),
        Pipeline.PRIMITIVE.value: gain_sets(primitive_sets, trove_sets),
    }
    groups = _grouped_tasks(dataset)
    per_category: dict[str, dict[str, GainCell]] = {}
    for category, tasks in groups.items():
        ids = {task.id for task in tasks}
        per_category[category] = {}
        for direction, (consistent, potential) in directions.items():
            c, p = len(consistent & ids), len(potential & ids)
            per_category[category][direction] = GainCell(
                consistent_count=c,
                consistent_pct=100.0 * c / len(tasks),
                potential_count=p,
                potential_pct=100.0 * p / len(tasks),
            )
    aggregate = {
        direction: GainCell(
            consistent_count=len(consistent),
            consistent_pct=100.0 * len(consistent) / len(dataset),
            potential_count=len(potential),
            potential_pct=100.0 * len(potential) / len(dataset),
        )
        for direction, (consistent, potential) in directions.items()
    }
    meta = {"trove_seeds": sorted(trove_by_seed), "primitive_seeds": sorted(primitive_by_seed)}
    return GainReport(meta=meta, per_category=per_category, aggregate=aggregate)


def difficulty_breakdown(
    records_by_seed: Mapping[int, RunRecord], dataset: Dataset, k: int | None = None
) -> DifficultyReport:
    """Oracle-solved percentage per (category, difficulty) cell, mean across seeds.

    Cells without tasks are absent rather than zero; tasks lacking a difficulty
    label are excluded and counted.
    """
    labelled = [task for task in dataset.tasks if task.difficulty is not None]
    excluded = len(dataset) - len(labelled)
    cells: dict[str, dict[int, list[Task]]] = {}
    for task in labelled:
        cells.setdefault(task.category, {}).setdefault(task.difficulty, []).append(task)
    per_seed_solved: list[set[str]] = [
        oracle_solved_set(records_by_seed[seed], dataset, k=k) for seed in sorted(records_by_seed)
    ]

    def mean_pct(tasks: list[Task]) -> float:
        fractions = [
            100.0 * sum(1 for t in tasks if t.id in solved) / len(tasks)
            for solved in per_seed_solved
        ]
        return statistics.fmean(fractions)

    per_category = {
        category: {level: mean_pct(tasks) for level, tasks in sorted(levels.items())}
        for category, levels in sorted(cells.items())
    }
    by_level: dict[int, list[Task]] = {}
    for task in labelled:
        by_level.setdefault(task.difficulty, []).append(task)
    aggregate = {level: mean_pct(tasks) for level, tasks in sorted(by_level.items())}
    meta = {"k": k, "seeds": sorted(records_by_seed)}
    return DifficultyReport(
        meta=meta,
        per_category=per_category,
        aggregate=aggregate,
        excluded_without_difficulty=excluded,
    )


def tool_reuse_stats(
    record: RunRecord, selections: Mapping[str, SelectionResult], dataset: Dataset
) -> ReuseReport:
    """Per-tool reuse by later selected-correct candidates, origin task excluded."""
    task_map = dataset.task_map()
    position = {task.id: index for index, task in enumerate(dataset.tasks)}
    correct_choices: list[tuple[int, set[str]]] = []
    for task_id, result in selections.items():
        if result.chosen is None or result.answer is None or task_id not in task_map:
            continue
        if answers_equivalent(result.answer, task_map[task_id].truth):
            correct_choices.append((position[task_id], called_names(result.chosen.source)))
    tools: list[dict] = []
    learned: dict[str, int] = {}
    for entry in record.tools_log:
        origin = str(entry["origin_task"])
        origin_category = task_map[origin].category if origin in task_map else ""
        learned[origin_category] = learned.get(origin_category, 0) + 1
        origin_position = position.get(origin, -1)
        reuse = sum(
            1
            for task_position, calls in correct_choices
            if task_position > origin_position and entry["name"] in calls
        )
        tools.append(
            {
                "name": str(entry["name"]),
                "origin_task": origin,
                "origin_category": origin_category,
                "created_at_step": int(entry["created_at_step"]),
                "reuse_count": reuse,
            }
        )
    meta = {"seed": record.seed, "k": record.k}
    return ReuseReport(meta=meta, tools=tools, learned_per_category=dict(sorted(learned.items())))
