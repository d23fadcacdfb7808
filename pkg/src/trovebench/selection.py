"""Final-candidate selection: pooled agreement, per-mode-then-pooled agreement, and oracle.

Agreement selection follows the published rule: among candidates that executed
successfully, the most frequent answer wins; ties go to the shortest program in
terms of operations. All residual ties resolve by mode order then sample index,
so selection is a deterministic total function of the candidate set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping

from .dataset import AnswerValue, answers_equivalent
from .errors import ValidationError
from .execution import ExecStatus
from .generation import MODE_RANK, Mode
from .lexing import tokenize_source

if TYPE_CHECKING:
    from .pipelines import Candidate


class Mechanism(str, Enum):
    ONE_STAGE = "ONE_STAGE"
    TWO_STAGE = "TWO_STAGE"
    ORACLE = "ORACLE"


@dataclass
class SelectionResult:
    task_id: str
    chosen: "Candidate | None"
    mechanism: Mechanism
    answer: AnswerValue | None
    vote_detail: dict[str, int] = field(default_factory=dict)


def complexity(source: str) -> int:
    """Program complexity proxy: non-comment, non-whitespace lexical token count."""
    return len(tokenize_source(source))


def _order_key(candidate: "Candidate") -> tuple[int, int]:
    return (MODE_RANK[candidate.mode], candidate.sample_index)


def _successes(candidates: Iterable["Candidate"]) -> list["Candidate"]:
    return [
        c
        for c in candidates
        if c.outcome is not None and c.outcome.status is ExecStatus.SUCCESS and c.outcome.answer is not None
    ]


def _answer_classes(successes: list["Candidate"]) -> list[list["Candidate"]]:
    """Group successes into answer-equivalence classes.

    Tolerance-based equivalence is not transitive in general, so grouping is
    first-match against each class representative, scanning candidates in
    (mode, sample_index) order for determinism.
    """
    classes: list[list["Candidate"]] = []
    for candidate in sorted(successes, key=_order_key):
        for members in classes:
            if answers_equivalent(candidate.outcome.answer, members[0].outcome.answer):
                members.append(candidate)
                break
        else:
            classes.append([candidate])
    return classes


def _class_pick(members: list["Candidate"]) -> "Candidate":
    return min(members, key=lambda c: (complexity(c.source), _order_key(c)))


def select_best(candidates: Iterable["Candidate"]) -> "Candidate | None":
    """Most frequent answer among successes; ties to the lowest-complexity class.

    Returns the minimum-complexity member of the winning class, or None when no
    candidate executed successfully.
    """
    successes = _successes(candidates)
    if not successes:
        return None
    classes = _answer_classes(successes)
    best = min(
        classes,
        key=lambda members: (
            -len(members),
            complexity(_class_pick(members).source),
            _order_key(_class_pick(members)),
        ),
    )
    return _class_pick(best)


def vote_detail(candidates: Iterable["Candidate"]) -> dict[str, int]:
    """Audit map: canonical answer of each equivalence class to its vote count."""
    classes = _answer_classes(_successes(candidates))
    return {members[0].outcome.answer.canonical: len(members) for members in classes}


def _require_single_task(candidates: list["Candidate"]) -> str | None:
    task_ids = {c.task_id for c in candidates}
    if len(task_ids) > 1:
        raise ValidationError(f"candidates span multiple tasks: {sorted(task_ids)}")
    return next(iter(task_ids)) if task_ids else None


def select_one_stage(all_k_candidates: Iterable["Candidate"]) -> SelectionResult:
    """Pool every candidate across modes, then apply the agreement rule once."""
    pool = list(all_k_candidates)
    task_id = _require_single_task(pool) or ""
    chosen = select_best(pool)
    return SelectionResult(
        task_id=task_id,
        chosen=chosen,
        mechanism=Mechanism.ONE_STAGE,
        answer=chosen.outcome.answer if chosen else None,
        vote_detail=vote_detail(pool),
    )


def select_two_stage(per_mode_candidates: Mapping[Mode, Iterable["Candidate"]]) -> SelectionResult:
    """Agreement per mode first, then agreement across the per-mode winners.

    This is the originally shipped variant: each stage-1 vote runs on a third
    of the budget, which is what makes it weaker than the pooled rule.
    """
    everything = [c for group in per_mode_candidates.values() for c in group]
    task_id = _require_single_task(everything) or ""
    winners: list["Candidate"] = []
    for mode in sorted(per_mode_candidates, key=lambda m: MODE_RANK[m]):
        winner = select_best(per_mode_candidates[mode])
        if winner is not None:
            winners.append(winner)
    chosen = select_best(winners)
    return SelectionResult(
        task_id=task_id,
        chosen=chosen,
        mechanism=Mechanism.TWO_STAGE,
        answer=chosen.outcome.answer if chosen else None,
        vote_detail=vote_detail(winners),
    )


def select_oracle(candidates: Iterable["Candidate"], truth: AnswerValue) -> SelectionResult:
    """Perfect selector: the earliest-generated correct candidate, if any.

    Generation order is mode order then sample index, which realizes "as soon
    as it appears" for the budget-split pipeline as well.
    """
    if truth is None:
        raise ValidationError("oracle selection needs a ground-truth answer")
    pool = list(candidates)
    task_id = _require_single_task(pool) or ""
    correct = [
        c
        for c in _successes(pool)
        if answers_equivalent(c.outcome.answer, truth)
    ]
    chosen = min(correct, key=_order_key) if correct else None
    return SelectionResult(
        task_id=task_id,
        chosen=chosen,
        mechanism=Mechanism.ORACLE,
        answer=chosen.outcome.answer if chosen else None,
        vote_detail=vote_detail(pool),
    )
