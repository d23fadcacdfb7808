"""Benchmark tasks: file loading, answer normalization, and answer equivalence."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import DatasetError

# Relative tolerance for numeric answer comparison, anchored on the second
# argument: |a - b| <= REL_TOLERANCE * max(1, |b|). Tight enough that distinct
# rationals at competition-math magnitudes stay distinct, loose enough to
# accept float-printed answers.
REL_TOLERANCE = Fraction(1, 10**6)

VALID_DIFFICULTIES = (1, 2, 3, 4, 5)

_FRACTION_RE = re.compile(r"^[+-]?\d+\s*/\s*\d+$")
_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class AnswerValue:
    """One answer in raw, canonical-string, and (when parseable) exact numeric form."""

    raw: str
    canonical: str
    numeric: Fraction | None


@dataclass(frozen=True)
class Task:
    id: str
    category: str
    difficulty: int | None
    query: str
    truth: AnswerValue


@dataclass(frozen=True)
class Dataset:
    name: str
    tasks: tuple[Task, ...]

    def __len__(self) -> int:
        return len(self.tasks)

    def task_map(self) -> dict[str, Task]:
        return {task.id: task for task in self.tasks}

    def categories(self) -> list[str]:
        """Category labels, alphabetical."""
        return sorted({task.category for task in self.tasks})


def _strip_wrappers(text: str) -> str:
    # Iterate to a fixpoint so normalization is idempotent even for nested
    # quoting like '"5".'
    prev = None
    while prev != text:
        prev = text
        text = text.strip()
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
            text = text[1:-1]
        text = text.rstrip(".")
    return text


def _parse_numeric(text: str) -> Fraction | None:
    if _FRACTION_RE.match(text):
        try:
            return Fraction(text.replace(" ", ""))
        except (ValueError, ZeroDivisionError):
            return None
    if _NUMBER_RE.match(text):
        try:
            return Fraction(text)
        except ValueError:
            return None
    return None


def normalize_answer(raw: object) -> AnswerValue:
    """Canonicalize an answer and parse ints, decimals, and simple fractions exactly.

    Unparseable values keep only their canonical string form.
    """
    text = _strip_wrappers(str(raw))
    text = " ".join(text.split())
    return AnswerValue(raw=str(raw), canonical=text, numeric=_parse_numeric(text))


def answers_equivalent(a: AnswerValue, b: AnswerValue) -> bool:
    """True when both parse numerically and are close, or canonical strings match.

    The relative tolerance is anchored on ``b``, so the check is symmetric only
    up to that anchor; callers that care should pass the reference value as ``b``.
    """
    if a.numeric is not None and b.numeric is not None:
        tolerance = REL_TOLERANCE * max(Fraction(1), abs(b.numeric))
        if abs(a.numeric - b.numeric) <= tolerance:
            return True
    return a.canonical == b.canonical


def _parse_record(obj: dict, where: str) -> Task:
    for key in ("id", "category", "query", "answer"):
        if key not in obj:
            raise DatasetError(f"{where}: missing field {key!r}")
    task_id = str(obj["id"])
    if not task_id:
        raise DatasetError(f"{where}: empty task id")
    difficulty = obj.get("difficulty")
    if difficulty is not None:
        if not isinstance(difficulty, int) or difficulty not in VALID_DIFFICULTIES:
            raise DatasetError(f"{where}: difficulty must be one of {VALID_DIFFICULTIES} or null")
    return Task(
        id=task_id,
        category=str(obj["category"]),
        difficulty=difficulty,
        query=str(obj["query"]),
        truth=normalize_answer(obj["answer"]),
    )


def load_dataset(path: str | Path, name: str | None = None) -> Dataset:
    """Load tasks from a line-delimited record file, preserving file order."""
    path = Path(path)
    tasks: list[Task] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{where}: invalid record: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{where}: expected an object per line")
            task = _parse_record(obj, where)
            if task.id in seen:
                raise DatasetError(f"{where}: duplicate task id {task.id!r}")
            seen.add(task.id)
            tasks.append(task)
    return Dataset(name=name or path.stem, tasks=tuple(tasks))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write ``dataset`` in the line-delimited record format read by load_dataset."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for task in dataset.tasks:
            record = {
                "id": task.id,
                "category": task.category,
                "difficulty": task.difficulty,
                "query": task.query,
                "answer": task.truth.raw,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
