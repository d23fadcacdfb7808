#!/usr/bin/env python3
"""Regenerate the bundled mini benchmark fixtures under fixtures/mini/.

The mini benchmark is 10 synthetic tasks with fully scripted completions and
execution outcomes for both pipelines, designed so selection winners, toolbox
lifecycle events, and every analysis metric can be checked by hand:

* one-stage picks the right answer everywhere except t09 (majority wrong);
* two-stage diverges from one-stage on t03/t05/t07/t08/t09/t10;
* t02 CREATE defines is_prime (reused by t04 and t10), t06 defines
  is_perfect_square (reused by t08); every other tool stays unused and is
  trimmed at the step-5 / step-10 boundaries when --trim-steps 5;
* the baseline solves everything under oracle selection but picks wrong
  majorities on t04 and t07; seed 2 weakens its early t05 samples.
"""

from __future__ import annotations

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "fixtures" / "mini"

TASKS = [
    ("t01", "algebra", 1, "Compute 2 + 2.", "4"),
    ("t02", "counting", 2, "How many primes are less than 10?", "4"),
    ("t03", "algebra", 3, "Compute 3 * 4.", "12"),
    ("t04", "counting", 4, "How many primes are less than 20?", "8"),
    ("t05", "algebra", 5, "Compute 10 / 4.", "2.5"),
    ("t06", "counting", 1, "How many perfect squares are less than 20?", "4"),
    ("t07", "algebra", 2, "Compute 2 ** 5 - 40.", "-8"),
    ("t08", "counting", 3, "How many perfect squares are less than 50?", "7"),
    ("t09", "algebra", 4, "Compute (3 + 5) * 4.", "32"),
    ("t10", "counting", None, "How many primes are less than 30?", "10"),
]

SCRATCH_HELPER = """\
def scratch_helper(x):
    return x

answer = scratch_helper(2 + 2)"""

IS_PRIME = """\
def is_prime(num):
    if num < 2:
        return False
    for d in range(2, num):
        if num % d == 0:
            return False
    return True

answer = sum(1 for n in range(10) if is_prime(n))"""

IS_PRIME_REDEF = """\
def is_prime(num):
    return num in (2, 3, 5, 7)

answer = len([n for n in range(10) if is_prime(n)])"""

PRODUCT = """\
def product(a, b):
    return a * b

answer = product(3, 4)"""

PRIME_COUNT = """\
def prime_count(limit):
    count = 0
    for n in range(2, limit):
        if is_prime(n):
            count = count + 1
    return count

answer = prime_count(20)"""

DIVIDE = """\
from fractions import Fraction


def divide(a, b):
    return Fraction(a, b)


answer = divide(10, 4)"""

IS_PERFECT_SQUARE = """\
def is_perfect_square(n):
    root = int(n ** 0.5)
    return root * root == n

answer = sum(1 for n in range(1, 20) if is_perfect_square(n))"""

CUBE_VOLUME = """\
def cube_volume(edge):
    return edge ** 3

answer = cube_volume(2) * 4"""

SQUARE_COUNT = """\
def square_count(limit):
    total = 0
    for n in range(1, limit):
        if is_perfect_square(n):
            total = total + 1
    return total

answer = square_count(50)"""

SCALE = """\
def scale(value, factor):
    return value * factor

answer = scale(3 + 5, 4)"""

COUNT_UP_TO = """\
def count_up_to(limit, predicate):
    return sum(1 for n in range(limit) if predicate(n))

answer = count_up_to(30, is_prime)"""

HANG = "while True:\n    pass"

# Shorthand entry constructors.
def ok(src: str, ans: str) -> dict:
    return {"src": src, "status": "SUCCESS", "answer": ans}


def err(src: str, stderr: str = "ZeroDivisionError: division by zero") -> dict:
    return {"src": src, "status": "ERROR", "stderr": stderr}


def hang() -> dict:
    return {"src": HANG, "status": "TIMEOUT", "stderr": "", "duration_ms": 30000}


DIV0 = "answer = 1 / 0"

# Budget-split pipeline: 5 candidates per mode per task, listed SKIP / CREATE / IMPORT.
TROVE: dict[str, dict[str, list[dict]]] = {
    "t01": {
        "SKIP": [
            ok("answer = 2 + 2", "4"),
            ok("answer = 4", "4"),
            ok("answer = 2 * 2", "4"),
            ok("answer = 5", "5"),
            err("answer = 2 +", "SyntaxError: invalid syntax"),
        ],
        "CREATE": [
            ok(SCRATCH_HELPER, "4"),
            ok("answer = 2 + 2", "4"),
            ok("answer = 3", "3"),
            err("answer = unknown_value", "NameError: name 'unknown_value' is not defined"),
            ok("answer = 4", "4"),
        ],
        "IMPORT": [
            ok("answer = 2 + 2", "4"),
            ok("answer = 8 // 2", "4"),
            err(DIV0),
            ok("answer = 6", "6"),
            ok("answer = 4 + 0", "4"),
        ],
    },
    "t02": {
        "SKIP": [
            ok("answer = len([p for p in [2, 3, 5, 7]])", "4"),
            ok("answer = 4", "4"),
            ok("answer = 5", "5"),
            err(DIV0),
            ok("answer = 3", "3"),
        ],
        "CREATE": [
            ok(IS_PRIME, "4"),
            ok("answer = 4", "4"),
            ok(IS_PRIME_REDEF, "4"),
            ok("answer = 9", "9"),
            err("raise ValueError('no idea')", "ValueError: no idea"),
        ],
        "IMPORT": [
            ok("answer = 2 + 2", "4"),
            err(DIV0),
            ok("answer = 10", "10"),
            ok("answer = 4", "4"),
            err("answer = undefined_name", "NameError: name 'undefined_name' is not defined"),
        ],
    },
    "t03": {
        "SKIP": [
            ok("answer = 7", "7"),
            ok("answer = 7", "7"),
            ok("answer = 3 * 4", "12"),
            err(DIV0),
            ok("answer = 12", "12"),
        ],
        "CREATE": [
            ok(PRODUCT, "12"),
            ok("answer = 3 * 4", "12"),
            err("answer = int('wat')", "ValueError: invalid literal for int() with base 10: 'wat'"),
            ok("answer = 13", "13"),
            hang(),
        ],
        "IMPORT": [
            ok("answer = 13", "13"),
            err(DIV0),
            ok("answer = 13", "13"),
            ok("answer = 12", "12"),
            ok("answer = 3 * 4", "12"),
        ],
    },
    "t04": {
        "SKIP": [
            ok("answer = 7", "7"),
            ok("answer = 7", "7"),
            ok("answer = 9", "9"),
            err(DIV0),
            ok("answer = 7", "7"),
        ],
        "CREATE": [
            ok(PRIME_COUNT, "8"),
            ok("answer = len([x for x in [2, 3, 5, 7, 11, 13, 17, 19]])", "8"),
            err(DIV0),
            ok("answer = 7 + 3", "10"),
            err("raise RuntimeError('gave up')", "RuntimeError: gave up"),
        ],
        "IMPORT": [
            ok("answer = sum(1 for n in range(2, 20) if is_prime(n))", "8"),
            ok("answer = len([n for n in range(2, 20) if is_prime(n)])", "8"),
            err(DIV0),
            ok("answer = 9", "9"),
            ok("answer = 7 - 1", "6"),
        ],
    },
    "t05": {
        "SKIP": [
            ok("answer = 2", "2"),
            ok("answer = 3", "3"),
            err(DIV0),
            ok("answer = 2.25", "2.25"),
            ok("answer = 2.6", "2.6"),
        ],
        "CREATE": [
            ok(DIVIDE, "5/2"),
            ok("answer = 5 / 2", "2.5"),
            ok("answer = 2.5", "2.5"),
            err(DIV0),
            ok("answer = 0.4", "0.4"),
        ],
        "IMPORT": [
            ok("answer = 0.4", "0.4"),
            err(DIV0),
            ok("answer = 2.26", "2.26"),
            err("raise ValueError('stuck')", "ValueError: stuck"),
            ok("answer = 2.4", "2.4"),
        ],
    },
    "t06": {
        "SKIP": [
            ok("answer = 4", "4"),
            ok("answer = 5", "5"),
            err(DIV0),
            ok("answer = 2 * 2", "4"),
            ok("answer = 3", "3"),
        ],
        "CREATE": [
            ok(IS_PERFECT_SQUARE, "4"),
            ok("answer = 2 + 2", "4"),
            ok("answer = 16", "16"),
            err(DIV0),
            ok("answer = 4", "4"),
        ],
        "IMPORT": [
            ok("answer = 5", "5"),
            ok("answer = 6", "6"),
            err(DIV0),
            ok("answer = 3", "3"),
            err("answer = missing_tool()", "NameError: name 'missing_tool' is not defined"),
        ],
    },
    "t07": {
        "SKIP": [
            ok("answer = -9", "-9"),
            ok("answer = -8", "-8"),
            ok("answer = 40 - 48", "-8"),
            err(DIV0),
            ok("answer = -9", "-9"),
        ],
        "CREATE": [
            ok(CUBE_VOLUME, "32"),
            ok("answer = -8", "-8"),
            err(DIV0),
            ok("answer = 0", "0"),
            ok("answer = -7", "-7"),
        ],
        "IMPORT": [
            ok("answer = -7", "-7"),
            ok("answer = 24", "24"),
            err(DIV0),
            ok("answer = -10", "-10"),
            err("raise RuntimeError('no tools fit')", "RuntimeError: no tools fit"),
        ],
    },
    "t08": {
        "SKIP": [
            ok("answer = len([n for n in range(1, 50) if int(n ** 0.5) ** 2 == n])", "7"),
            ok("answer = 6", "6"),
            ok("answer = 8", "8"),
            err(DIV0),
            ok("answer = 5", "5"),
        ],
        "CREATE": [
            ok(SQUARE_COUNT, "7"),
            ok("answer = 5", "5"),
            err(DIV0),
            ok("answer = 9", "9"),
            err("answer = nonsense_fn()", "NameError: name 'nonsense_fn' is not defined"),
        ],
        "IMPORT": [
            ok("answer = sum(1 for n in range(1, 50) if is_perfect_square(n))", "7"),
            ok("answer = 8", "8"),
            err(DIV0),
            ok("answer = 6", "6"),
            ok("answer = 49", "49"),
        ],
    },
    "t09": {
        "SKIP": [
            ok("answer = (3 + 5) * 4", "32"),
            ok("answer = 27", "27"),
            err(DIV0),
            ok("answer = 27", "27"),
            ok("answer = 35", "35"),
        ],
        "CREATE": [
            ok(SCALE, "32"),
            ok("answer = 27", "27"),
            ok("answer = 30", "30"),
            err(DIV0),
            err("raise ValueError('unsure')", "ValueError: unsure"),
        ],
        "IMPORT": [
            ok("answer = 8 * 4", "32"),
            ok("answer = 23", "23"),
            err(DIV0),
            ok("answer = 36", "36"),
            err(DIV0),
        ],
    },
    "t10": {
        "SKIP": [
            ok("answer = len([n for n in range(2, 30) if all(n % d != 0 for d in range(2, n))])", "10"),
            ok("answer = 11", "11"),
            ok("answer = 9", "9"),
            err(DIV0),
            ok("answer = 12", "12"),
        ],
        "CREATE": [
            ok(COUNT_UP_TO, "10"),
            ok("answer = 8", "8"),
            err(DIV0),
            ok("answer = 13", "13"),
            err("raise RuntimeError('try again')", "RuntimeError: try again"),
        ],
        "IMPORT": [
            ok("answer = sum(1 for n in range(2, 30) if is_prime(n))", "10"),
            ok("answer = 29", "29"),
            err(DIV0),
            ok("answer = 15", "15"),
            ok("answer = 9", "9"),
        ],
    },
}

# Baseline: 15 samples per task. "E" marks a division error, "H" a hang.
def _simple(values: list) -> list[dict]:
    entries = []
    for value in values:
        if value == "E":
            entries.append(err(DIV0))
        elif value == "H":
            entries.append(hang())
        else:
            entries.append(ok(f"answer = {value}", str(value)))
    return entries


PRIMITIVE: dict[str, list[dict]] = {
    "t01": _simple([4, 5, 4, "E", 4, 4, 6, 4, "E", 4, 5, 4, 4, "E", 4]),
    "t02": _simple([5, 3, "E", 4, 4, 9, 4, "E", 4, 4, 3, "E", 4, 4, 4]),
    "t03": _simple([12, 12, 7, "E", 12, 13, 12, "E", 12, 11, 12, "E", 12, 10, 12]),
    "t04": _simple([7, 7, "E", 9, 7, 8, "E", 7, 9, "E", 7, 9, 7, "E", 8]),
    "t05": _simple([2.5, 2, "E", 2.5, 3, 2.5, "E", 2.25, 2.5, 2, 2.5, "E", 2.5, 3, 2.5]),
    "t06": _simple([4, 4, 5, "E", 4, 4, 3, 4, "E", 4, 6, 4, "E", 4, 4]),
    "t07": _simple(["-9", "E", "-9", 8, "-8", "-9", "E", 8, "-9", "-8", "E", "-9", 8, "-9", "E"]),
    "t08": _simple([7, 8, 7, "E", 6, 7, 7, "E", 8, 7, 6, 7, "E", 7, 7]),
    "t09": _simple([32, 33, "H", 32, 32, 31, "E", 32, 30, 32, "E", 32, 32, 35, 32]),
    "t10": _simple([10, 9, 10, "E", 11, 10, 10, "E", 10, 9, 10, "E", 12, 10, 10]),
}

# Per-seed variants: seed 2 of the baseline finds t05 later (weaker early prefix).
SEED_OVERRIDES: list[tuple[str, str, int, int, dict]] = [
    ("t05", "PRIMITIVE", 0, 2, ok("answer = 3", "3")),
    ("t05", "PRIMITIVE", 3, 2, ok("answer = 2.26", "2.26")),
]

_WRAPPERS = (
    "Here is the solution:\n\n```python\n{src}\n```\n",
    "```python\n{src}\n```",
    "{src}",
    "Let me work through this carefully.\n\n```python\n{src}\n```\n\nThis should print the result.",
)


def _wrap(src: str, counter: int) -> str:
    return _WRAPPERS[counter % len(_WRAPPERS)].format(src=src)


def _duration(task_number: int, mode_rank: int, index: int) -> int:
    return 4 + (task_number * 7 + mode_rank * 3 + index * 5) % 40


def _rows() -> tuple[list[dict], list[dict]]:
    completions: list[dict] = []
    outcomes: list[dict] = []
    counter = 0
    mode_ranks = {"SKIP": 0, "CREATE": 1, "IMPORT": 2, "PRIMITIVE": 3}

    def emit(task_id: str, task_number: int, mode: str, index: int, entry: dict, seed: int | None) -> None:
        nonlocal counter
        completion_row = {
            "task_id": task_id,
            "mode": mode,
            "sample_index": index,
            "completion": _wrap(entry["src"], counter),
        }
        outcome_row = {
            "task_id": task_id,
            "mode": mode,
            "sample_index": index,
            "status": entry["status"],
            "answer": entry.get("answer"),
            "stderr_excerpt": entry.get("stderr", ""),
            "duration_ms": entry.get("duration_ms", _duration(task_number, mode_ranks[mode], index)),
        }
        if seed is not None:
            completion_row["seed"] = seed
            outcome_row["seed"] = seed
        completions.append(completion_row)
        outcomes.append(outcome_row)
        counter += 1

    for task_number, (task_id, *_rest) in enumerate(TASKS, start=1):
        for mode in ("SKIP", "CREATE", "IMPORT"):
            for index, entry in enumerate(TROVE[task_id][mode]):
                emit(task_id, task_number, mode, index, entry, None)
        for index, entry in enumerate(PRIMITIVE[task_id]):
            emit(task_id, task_number, "PRIMITIVE", index, entry, None)
    for task_id, mode, index, seed, entry in SEED_OVERRIDES:
        task_number = next(i for i, t in enumerate(TASKS, start=1) if t[0] == task_id)
        emit(task_id, task_number, mode, index, entry, seed)
    return completions, outcomes


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with (OUT / "mini.jsonl").open("w", encoding="utf-8") as handle:
        for task_id, category, difficulty, query, answer in TASKS:
            record = {
                "id": task_id,
                "category": category,
                "difficulty": difficulty,
                "query": query,
                "answer": answer,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    completions, outcomes = _rows()
    with (OUT / "completions.jsonl").open("w", encoding="utf-8") as handle:
        for row in completions:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    with (OUT / "outcomes.jsonl").open("w", encoding="utf-8") as handle:
        for row in outcomes:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {len(TASKS)} tasks, {len(completions)} completions, {len(outcomes)} outcomes to {OUT}")


if __name__ == "__main__":
    main()
