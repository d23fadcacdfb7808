"""Candidate execution through the runner wire protocol, plus a fixture-backed stand-in.

Runner protocol, bit-exact: one request object on the runner's stdin,
``{"source": str, "timeout_s": int}``, one reply object on its stdout,
``{"status": "success"|"error"|"timeout", "answer": str|null, "stderr": str,
"duration_ms": int}``, exit code 0 for any well-formed reply.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Protocol, Sequence

from .dataset import AnswerValue, normalize_answer
from .errors import FixtureError, RunnerUnavailableError

if TYPE_CHECKING:
    from .pipelines import Candidate

DEFAULT_TIMEOUT_S = 30
GRACE_S = 5.0
STDERR_LIMIT = 2000


class ExecStatus(str, Enum):
    SUCCESS = "SUCCESS"
    ERROR = "ERROR"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class ExecOutcome:
    status: ExecStatus
    answer: AnswerValue | None
    stderr_excerpt: str
    duration_ms: int


class Executor(Protocol):
    def execute_candidate(self, candidate: "Candidate", preamble: str = "") -> ExecOutcome: ...


def classify_reply(reply: Mapping) -> ExecOutcome:
    """Map one runner reply onto an outcome; the same reply always classifies the same way.

    A success reply without an answer is a candidate ERROR (the program never
    produced a result), not an infrastructure problem.
    """
    status = reply.get("status")
    if status not in ("success", "error", "timeout"):
        raise RunnerUnavailableError(f"off-protocol runner reply status: {status!r}")
    try:
        duration_ms = int(reply.get("duration_ms", 0))
    except (TypeError, ValueError) as exc:
        raise RunnerUnavailableError(f"off-protocol duration_ms: {reply.get('duration_ms')!r}") from exc
    stderr = str(reply.get("stderr") or "")[:STDERR_LIMIT]
    if status == "success":
        answer = reply.get("answer")
        if answer is None:
            return ExecOutcome(ExecStatus.ERROR, None, "success reply without an answer", duration_ms)
        return ExecOutcome(ExecStatus.SUCCESS, normalize_answer(str(answer)), stderr, duration_ms)
    if status == "timeout":
        return ExecOutcome(ExecStatus.TIMEOUT, None, stderr, duration_ms)
    return ExecOutcome(ExecStatus.ERROR, None, stderr, duration_ms)


class SubprocessExecutor:
    """Runs each candidate through one runner subprocess invocation.

    The runner enforces ``timeout_s`` itself; the harness adds ``grace_s`` for
    teardown and kills anything still alive past it, so no candidate can stall
    the run beyond timeout_s + grace_s.
    """

    def __init__(self, runner_cmd: Sequence[str], timeout_s: int = DEFAULT_TIMEOUT_S, grace_s: float = GRACE_S):
        if timeout_s < 1:
            raise ValueError("timeout_s must be >= 1")
        if not runner_cmd:
            raise ValueError("runner_cmd must not be empty")
        self.runner_cmd = list(runner_cmd)
        self.timeout_s = timeout_s
        self.grace_s = grace_s

    def run_source(self, source: str) -> ExecOutcome:
        request = json.dumps({"source": source, "timeout_s": self.timeout_s})
        budget_s = self.timeout_s + self.grace_s
        try:
            process = subprocess.Popen(
                self.runner_cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise RunnerUnavailableError(f"cannot start runner {self.runner_cmd[0]!r}: {exc}") from exc
        try:
            stdout, stderr = process.communicate(request, timeout=budget_s)
        except subprocess.TimeoutExpired:
            process.kill()
            process.communicate()
            # Clamp to the contract bound; the kill itself costs a few ms.
            return ExecOutcome(
                ExecStatus.TIMEOUT,
                None,
                "runner did not reply within the grace period and was killed",
                int(budget_s * 1000),
            )
        reply = _parse_reply(stdout, stderr, self.runner_cmd)
        return classify_reply(reply)

    def execute_candidate(self, candidate: "Candidate", preamble: str = "") -> ExecOutcome:
        source = candidate.source if not preamble else f"{preamble}\n\n{candidate.source}"
        return self.run_source(source)


def _parse_reply(stdout: str, stderr: str, runner_cmd: Sequence[str]) -> dict:
    text = stdout.strip()
    if text:
        # The protocol says exactly one object; tolerate runners that log
        # above it by falling back to the last non-empty line.
        for chunk in (text, text.splitlines()[-1]):
            try:
                reply = json.loads(chunk)
            except json.JSONDecodeError:
                continue
            if isinstance(reply, dict):
                return reply
    raise RunnerUnavailableError(
        f"runner {runner_cmd[0]!r} produced no well-formed reply"
        + (f"; stderr: {stderr[:200]}" if stderr else "")
    )


def execute(candidate: "Candidate", timeout_s: int, runner_cmd: Sequence[str]) -> ExecOutcome:
    """One-shot convenience wrapper around SubprocessExecutor."""
    return SubprocessExecutor(runner_cmd, timeout_s=timeout_s).execute_candidate(candidate)


FixtureKey = tuple[str, str, int, "int | None"]


class FixtureExecutor:
    """Replays recorded outcomes keyed by (task_id, mode, sample_index).

    Entries may carry a seed for per-seed variants; seed-less entries match any
    run. The primary test suite uses this so it never needs a live runner.
    """

    def __init__(self, table: Mapping[FixtureKey, ExecOutcome], seed: int | None = None):
        self._table = dict(table)
        self._seed = seed

    @classmethod
    def from_file(cls, path: str | Path, seed: int | None = None) -> "FixtureExecutor":
        return cls(load_outcome_fixtures(path), seed=seed)

    def execute_candidate(self, candidate: "Candidate", preamble: str = "") -> ExecOutcome:
        del preamble  # recorded outcomes already reflect the toolbox context
        for seed in (self._seed, None):
            key = (candidate.task_id, candidate.mode.value, candidate.sample_index, seed)
            if key in self._table:
                return self._table[key]
        raise FixtureError(
            f"no recorded outcome for ({candidate.task_id}, {candidate.mode.value}, "
            f"{candidate.sample_index})"
        )


def execute_from_fixture(candidate: "Candidate", fixture: Mapping[FixtureKey, ExecOutcome]) -> ExecOutcome:
    """Return the recorded outcome for ``candidate`` verbatim."""
    return FixtureExecutor(fixture).execute_candidate(candidate)


def load_outcome_fixtures(path: str | Path) -> dict[FixtureKey, ExecOutcome]:
    path = Path(path)
    table: dict[FixtureKey, ExecOutcome] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                key = (
                    str(obj["task_id"]),
                    str(obj["mode"]),
                    int(obj["sample_index"]),
                    obj.get("seed"),
                )
                status = ExecStatus(obj["status"])
                answer = obj.get("answer")
                outcome = ExecOutcome(
                    status=status,
                    answer=normalize_answer(str(answer)) if answer is not None else None,
                    stderr_excerpt=str(obj.get("stderr_excerpt") or "")[:STDERR_LIMIT],
                    duration_ms=int(obj.get("duration_ms", 0)),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FixtureError(f"{path}:{lineno}: bad outcome fixture: {exc}") from exc
            if outcome.status is ExecStatus.SUCCESS and outcome.answer is None:
                raise FixtureError(f"{path}:{lineno}: SUCCESS outcome requires an answer")
            if outcome.status is not ExecStatus.SUCCESS and outcome.answer is not None:
                raise FixtureError(f"{path}:{lineno}: only SUCCESS outcomes carry an answer")
            table[key] = outcome
    return table
