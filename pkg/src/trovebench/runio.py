"""Run-directory persistence: manifest, candidate/outcome logs, tools, snapshots, selections.

A run directory holds line-delimited candidate records plus a manifest that
pins everything needed to reproduce the run (dataset hash, sampling config,
template hashes). No file carries timestamps, so two identical runs produce
byte-identical directories.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator

from .errors import LockError, ValidationError
from .execution import ExecOutcome, ExecStatus, STDERR_LIMIT
from .dataset import normalize_answer
from .generation import Mode
from .pipelines import Candidate, Pipeline, RunRecord, _PriorTask
from .selection import Mechanism, SelectionResult

MANIFEST = "manifest.json"
CANDIDATES = "candidates.jsonl"
OUTCOMES = "outcomes.jsonl"
TOOLS = "tools.jsonl"
LEDGER = "ledger.json"
SNAPSHOT_DIR = "snapshots"
LOCKFILE = "run.lock"


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def candidate_row(candidate: Candidate) -> dict:
    return {
        "task_id": candidate.task_id,
        "mode": candidate.mode.value,
        "sample_index": candidate.sample_index,
        "prompt": candidate.prompt,
        "raw_completion": candidate.raw_completion,
        "source": candidate.source,
    }


def outcome_row(candidate: Candidate) -> dict:
    outcome = candidate.outcome
    if outcome is None:
        raise ValidationError(f"candidate {candidate.task_id} has no outcome to persist")
    return {
        "task_id": candidate.task_id,
        "mode": candidate.mode.value,
        "sample_index": candidate.sample_index,
        "status": outcome.status.value,
        "answer": outcome.answer.canonical if outcome.answer is not None else None,
        "stderr_excerpt": outcome.stderr_excerpt,
        "duration_ms": outcome.duration_ms,
    }


class RunWriter:
    """Streaming writer for one run directory.

    In rebuild mode (used by resume) the logs are staged under ``*.new`` names
    and swapped in atomically at finalize, so an interrupted resume never
    corrupts the previous state.
    """

    def __init__(self, run_dir: str | Path, rebuild: bool = False):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / SNAPSHOT_DIR).mkdir(exist_ok=True)
        self._suffix = ".new" if rebuild else ""
        self._rebuild = rebuild
        for name in (CANDIDATES, OUTCOMES, TOOLS):
            staged = self.run_dir / (name + self._suffix)
            if staged.exists():
                staged.unlink()

    def _append(self, name: str, rows: Iterable[dict]) -> None:
        path = self.run_dir / (name + self._suffix)
        with path.open("a", encoding="utf-8") as handle:
            for row in rows:
                handle.write(_dump(row) + "\n")

    def write_manifest(self, manifest: dict) -> None:
        path = self.run_dir / MANIFEST
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def append_candidates(self, candidates: Iterable[Candidate]) -> None:
        self._append(CANDIDATES, (candidate_row(c) for c in candidates))

    def append_outcomes(self, candidates: Iterable[Candidate]) -> None:
        self._append(OUTCOMES, (outcome_row(c) for c in candidates))

    def append_tool(self, entry: dict) -> None:
        self._append(TOOLS, [entry])

    def write_snapshot(self, snap: dict, final: bool = False) -> None:
        name = "toolbox_final.json" if final else f"toolbox_step_{snap['step']:06d}.json"
        path = self.run_dir / SNAPSHOT_DIR / name
        path.write_text(json.dumps(snap, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def finalize(self, record: RunRecord, status: str) -> None:
        (self.run_dir / LEDGER).write_text(
            json.dumps(record.ledger, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        if self._rebuild:
            for name in (CANDIDATES, OUTCOMES, TOOLS):
                staged = self.run_dir / (name + self._suffix)
                if staged.exists():
                    os.replace(staged, self.run_dir / name)
        manifest_path = self.run_dir / MANIFEST
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        else:
            manifest = {}
        manifest["status"] = status
        self.write_manifest(manifest)


def build_manifest(
    pipeline: Pipeline,
    dataset_path: str | Path,
    dataset_name: str,
    n_tasks: int,
    k: int,
    seed: int,
    sampling: dict,
    trim_steps: int,
    tool_limit: int,
    exec_timeout_s: int,
    template_hashes: dict,
    backend_info: dict,
) -> dict:
    return {
        "format": 1,
        "pipeline": pipeline.value,
        "dataset_path": str(dataset_path),
        "dataset_name": dataset_name,
        "dataset_sha256": file_sha256(dataset_path),
        "n_tasks": n_tasks,
        "k": k,
        "seed": seed,
        "sampling": sampling,
        "trim_steps": trim_steps,
        "tool_limit": tool_limit,
        "exec_timeout_s": exec_timeout_s,
        "templates": template_hashes,
        "backend": backend_info,
        "status": "running",
    }


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise ValidationError(f"{run_dir} is not a run directory (no {MANIFEST})")
    return json.loads(path.read_text(encoding="utf-8"))


def _read_jsonl(path: Path) -> Iterator[dict]:
    if not path.is_file():
        return
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                yield json.loads(line)


def load_run(run_dir: str | Path, strict: bool = True) -> RunRecord:
    """Rehydrate a RunRecord from disk, joining candidates with their outcomes.

    ``strict`` demands a complete record: every task with exactly k candidates,
    every candidate with an outcome.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    pipeline = Pipeline(manifest["pipeline"])
    k = int(manifest["k"])

    candidates: list[Candidate] = []
    index: dict[tuple[str, str, int], Candidate] = {}
    for row in _read_jsonl(run_dir / CANDIDATES):
        candidate = Candidate(
            task_id=str(row["task_id"]),
            mode=Mode(row["mode"]),
            sample_index=int(row["sample_index"]),
            prompt=str(row["prompt"]),
            raw_completion=str(row["raw_completion"]),
            source=str(row["source"]),
        )
        key = (candidate.task_id, candidate.mode.value, candidate.sample_index)
        if key in index:
            raise ValidationError(f"{run_dir}: duplicate candidate {key}")
        index[key] = candidate
        candidates.append(candidate)

    for row in _read_jsonl(run_dir / OUTCOMES):
        key = (str(row["task_id"]), str(row["mode"]), int(row["sample_index"]))
        candidate = index.get(key)
        if candidate is None:
            raise ValidationError(f"{run_dir}: outcome without candidate {key}")
        answer = row.get("answer")
        candidate.outcome = ExecOutcome(
            status=ExecStatus(row["status"]),
            answer=normalize_answer(str(answer)) if answer is not None else None,
            stderr_excerpt=str(row.get("stderr_excerpt") or "")[:STDERR_LIMIT],
            duration_ms=int(row.get("duration_ms", 0)),
        )

    ledger_path = run_dir / LEDGER
    ledger = json.loads(ledger_path.read_text(encoding="utf-8")) if ledger_path.is_file() else {}
    tools_log = list(_read_jsonl(run_dir / TOOLS))
    snapshots = []
    snapshot_dir = run_dir / SNAPSHOT_DIR
    if snapshot_dir.is_dir():
        for path in sorted(snapshot_dir.glob("toolbox_*.json")):
            snapshots.append(json.loads(path.read_text(encoding="utf-8")))

    record = RunRecord(
        pipeline=pipeline,
        dataset_name=str(manifest.get("dataset_name", "")),
        k=k,
        seed=int(manifest["seed"]),
        candidates=candidates,
        ledger=ledger,
        status=str(manifest.get("status", "unknown")),
        tools_log=tools_log,
        snapshots=snapshots,
    )
    if strict:
        problems = incompleteness(record, n_tasks=manifest.get("n_tasks"))
        if problems:
            raise ValidationError(f"{run_dir} is incomplete: " + "; ".join(problems))
    return record


def incompleteness(record: RunRecord, n_tasks: int | None = None) -> list[str]:
    """Human-readable list of what is missing from a run record, empty when complete."""
    problems: list[str] = []
    if record.status != "complete":
        problems.append(f"status is {record.status!r}")
    by_task = record.by_task()
    if n_tasks is not None and len(by_task) != int(n_tasks):
        problems.append(f"{len(by_task)} of {n_tasks} tasks present")
    for task_id, group in by_task.items():
        if len(group) != record.k:
            problems.append(f"task {task_id} has {len(group)}/{record.k} candidates")
        missing = [c for c in group if c.outcome is None]
        if missing:
            problems.append(f"task {task_id} missing {len(missing)} outcomes")
    return problems


def load_prior_tasks(run_dir: str | Path) -> dict[str, _PriorTask]:
    """Per-task replay state from a possibly incomplete run directory."""
    try:
        record = load_run(run_dir, strict=False)
    except ValidationError:
        return {}
    return {task_id: _PriorTask(candidates=group) for task_id, group in record.by_task().items()}


def selections_path(run_dir: str | Path, mechanism: Mechanism) -> Path:
    return Path(run_dir) / f"selections_{mechanism.value.lower().replace('_', '-')}.jsonl"


def write_selections(run_dir: str | Path, mechanism: Mechanism, results: dict[str, SelectionResult]) -> Path:
    path = selections_path(run_dir, mechanism)
    with path.open("w", encoding="utf-8") as handle:
        for task_id in results:
            result = results[task_id]
            row = {
                "task_id": task_id,
                "mechanism": result.mechanism.value,
                "chosen": (
                    {"mode": result.chosen.mode.value, "sample_index": result.chosen.sample_index}
                    if result.chosen is not None
                    else None
                ),
                "answer": result.answer.canonical if result.answer is not None else None,
                "vote_detail": dict(sorted(result.vote_detail.items())),
            }
            handle.write(_dump(row) + "\n")
    return path


def load_selection_rows(run_dir: str | Path, mechanism: Mechanism) -> list[dict]:
    path = selections_path(run_dir, mechanism)
    if not path.is_file():
        raise ValidationError(f"no {mechanism.value} selections in {run_dir}")
    return list(_read_jsonl(path))


@contextmanager
def run_lock(run_dir: str | Path) -> Iterator[None]:
    """Exclusive ownership of a run directory for the duration of a command."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    lock_path = run_dir / LOCKFILE
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{run_dir} is locked by another process (remove {LOCKFILE} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock_path.unlink(missing_ok=True)
