"""The two experiment pipelines: the budget-split toolbox run and the flat baseline.

Both issue exactly k sampled programs per task. The toolbox pipeline splits the
budget into equal thirds across the SKIP / CREATE / IMPORT modes, grows the
toolbox online, and trims it periodically; the baseline spends all k calls on
the SKIP-style prompt.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import UsageError, ValidationError
from .execution import ExecOutcome, Executor
from .generation import (
    MODE_RANK,
    TROVE_MODES,
    Backend,
    BudgetLedger,
    GenerationRequest,
    Mode,
    SamplingConfig,
    generate,
    ledger_report,
)
from .selection import select_one_stage
from .toolbox import (
    Toolbox,
    extract_tools,
    maybe_trim,
    record_imports,
    record_use,
    render_toolbox,
    rendered_names,
    snapshot,
)

if TYPE_CHECKING:
    from .dataset import Dataset, Task
    from .runio import RunWriter

DEFAULT_TRIM_STEPS = 500
DEFAULT_TOOL_LIMIT = 20


class Pipeline(str, Enum):
    TROVE = "TROVE"
    PRIMITIVE = "PRIMITIVE"


@dataclass
class Candidate:
    """One generated program; (task_id, mode, sample_index) is unique within a run."""

    task_id: str
    mode: Mode
    sample_index: int
    prompt: str
    raw_completion: str
    source: str
    outcome: ExecOutcome | None = None


def generation_key(candidate: Candidate) -> tuple[int, int]:
    """Within-task generation order: all SKIP, then all CREATE, then all IMPORT."""
    return (MODE_RANK[candidate.mode], candidate.sample_index)


@dataclass
class RunRecord:
    """Everything one (pipeline, dataset, seed, k) run produced."""

    pipeline: Pipeline
    dataset_name: str
    k: int
    seed: int
    candidates: list[Candidate]
    ledger: dict
    status: str = "complete"
    tools_log: list[dict] = field(default_factory=list)
    snapshots: list[dict] = field(default_factory=list)

    def by_task(self) -> dict[str, list[Candidate]]:
        grouped: dict[str, list[Candidate]] = {}
        for candidate in self.candidates:
            grouped.setdefault(candidate.task_id, []).append(candidate)
        return grouped


class PromptTemplates:
    """Prompt templates loaded from external text files.

    Templates use the literal placeholders ``{query}`` and ``{toolbox}``;
    substitution is plain string replacement so braces in problem statements
    survive untouched. The baseline reuses the SKIP template.
    """

    _FILES = {Mode.SKIP: "skip.txt", Mode.CREATE: "create.txt", Mode.IMPORT: "import.txt"}

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else Path(__file__).parent / "templates"
        self._texts: dict[Mode, str] = {}
        for mode, filename in self._FILES.items():
            path = self.directory / filename
            if not path.is_file():
                raise UsageError(f"missing prompt template: {path}")
            self._texts[mode] = path.read_text(encoding="utf-8")

    def text(self, mode: Mode) -> str:
        if mode is Mode.PRIMITIVE:
            mode = Mode.SKIP
        return self._texts[mode]

    def hashes(self) -> dict[str, str]:
        import hashlib

        return {
            mode.value: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for mode, text in self._texts.items()
        }


def build_prompt(mode: Mode, task: "Task", toolbox_fragment: str, templates: PromptTemplates) -> str:
    """Instantiate the template for ``mode``; SKIP-style prompts carry no toolbox."""
    if mode in (Mode.SKIP, Mode.PRIMITIVE) and toolbox_fragment:
        raise ValidationError(f"{mode.value} prompts must not embed a toolbox fragment")
    template = templates.text(mode)
    return template.replace("{query}", task.query).replace("{toolbox}", toolbox_fragment)


@dataclass
class _PriorTask:
    """Persisted state of one task from an interrupted run, keyed for replay."""

    candidates: list[Candidate]

    def complete_generation(self, k: int) -> bool:
        return len(self.candidates) == k

    def outcome_for(self, mode: Mode, index: int) -> ExecOutcome | None:
        for candidate in self.candidates:
            if candidate.mode is mode and candidate.sample_index == index:
                return candidate.outcome
        return None


def _execute_all(
    candidates: list[Candidate],
    executor: Executor,
    preamble: str,
    workers: int,
    prior: _PriorTask | None,
) -> None:
    def run_one(candidate: Candidate) -> ExecOutcome:
        if prior is not None:
            recorded = prior.outcome_for(candidate.mode, candidate.sample_index)
            if recorded is not None:
                return recorded
        mode_preamble = preamble if candidate.mode in (Mode.CREATE, Mode.IMPORT) else ""
        return executor.execute_candidate(candidate, preamble=mode_preamble)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, candidates))
    else:
        outcomes = [run_one(c) for c in candidates]
    for candidate, outcome in zip(candidates, outcomes):
        candidate.outcome = outcome


def _generate_mode(
    task: "Task",
    mode: Mode,
    n: int,
    prompt: str,
    config: SamplingConfig,
    backend: Backend,
    ledger: BudgetLedger,
    prior: _PriorTask | None,
) -> list[Candidate]:
    if prior is not None:
        # Replay keeps the logged completions; the budget is still charged so
        # ledger invariants hold for resumed runs.
        ledger.reserve(task.id, mode, n)
        replayed = [c for c in prior.candidates if c.mode is mode]
        replayed.sort(key=lambda c: c.sample_index)
        return [
            Candidate(
                task_id=task.id,
                mode=mode,
                sample_index=c.sample_index,
                prompt=c.prompt,
                raw_completion=c.raw_completion,
                source=c.source,
            )
            for c in replayed
        ]
    request = GenerationRequest(task_id=task.id, mode=mode, prompt=prompt, n=n, config=config)
    generations = generate(request, backend, ledger)
    return [
        Candidate(
            task_id=task.id,
            mode=mode,
            sample_index=index,
            prompt=prompt,
            raw_completion=generation.raw,
            source=generation.source,
        )
        for index, generation in enumerate(generations)
    ]


def run_primitive(
    dataset: "Dataset",
    k: int,
    seed: int,
    config: SamplingConfig,
    backend: Backend,
    executor: Executor,
    templates: PromptTemplates | None = None,
    writer: "RunWriter | None" = None,
    workers: int = 1,
    prior: dict[str, _PriorTask] | None = None,
) -> RunRecord:
    """All k calls per task through the SKIP-style prompt, no toolbox."""
    if k < 1:
        raise UsageError("k must be >= 1")
    templates = templates or PromptTemplates()
    ledger = BudgetLedger({Mode.PRIMITIVE: k})
    prior = prior or {}

    def task_replay(task: "Task") -> _PriorTask | None:
        task_prior = prior.get(task.id)
        if task_prior is not None and task_prior.complete_generation(k):
            return task_prior
        return None

    def process(task: "Task") -> list[Candidate]:
        prompt = build_prompt(Mode.PRIMITIVE, task, "", templates)
        task_prior = task_replay(task)
        candidates = _generate_mode(task, Mode.PRIMITIVE, k, prompt, config, backend, ledger, task_prior)
        _execute_all(candidates, executor, "", 1, task_prior)
        return candidates

    record = RunRecord(
        pipeline=Pipeline.PRIMITIVE,
        dataset_name=dataset.name,
        k=k,
        seed=seed,
        candidates=[],
        ledger={},
        status="running",
    )
    try:
        if workers > 1:
            # Tasks are independent; write in task order as results resolve so
            # the run record stays byte-deterministic.
            pool = ThreadPoolExecutor(max_workers=workers)
            try:
                futures = [pool.submit(process, task) for task in dataset.tasks]
                for future in futures:
                    candidates = future.result()
                    record.candidates.extend(candidates)
                    if writer:
                        writer.append_candidates(candidates)
                        writer.append_outcomes(candidates)
            finally:
                pool.shutdown(wait=True, cancel_futures=True)
        else:
            for task in dataset.tasks:
                prompt = build_prompt(Mode.PRIMITIVE, task, "", templates)
                task_prior = task_replay(task)
                candidates = _generate_mode(
                    task, Mode.PRIMITIVE, k, prompt, config, backend, ledger, task_prior
                )
                if writer:
                    writer.append_candidates(candidates)
                _execute_all(candidates, executor, "", 1, task_prior)
                if writer:
                    writer.append_outcomes(candidates)
                record.candidates.extend(candidates)
    except Exception:
        record.status = "incomplete"
        record.ledger = ledger_report(ledger)
        if writer:
            writer.finalize(record, "incomplete")
        raise
    record.status = "complete"
    record.ledger = ledger_report(ledger)
    if writer:
        writer.finalize(record, "complete")
    return record


def run_trove(
    dataset: "Dataset",
    k: int,
    seed: int,
    config: SamplingConfig,
    backend: Backend,
    executor: Executor,
    templates: PromptTemplates | None = None,
    writer: "RunWriter | None" = None,
    trim_steps: int = DEFAULT_TRIM_STEPS,
    tool_limit: int = DEFAULT_TOOL_LIMIT,
    workers: int = 1,
    prior: dict[str, _PriorTask] | None = None,
) -> RunRecord:
    """Budget split k/3 per mode with an online toolbox, tasks strictly in dataset order.

    Per task: generate all SKIP, CREATE, IMPORT samples against the toolbox as
    frozen at task start, execute them, credit tool uses from the task's pooled
    agreement pick, extract new tools from CREATE candidates, then advance the
    step counter and trim if a boundary was reached.
    """
    if k < 3 or k % 3 != 0:
        raise UsageError("the budget-split pipeline needs k >= 3 and k divisible by 3")
    templates = templates or PromptTemplates()
    per_mode = k // 3
    ledger = BudgetLedger({mode: per_mode for mode in TROVE_MODES})
    toolbox = Toolbox(trim_steps=trim_steps)
    prior = prior or {}

    record = RunRecord(
        pipeline=Pipeline.TROVE,
        dataset_name=dataset.name,
        k=k,
        seed=seed,
        candidates=[],
        ledger={},
        status="running",
    )
    try:
        for position, task in enumerate(dataset.tasks, start=1):
            fragment = render_toolbox(toolbox, tool_limit)
            shown = rendered_names(toolbox, tool_limit)
            preamble = "\n\n".join(toolbox.tools[name].source for name in shown)
            task_prior = prior.get(task.id)
            if task_prior is not None and not task_prior.complete_generation(k):
                task_prior = None

            candidates: list[Candidate] = []
            for mode in TROVE_MODES:
                mode_fragment = fragment if mode in (Mode.CREATE, Mode.IMPORT) else ""
                prompt = build_prompt(mode, task, mode_fragment, templates)
                if mode in (Mode.CREATE, Mode.IMPORT):
                    record_imports(toolbox, shown)
                candidates.extend(
                    _generate_mode(task, mode, per_mode, prompt, config, backend, ledger, task_prior)
                )
            if writer:
                writer.append_candidates(candidates)
            _execute_all(candidates, executor, preamble, workers, task_prior)
            if writer:
                writer.append_outcomes(candidates)
            record.candidates.extend(candidates)

            # Run-time use accounting happens before extraction, so a tool only
            # earns uses from tasks after its origin; the pick needs no labels.
            picked = select_one_stage(candidates).chosen
            if picked is not None:
                record_use(toolbox, picked.source)
            for candidate in candidates:
                if candidate.mode is Mode.CREATE:
                    new_tools = extract_tools(toolbox, candidate.source, task.id, step=position)
                    for tool in new_tools:
                        entry = {
                            "name": tool.name,
                            "origin_task": tool.origin_task,
                            "created_at_step": tool.created_at_step,
                            "source": tool.source,
                        }
                        record.tools_log.append(entry)
                        if writer:
                            writer.append_tool(entry)
            toolbox.advance()
            maybe_trim(toolbox)
            if toolbox.step % toolbox.trim_steps == 0:
                snap = snapshot(toolbox)
                record.snapshots.append(snap)
                if writer:
                    writer.write_snapshot(snap)
    except Exception:
        record.status = "incomplete"
        record.ledger = ledger_report(ledger)
        if writer:
            writer.finalize(record, "incomplete")
        raise

    final = snapshot(toolbox)
    record.snapshots.append(final)
    if writer:
        writer.write_snapshot(final, final=True)
    record.status = "complete"
    record.ledger = ledger_report(ledger)
    if writer:
        writer.finalize(record, "complete")
    return record
