from __future__ import annotations

import sys
from pathlib import Path

import pytest

from trovebench.dataset import AnswerValue, Dataset, load_dataset, normalize_answer
from trovebench.execution import ExecOutcome, ExecStatus, FixtureExecutor
from trovebench.generation import MockBackend, Mode, SamplingConfig
from trovebench.pipelines import Candidate, PromptTemplates, run_primitive, run_trove
from trovebench.runio import RunWriter, build_manifest
from trovebench.pipelines import Pipeline

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures" / "mini"
GOLDEN = REPO / "fixtures" / "golden"
FAKE_RUNNER = [sys.executable, str(Path(__file__).parent / "fake_runner.py")]

MINI_TRIM_STEPS = 5


def make_candidate(
    answer: str | None = None,
    status: ExecStatus = ExecStatus.SUCCESS,
    source: str = "answer = 0",
    mode: Mode = Mode.PRIMITIVE,
    index: int = 0,
    task_id: str = "t",
    executed: bool = True,
) -> Candidate:
    candidate = Candidate(
        task_id=task_id,
        mode=mode,
        sample_index=index,
        prompt="",
        raw_completion=source,
        source=source,
    )
    if executed:
        if status is ExecStatus.SUCCESS:
            outcome = ExecOutcome(status, normalize_answer(answer if answer is not None else "0"), "", 1)
        else:
            outcome = ExecOutcome(status, None, "boom", 1)
        candidate.outcome = outcome
    return candidate


def make_candidates(answers: list, mode: Mode = Mode.PRIMITIVE, task_id: str = "t") -> list[Candidate]:
    """Build executed candidates from answer specs; None means an ERROR outcome."""
    out = []
    for index, answer in enumerate(answers):
        if answer is None:
            out.append(make_candidate(status=ExecStatus.ERROR, mode=mode, index=index, task_id=task_id))
        elif isinstance(answer, tuple):
            value, source = answer
            out.append(make_candidate(answer=str(value), source=source, mode=mode, index=index, task_id=task_id))
        else:
            out.append(make_candidate(answer=str(answer), mode=mode, index=index, task_id=task_id))
    return out


@pytest.fixture(scope="session")
def mini_dataset() -> Dataset:
    return load_dataset(FIXTURES / "mini.jsonl")


def run_mini(
    pipeline: Pipeline,
    seed: int,
    run_dir: Path | None = None,
    k: int = 15,
    trim_steps: int = MINI_TRIM_STEPS,
):
    """Run one mini-benchmark pipeline against the scripted backend and outcomes."""
    dataset = load_dataset(FIXTURES / "mini.jsonl")
    backend = MockBackend.from_file(FIXTURES / "completions.jsonl", seed=seed)
    executor = FixtureExecutor.from_file(FIXTURES / "outcomes.jsonl", seed=seed)
    config = SamplingConfig(seed=seed)
    templates = PromptTemplates()
    writer = None
    if run_dir is not None:
        writer = RunWriter(run_dir)
        writer.write_manifest(
            build_manifest(
                pipeline=pipeline,
                dataset_path=FIXTURES / "mini.jsonl",
                dataset_name=dataset.name,
                n_tasks=len(dataset),
                k=k,
                seed=seed,
                sampling=config.as_dict(),
                trim_steps=trim_steps,
                tool_limit=20,
                exec_timeout_s=30,
                template_hashes=templates.hashes(),
                backend_info={"kind": "mock"},
            )
        )
    if pipeline is Pipeline.TROVE:
        return run_trove(
            dataset,
            k,
            seed,
            config,
            backend,
            executor,
            templates=templates,
            writer=writer,
            trim_steps=trim_steps,
        )
    return run_primitive(
        dataset, k, seed, config, backend, executor, templates=templates, writer=writer
    )


@pytest.fixture(scope="session")
def mini_trove_seed1():
    return run_mini(Pipeline.TROVE, seed=1)


@pytest.fixture(scope="session")
def mini_trove_seed2():
    return run_mini(Pipeline.TROVE, seed=2)


@pytest.fixture(scope="session")
def mini_primitive_seed1():
    return run_mini(Pipeline.PRIMITIVE, seed=1)


@pytest.fixture(scope="session")
def mini_primitive_seed2():
    return run_mini(Pipeline.PRIMITIVE, seed=2)


def answer(value: str) -> AnswerValue:
    return normalize_answer(value)
