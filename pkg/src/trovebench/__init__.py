"""Compute-matched evaluation harness for toolbox-augmented LLM program synthesis."""

from .dataset import AnswerValue, Dataset, Task, answers_equivalent, load_dataset, normalize_answer, save_dataset
from .execution import ExecOutcome, ExecStatus, FixtureExecutor, SubprocessExecutor, execute_from_fixture
from .generation import BudgetLedger, MockBackend, Mode, SamplingConfig, extract_code, generate, ledger_report
from .pipelines import Candidate, Pipeline, PromptTemplates, RunRecord, build_prompt, run_primitive, run_trove
from .selection import Mechanism, SelectionResult, complexity, select_best, select_one_stage, select_oracle, select_two_stage
from .toolbox import Tool, Toolbox, extract_tools, maybe_trim, record_use, render_toolbox

__version__ = "0.1.0"

__all__ = [
    "AnswerValue",
    "BudgetLedger",
    "Candidate",
    "Dataset",
    "ExecOutcome",
    "ExecStatus",
    "FixtureExecutor",
    "Mechanism",
    "MockBackend",
    "Mode",
    "Pipeline",
    "PromptTemplates",
    "RunRecord",
    "SamplingConfig",
    "SelectionResult",
    "SubprocessExecutor",
    "Task",
    "Tool",
    "Toolbox",
    "answers_equivalent",
    "build_prompt",
    "complexity",
    "execute_from_fixture",
    "extract_code",
    "extract_tools",
    "generate",
    "ledger_report",
    "load_dataset",
    "maybe_trim",
    "normalize_answer",
    "record_use",
    "render_toolbox",
    "run_primitive",
    "run_trove",
    "save_dataset",
    "select_best",
    "select_one_stage",
    "select_oracle",
    "select_two_stage",
    "__version__",
]
