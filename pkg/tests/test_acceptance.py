"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Full-scale reference numbers are documented in the README and are
explicitly not gated here; everything below runs at desk scale on the bundled
mini benchmark and synthetic fixtures.
"""

import functools
import json
import random
import subprocess
import time
from pathlib import Path

import pytest

from trovebench.analysis import (
    accuracy,
    coverage_gains,
    distinct_solutions,
    gain_sets,
    jaccard_cross_type,
    mean_jaccard,
    pass_at_k,
    seed_combined_pass,
    select_run,
    tool_reuse_stats,
    unique_solve_fraction,
)
from trovebench.cli import main
from trovebench.errors import BudgetError
from trovebench.generation import BudgetLedger, Mode
from trovebench.pipelines import Pipeline
from trovebench.selection import Mechanism, select_one_stage, select_two_stage

from conftest import FIXTURES, GOLDEN, MINI_TRIM_STEPS, REPO, make_candidates
from test_selection import _random_candidates, brute_force_best, divergence_fixture


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE {name}: FAIL")
                raise
            print(f"\nACCEPTANCE {name}: PASS")
            return result

        return wrapper

    return decorate


@criterion("selection oracle equivalence (1,000 randomized sets)")
def test_selection_oracle_equivalence():
    rng = random.Random(1729)
    started = time.monotonic()
    for _ in range(1000):
        candidates = _random_candidates(rng)
        assert select_one_stage(candidates).chosen is brute_force_best(candidates)
    assert time.monotonic() - started < 10.0


@criterion("algorithm divergence witness")
def test_algorithm_divergence_witness():
    skip, create, import_ = divergence_fixture()
    pooled = skip + create + import_

    # Independent expectation, brute-forced over both algorithms.
    expected_one = brute_force_best(pooled)
    stage_winners = [
        w for w in (brute_force_best(skip), brute_force_best(create), brute_force_best(import_))
        if w is not None
    ]
    expected_two = brute_force_best(stage_winners)

    one = select_one_stage(pooled)
    two = select_two_stage({Mode.SKIP: skip, Mode.CREATE: create, Mode.IMPORT: import_})
    assert one.chosen is expected_one
    assert two.chosen is expected_two
    assert one.answer.canonical == "7"
    assert two.answer.canonical == "9"
    assert one.answer.canonical != two.answer.canonical


@criterion("dominance and monotonicity suite")
def test_dominance_and_monotonicity(
    mini_trove_seed1, mini_trove_seed2, mini_primitive_seed1, mini_primitive_seed2, mini_dataset
):
    fixture_runs = {
        Pipeline.TROVE: {1: mini_trove_seed1, 2: mini_trove_seed2},
        Pipeline.PRIMITIVE: {1: mini_primitive_seed1, 2: mini_primitive_seed2},
    }
    for pipeline, runs in fixture_runs.items():
        step = 3 if pipeline is Pipeline.TROVE else 1
        ks = list(range(step, 16, step))
        # Oracle accuracy dominates agreement accuracy on every run.
        for seed, record in runs.items():
            solo = {seed: record}
            oracle_value = pass_at_k(solo, mini_dataset, 15).aggregate.mean
            one_stage_value = accuracy(
                {seed: select_run(record, Mechanism.ONE_STAGE)}, mini_dataset
            ).aggregate.mean
            assert oracle_value >= one_stage_value
            # pass@k is non-decreasing in k.
            curve = [pass_at_k(solo, mini_dataset, k).aggregate.mean for k in ks]
            assert curve == sorted(curve)
        # The seed-combined curve is monotone and dominates every single-seed
        # curve at shared k.
        combined = dict(seed_combined_pass(runs, mini_dataset))
        keys = sorted(combined)
        assert all(combined[a] <= combined[b] + 1e-12 for a, b in zip(keys, keys[1:]))
        for seed, record in runs.items():
            solo_curve = dict(seed_combined_pass({seed: record}, mini_dataset))
            for k in ks:
                assert combined[k] >= solo_curve[k] - 1e-12, (pipeline, seed, k)


def _cli_run(out: Path, pipeline: str, seeds=(1,)) -> int:
    return main(
        [
            "run",
            "--dataset", str(FIXTURES / "mini.jsonl"),
            "--pipeline", pipeline,
            "--k", "15",
            "--seeds", *[str(s) for s in seeds],
            "--backend", "mock",
            "--fixtures", str(FIXTURES / "completions.jsonl"),
            "--exec-fixtures", str(FIXTURES / "outcomes.jsonl"),
            "--trim-steps", str(MINI_TRIM_STEPS),
            "--out", str(out),
        ]
    )


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


@criterion("budget exactness and run determinism")
def test_budget_exactness(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    for out in (first, second):
        assert _cli_run(out, "trove") == 0
        assert _cli_run(out, "primitive") == 0

    for pipeline, per_mode in (("trove", {"SKIP": 5, "CREATE": 5, "IMPORT": 5}), ("primitive", {"PRIMITIVE": 15})):
        ledger = json.loads((first / f"{pipeline}_k15_seed1" / "ledger.json").read_text())
        assert ledger["total_calls"] == 150
        assert len(ledger["per_task"]) == 10
        for task_id, counts in ledger["per_task"].items():
            assert counts["total"] == 15, task_id
            for mode, expected in per_mode.items():
                assert counts[mode] == expected, (task_id, mode)

    # A 16th call on a task is refused before backend contact.
    ledger = BudgetLedger({Mode.PRIMITIVE: 15})
    ledger.reserve("t01", Mode.PRIMITIVE, 15)
    with pytest.raises(BudgetError):
        ledger.reserve("t01", Mode.PRIMITIVE, 1)
    trove_ledger = BudgetLedger({Mode.SKIP: 5, Mode.CREATE: 5, Mode.IMPORT: 5})
    for mode in (Mode.SKIP, Mode.CREATE, Mode.IMPORT):
        trove_ledger.reserve("t01", mode, 5)
    with pytest.raises(BudgetError):
        trove_ledger.reserve("t01", Mode.SKIP, 1)

    # Byte-identical run records across the two invocations.
    for name in ("trove_k15_seed1", "primitive_k15_seed1"):
        assert _tree_bytes(first / name) == _tree_bytes(second / name), name


@criterion("metric hand oracles")
def test_metric_hand_oracles(
    mini_trove_seed1, mini_trove_seed2, mini_primitive_seed1, mini_primitive_seed2, mini_dataset
):
    # Jaccard, on hand-enumerable sets.
    assert mean_jaccard([{1, 2, 3}], [{2, 3, 4}]) == 0.5
    assert mean_jaccard([{1, 2}], [{1, 2}]) == 1.0
    assert mean_jaccard([set()], [set()]) == 1.0
    assert mean_jaccard([{1, 2}, {1, 3}], [{2}, set()]) == 0.125

    # Coverage gains on the constructed 2-seed example.
    consistent, potential = gain_sets([{1, 2}, {1, 3}], [{2}, set()])
    assert (consistent, potential) == ({1}, {3})

    # Distinct solutions on the stated candidate multiset.
    from trovebench.analysis import _distinct_count

    assert _distinct_count(make_candidates([5, 5, 3, None, 7])) == 3
    assert _distinct_count(make_candidates([None, None])) == 0

    # Mini-run values previously enumerated by hand, exact.
    trove = {1: mini_trove_seed1, 2: mini_trove_seed2}
    primitive = {1: mini_primitive_seed1, 2: mini_primitive_seed2}
    unique = unique_solve_fraction(trove, mini_dataset)
    assert unique.aggregate["CREATE"].mean == 0.1
    assert unique.aggregate["SKIP"].mean == 0.0
    assert unique.aggregate["IMPORT"].mean == 0.0
    jaccard = jaccard_cross_type(primitive, trove, mini_dataset, mode_b=Mode.IMPORT)
    assert jaccard.aggregate == 0.7
    distinct = distinct_solutions(trove, mini_dataset)
    assert distinct.aggregate.mean == 5.7
    gains = coverage_gains(trove, primitive, mini_dataset)
    assert gains.aggregate["TROVE"].consistent_count == 0
    assert gains.aggregate["TROVE"].potential_count == 0


@criterion("toolbox lifecycle")
def test_toolbox_lifecycle(mini_trove_seed1, mini_dataset):
    record = mini_trove_seed1
    order = {task.id: i for i, task in enumerate(mini_dataset.tasks)}

    # Causality: a tool created at task i shows up only in later tasks' prompts.
    for entry in record.tools_log:
        marker = f"# tool: {entry['name']} "
        for candidate in record.candidates:
            if marker in candidate.prompt:
                assert order[candidate.task_id] > order[entry["origin_task"]]

    # Trim boundaries drop unused tools created before the boundary.
    snaps = {snap["step"]: snap for snap in record.snapshots}
    assert [t["name"] for t in snaps[5]["tools"]] == ["is_prime", "divide"]
    assert [t["name"] for t in snaps[10]["tools"]] == [
        "is_prime", "is_perfect_square", "count_up_to",
    ]
    created = {e["name"]: e["created_at_step"] for e in record.tools_log}
    for boundary in (5, 10):
        snapshot_names = {t["name"] for t in snaps[boundary]["tools"]}
        for name, step in created.items():
            uses = {t["name"]: t["use_count"] for t in snaps[boundary]["tools"]}
            if step < boundary and name in snapshot_names:
                assert uses[name] > 0, name  # stale survivors must be used

    # Reuse counts match the hand count: is_prime twice, is_perfect_square once.
    selections = select_run(record, Mechanism.ONE_STAGE)
    reuse = {
        t["name"]: t["reuse_count"]
        for t in tool_reuse_stats(record, selections, mini_dataset).tools
    }
    assert reuse["is_prime"] == 2
    assert reuse["is_perfect_square"] == 1
    assert all(count == 0 for name, count in reuse.items() if name not in ("is_prime", "is_perfect_square"))


@criterion("report shape and golden files")
def test_report_shape_golden(tmp_path):
    out = tmp_path / "runs"
    assert _cli_run(out, "trove", seeds=(1, 2)) == 0
    assert _cli_run(out, "primitive", seeds=(1, 2)) == 0
    reports = tmp_path / "reports"
    runs = sorted(str(p) for p in out.iterdir() if p.is_dir())
    assert main(["analyze", "--runs", *runs, "--out", str(reports)]) == 0

    # Row/column structure of the published tables.
    accuracy_lines = (reports / "accuracy.csv").read_text().splitlines()
    assert accuracy_lines[0].split(",") == [
        "category",
        "primitive_one_stage_mean", "primitive_one_stage_std",
        "trove_two_stage_mean", "trove_two_stage_std",
        "trove_one_stage_mean", "trove_one_stage_std",
    ]
    assert [line.split(",")[0] for line in accuracy_lines[1:]] == ["algebra", "counting", "mini"]
    unique_lines = (reports / "unique_solve.csv").read_text().splitlines()
    assert unique_lines[0].split(",")[1:] == [
        "import_mean", "import_std", "create_mean", "create_std", "skip_mean", "skip_std",
    ]
    distinct_lines = (reports / "distinct_solutions.csv").read_text().splitlines()
    assert distinct_lines[0].split(",") == [
        "category", "primitive_mean", "primitive_std", "trove_mean", "trove_std", "delta",
    ]
    curve_lines = (reports / "budget_curve.csv").read_text().splitlines()
    assert curve_lines[0].split(",") == ["pipeline", "mechanism", "k", "accuracy_mean", "accuracy_std"]
    assert any(line.startswith("TROVE,ORACLE,15,") for line in curve_lines)

    # Byte-exact against the committed goldens.
    golden_files = sorted(p.name for p in GOLDEN.iterdir())
    produced_files = sorted(p.name for p in reports.iterdir())
    assert produced_files == golden_files
    for name in golden_files:
        assert (reports / name).read_bytes() == (GOLDEN / name).read_bytes(), name


RUNNER_DIST = REPO / "runner" / "dist" / "main.js"


@pytest.mark.skipif(not RUNNER_DIST.is_file(), reason="runner not built (cd runner && npm install && npm run build)")
@criterion("runner protocol conformance (integration)")
def test_runner_protocol_integration():
    def call(payload: str, timeout: float):
        started = time.monotonic()
        proc = subprocess.run(
            ["node", str(RUNNER_DIST)],
            input=payload,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
        elapsed = time.monotonic() - started
        assert proc.returncode == 0
        return json.loads(proc.stdout.strip().splitlines()[-1]), elapsed

    reply, _ = call(json.dumps({"source": "answer = 2+3", "timeout_s": 5}), timeout=30)
    assert reply["status"] == "success" and reply["answer"] == "5"

    reply, elapsed = call(json.dumps({"source": "while True: pass", "timeout_s": 1}), timeout=30)
    assert reply["status"] == "timeout"
    assert elapsed < 2.0

    reply, _ = call("this is not a request", timeout=30)
    assert reply["status"] == "error"
