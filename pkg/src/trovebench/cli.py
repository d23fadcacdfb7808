"""Command-line entry point: reproducible run / select / analyze phases.

The three phases operate on persisted state so selection and analysis never
re-pay generation cost. Exit codes: 0 success, 1 usage, 2 validation,
3 infrastructure.
"""

from __future__ import annotations

import argparse
import os
import shlex
import shutil
import sys
from pathlib import Path

from . import analysis, reporting, runio
from .dataset import Dataset, load_dataset
from .errors import EXIT_OK, HarnessError, UsageError, ValidationError
from .execution import DEFAULT_TIMEOUT_S, FixtureExecutor, SubprocessExecutor
from .generation import HttpBackend, MockBackend, Mode, SamplingConfig
from .pipelines import (
    DEFAULT_TOOL_LIMIT,
    DEFAULT_TRIM_STEPS,
    Pipeline,
    PromptTemplates,
    RunRecord,
    run_primitive,
    run_trove,
)
from .selection import Mechanism

API_KEY_ENV = "TROVEBENCH_API_KEY"

_MECHANISMS = {
    "one-stage": Mechanism.ONE_STAGE,
    "two-stage": Mechanism.TWO_STAGE,
    "oracle": Mechanism.ORACLE,
}

ALL_METRICS = (
    "accuracy",
    "pass",
    "distinct",
    "unique",
    "curve",
    "combined",
    "jaccard",
    "coverage",
    "difficulty",
    "reuse",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trovebench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate and execute candidates for one or more seeds")
    run.add_argument("--dataset", required=True, help="line-delimited task file")
    run.add_argument("--pipeline", required=True, choices=["trove", "primitive"])
    run.add_argument("--k", type=int, required=True, help="LLM calls per task")
    run.add_argument("--seeds", type=int, nargs="+", required=True)
    run.add_argument("--backend", required=True, choices=["http", "mock"])
    run.add_argument("--endpoint", help="chat-completions URL for the http backend")
    run.add_argument("--model", help="model name for the http backend")
    run.add_argument("--request-timeout", type=float, default=120.0, help="http request timeout in seconds")
    run.add_argument("--fixtures", help="scripted completions for the mock backend")
    run.add_argument("--default-completion", help="mock fallback for unscripted keys")
    run.add_argument("--exec-fixtures", help="recorded outcomes; executes without a live runner")
    run.add_argument("--runner-cmd", help="runner command line, e.g. 'node runner/dist/main.js'")
    run.add_argument("--templates", help="prompt template directory")
    run.add_argument("--trim-steps", type=int, default=DEFAULT_TRIM_STEPS)
    run.add_argument("--tool-limit", type=int, default=DEFAULT_TOOL_LIMIT)
    run.add_argument("--exec-timeout", type=int, default=DEFAULT_TIMEOUT_S)
    run.add_argument("--temperature", type=float, default=0.6)
    run.add_argument("--top-p", type=float, default=0.95)
    run.add_argument("--max-new-tokens", type=int, default=512)
    run.add_argument("--out", required=True, help="parent directory for run directories")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--force", action="store_true", help="wipe and redo existing run directories")

    select = sub.add_parser("select", help="apply a selection mechanism to a finished run")
    select.add_argument("--run-dir", required=True)
    select.add_argument("--selection", required=True, choices=sorted(_MECHANISMS))
    select.add_argument("--dataset", help="needed for oracle selection when the manifest path moved")

    analyze = sub.add_parser("analyze", help="compute metric reports over run directories")
    analyze.add_argument("--runs", nargs="+", required=True, help="run directories")
    analyze.add_argument("--dataset", help="override the dataset path recorded in manifests")
    analyze.add_argument("--out", required=True, help="report output directory")
    analyze.add_argument("--metrics", default="all", help="comma list of metrics, or 'all'")
    analyze.add_argument("--per-mode-k", type=int, help="per-mode budget for unique-solve analysis")
    analyze.add_argument("--k-total", type=int, help="seed-combined budget cap")
    return parser


def _run_dir_name(pipeline: str, k: int, seed: int) -> str:
    return f"{pipeline}_k{k}_seed{seed}"


def _build_backend(args, seed: int):
    if args.backend == "mock":
        if not args.fixtures:
            raise UsageError("--backend mock needs --fixtures")
        return MockBackend.from_file(args.fixtures, default=args.default_completion, seed=seed), {
            "kind": "mock",
            "fixtures_sha256": runio.file_sha256(args.fixtures),
        }
    if not args.endpoint or not args.model:
        raise UsageError("--backend http needs --endpoint and --model")
    api_key = os.environ.get(API_KEY_ENV)
    backend = HttpBackend(args.endpoint, args.model, api_key=api_key, timeout_s=args.request_timeout)
    return backend, {"kind": "http", "endpoint": args.endpoint, "model": args.model}


def _build_executor(args, seed: int):
    if args.exec_fixtures:
        return FixtureExecutor.from_file(args.exec_fixtures, seed=seed)
    if args.runner_cmd:
        return SubprocessExecutor(shlex.split(args.runner_cmd), timeout_s=args.exec_timeout)
    raise UsageError("need --exec-fixtures or --runner-cmd to execute candidates")


def cmd_run(args) -> int:
    dataset = load_dataset(args.dataset)
    pipeline = Pipeline.TROVE if args.pipeline == "trove" else Pipeline.PRIMITIVE
    if pipeline is Pipeline.TROVE and (args.k < 3 or args.k % 3 != 0):
        raise UsageError("--pipeline trove needs --k divisible by 3")
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    templates = PromptTemplates(args.templates)
    out_root = Path(args.out)

    for seed in args.seeds:
        run_dir = out_root / _run_dir_name(args.pipeline, args.k, seed)
        prior = {}
        if run_dir.exists():
            if args.force:
                shutil.rmtree(run_dir)
            else:
                manifest = {}
                try:
                    manifest = runio.read_manifest(run_dir)
                except ValidationError:
                    pass
                if manifest.get("status") == "complete":
                    raise ValidationError(
                        f"{run_dir} already holds a complete run; pass --force to redo it"
                    )
                prior = runio.load_prior_tasks(run_dir)
        config = SamplingConfig(
            temperature=args.temperature,
            top_p=args.top_p,
            max_new_tokens=args.max_new_tokens,
            seed=seed,
        )
        backend, backend_info = _build_backend(args, seed)
        executor = _build_executor(args, seed)
        with runio.run_lock(run_dir):
            writer = runio.RunWriter(run_dir, rebuild=bool(prior))
            writer.write_manifest(
                runio.build_manifest(
                    pipeline=pipeline,
                    dataset_path=args.dataset,
                    dataset_name=dataset.name,
                    n_tasks=len(dataset),
                    k=args.k,
                    seed=seed,
                    sampling=config.as_dict(),
                    trim_steps=args.trim_steps,
                    tool_limit=args.tool_limit,
                    exec_timeout_s=args.exec_timeout,
                    template_hashes=templates.hashes(),
                    backend_info=backend_info,
                )
            )
            if pipeline is Pipeline.TROVE:
                run_trove(
                    dataset,
                    args.k,
                    seed,
                    config,
                    backend,
                    executor,
                    templates=templates,
                    writer=writer,
                    trim_steps=args.trim_steps,
                    tool_limit=args.tool_limit,
                    workers=args.workers,
                    prior=prior,
                )
            else:
                run_primitive(
                    dataset,
                    args.k,
                    seed,
                    config,
                    backend,
                    executor,
                    templates=templates,
                    writer=writer,
                    workers=args.workers,
                    prior=prior,
                )
        print(run_dir)
    return EXIT_OK


def _dataset_for_run(run_dir: str, override: str | None) -> Dataset:
    manifest = runio.read_manifest(run_dir)
    path = override or manifest.get("dataset_path")
    if not path or not Path(path).is_file():
        raise UsageError(
            f"ground-truth dataset unavailable for {run_dir}; pass --dataset with the task file"
        )
    if runio.file_sha256(path) != manifest.get("dataset_sha256"):
        raise ValidationError(f"dataset {path} does not match the one recorded for {run_dir}")
    dataset = load_dataset(path, name=manifest.get("dataset_name"))
    return dataset


def cmd_select(args) -> int:
    mechanism = _MECHANISMS[args.selection]
    record = runio.load_run(args.run_dir)
    dataset = _dataset_for_run(args.run_dir, args.dataset) if mechanism is Mechanism.ORACLE else None
    results = analysis.select_run(record, mechanism, dataset)
    with runio.run_lock(args.run_dir):
        path = runio.write_selections(args.run_dir, mechanism, results)
    print(path)
    return EXIT_OK


def _group_runs(run_dirs: list[str]) -> dict[Pipeline, dict[int, RunRecord]]:
    grouped: dict[Pipeline, dict[int, RunRecord]] = {}
    for run_dir in run_dirs:
        record = runio.load_run(run_dir)
        seeds = grouped.setdefault(record.pipeline, {})
        if record.seed in seeds:
            raise ValidationError(f"duplicate seed {record.seed} for pipeline {record.pipeline.value}")
        seeds[record.seed] = record
    for pipeline, seeds in grouped.items():
        ks = {record.k for record in seeds.values()}
        if len(ks) > 1:
            raise ValidationError(f"{pipeline.value} runs disagree on K: {sorted(ks)}")
    return grouped


def _require(
    grouped: dict[Pipeline, dict[int, RunRecord]], pipeline: Pipeline, metric: str
) -> dict[int, RunRecord]:
    if pipeline not in grouped:
        raise ValidationError(f"metric {metric!r} needs {pipeline.value} runs; none were given")
    return grouped[pipeline]


def cmd_analyze(args) -> int:
    metrics = ALL_METRICS if args.metrics == "all" else tuple(args.metrics.split(","))
    unknown = [m for m in metrics if m not in ALL_METRICS]
    if unknown:
        raise UsageError(f"unknown metrics: {', '.join(unknown)}; valid: {', '.join(ALL_METRICS)}")
    explicit = args.metrics != "all"

    manifests = [runio.read_manifest(run_dir) for run_dir in args.runs]
    hashes = {m.get("dataset_sha256") for m in manifests}
    if len(hashes) > 1:
        raise ValidationError("run directories were built from different datasets")
    dataset = _dataset_for_run(args.runs[0], args.dataset)
    grouped = _group_runs(args.runs)
    trove = grouped.get(Pipeline.TROVE, {})
    primitive = grouped.get(Pipeline.PRIMITIVE, {})

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregate_label = dataset.name
    summary: list[tuple[str, list[str]]] = []
    summary.append(
        (
            "runs",
            [
                f"{pipeline.value}: seeds {sorted(seeds)} at K={next(iter(seeds.values())).k}"
                for pipeline, seeds in sorted(grouped.items(), key=lambda kv: kv[0].value)
            ],
        )
    )

    def selections(records: dict[int, RunRecord], mechanism: Mechanism, with_truth: bool = False):
        return {
            seed: analysis.select_run(record, mechanism, dataset if with_truth else None)
            for seed, record in records.items()
        }

    def skip(metric: str, needed: Pipeline) -> bool:
        # 'all' quietly skips cross metrics a side is missing for; explicit
        # requests fail loudly naming the missing side.
        if needed in grouped:
            return False
        if explicit and metric in metrics:
            _require(grouped, needed, metric)
        return True

    if "accuracy" in metrics:
        columns: dict[str, analysis.MetricReport] = {}
        if primitive:
            columns["primitive_one_stage"] = analysis.accuracy(
                selections(primitive, Mechanism.ONE_STAGE), dataset
            )
        if trove:
            columns["trove_two_stage"] = analysis.accuracy(
                selections(trove, Mechanism.TWO_STAGE), dataset
            )
            columns["trove_one_stage"] = analysis.accuracy(
                selections(trove, Mechanism.ONE_STAGE), dataset
            )
        reporting.accuracy_table(out_dir / "accuracy.csv", aggregate_label, columns)
        summary.append(
            (
                "accuracy (agreement selection)",
                [
                    f"{name}: {report.aggregate.mean:.4f} +/- {report.aggregate.std:.4f}"
                    for name, report in columns.items()
                ],
            )
        )

    if "pass" in metrics:
        columns = {}
        if primitive:
            k = next(iter(primitive.values())).k
            columns[f"primitive_pass@{k}"] = analysis.pass_at_k(primitive, dataset, k)
        if trove:
            k = next(iter(trove.values())).k
            columns[f"trove_pass@{k}"] = analysis.pass_at_k(trove, dataset, k)
        reporting.accuracy_table(out_dir / "pass_at_k.csv", aggregate_label, columns)
        summary.append(
            (
                "oracle pass@K",
                [
                    f"{name}: {report.aggregate.mean:.4f} +/- {report.aggregate.std:.4f}"
                    for name, report in columns.items()
                ],
            )
        )

    if "distinct" in metrics and not (skip("distinct", Pipeline.TROVE) or skip("distinct", Pipeline.PRIMITIVE)):
        p_report = analysis.distinct_solutions(primitive, dataset)
        t_report = analysis.distinct_solutions(trove, dataset)
        reporting.distinct_table(out_dir / "distinct_solutions.csv", aggregate_label, p_report, t_report)
        summary.append(
            (
                "distinct solutions per task",
                [
                    f"primitive: {p_report.aggregate.mean:.4f}",
                    f"trove: {t_report.aggregate.mean:.4f}",
                    f"delta: {t_report.aggregate.mean - p_report.aggregate.mean:+.4f}",
                ],
            )
        )

    if "unique" in metrics and not skip("unique", Pipeline.TROVE):
        report = analysis.unique_solve_fraction(trove, dataset, per_mode_k=args.per_mode_k)
        reporting.unique_solve_table(out_dir / "unique_solve.csv", aggregate_label, report)
        summary.append(
            (
                "uniquely solved per mode",
                [f"{mode}: {cell.mean:.4f} +/- {cell.std:.4f}" for mode, cell in report.aggregate.items()],
            )
        )

    if "curve" in metrics:
        curves: dict[tuple[str, str], list[analysis.CurvePoint]] = {}
        for pipeline, records in grouped.items():
            mechanisms = [Mechanism.ONE_STAGE, Mechanism.ORACLE]
            if pipeline is Pipeline.TROVE:
                mechanisms.insert(1, Mechanism.TWO_STAGE)
            for mechanism in mechanisms:
                curves[(pipeline.value, mechanism.value)] = analysis.budget_curve(
                    records, dataset, mechanism
                )
        reporting.curve_table(out_dir / "budget_curve.csv", curves)

    if "combined" in metrics:
        combined: dict[tuple[str, str], list[tuple[int, float]]] = {}
        for pipeline, records in grouped.items():
            mechanisms = [Mechanism.ONE_STAGE, Mechanism.ORACLE]
            if pipeline is Pipeline.TROVE:
                mechanisms.insert(1, Mechanism.TWO_STAGE)
            for mechanism in mechanisms:
                combined[(pipeline.value, mechanism.value)] = analysis.seed_combined_curve(
                    records, dataset, mechanism, k_total=args.k_total
                )
        reporting.combined_curve_table(out_dir / "seed_combined_curve.csv", combined)

    if "jaccard" in metrics and not (skip("jaccard", Pipeline.TROVE) or skip("jaccard", Pipeline.PRIMITIVE)):
        reports = {
            "vs_skip": analysis.jaccard_cross_type(primitive, trove, dataset, mode_b=Mode.SKIP),
            "vs_create": analysis.jaccard_cross_type(primitive, trove, dataset, mode_b=Mode.CREATE),
            "vs_import": analysis.jaccard_cross_type(primitive, trove, dataset, mode_b=Mode.IMPORT),
            "vs_trove": analysis.jaccard_cross_type(primitive, trove, dataset),
        }
        reporting.jaccard_table(out_dir / "jaccard.csv", aggregate_label, reports)
        summary.append(
            (
                "mean jaccard of primitive-solved vs each mode",
                [f"{name}: {report.aggregate:.4f}" for name, report in reports.items()],
            )
        )

    if "coverage" in metrics and not (skip("coverage", Pipeline.TROVE) or skip("coverage", Pipeline.PRIMITIVE)):
        report = analysis.coverage_gains(trove, primitive, dataset)
        reporting.coverage_table(out_dir / "coverage_gains.csv", aggregate_label, report)
        summary.append(
            (
                "exclusive coverage",
                [
                    f"{direction}: consistent {cell.consistent_count} ({cell.consistent_pct:.2f}%), "
                    f"potential {cell.potential_count} ({cell.potential_pct:.2f}%)"
                    for direction, cell in sorted(report.aggregate.items())
                ],
            )
        )

    if "difficulty" in metrics and not (
        skip("difficulty", Pipeline.TROVE) or skip("difficulty", Pipeline.PRIMITIVE)
    ):
        reports = {
            "PRIMITIVE": analysis.difficulty_breakdown(primitive, dataset),
            "TROVE": analysis.difficulty_breakdown(trove, dataset),
        }
        reporting.difficulty_table(out_dir / "difficulty.csv", aggregate_label, reports)
        excluded = reports["TROVE"].excluded_without_difficulty
        summary.append(("difficulty breakdown", [f"tasks without a difficulty label: {excluded}"]))

    if "reuse" in metrics and not skip("reuse", Pipeline.TROVE):
        reuse_reports = {
            seed: analysis.tool_reuse_stats(
                record, analysis.select_run(record, Mechanism.ONE_STAGE), dataset
            )
            for seed, record in trove.items()
        }
        reporting.reuse_table(out_dir / "tool_reuse.csv", reuse_reports)
        any_seed = reuse_reports[min(reuse_reports)]
        reused = [t for t in any_seed.tools if t["reuse_count"] > 0]
        summary.append(
            (
                "tool reuse (first seed)",
                [f"tools learned: {len(any_seed.tools)}", f"tools ever reused in a correct selection: {len(reused)}"]
                + [f"{t['name']}: reused {t['reuse_count']}x" for t in reused],
            )
        )

    reporting.write_summary(out_dir / "summary.txt", summary)
    print(out_dir)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "select":
            return cmd_select(args)
        return cmd_analyze(args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
