#!/usr/bin/env python3
"""Regenerate the golden analysis reports for the mini benchmark.

Runs both pipelines (seeds 1 and 2) against the scripted mini fixtures into a
scratch directory, analyzes them, and freezes the reports under
fixtures/golden/. Review the diff before committing a refresh: the goldens are
the byte-exact contract for report shape and determinism.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from trovebench.cli import main  # noqa: E402

MINI = ROOT / "fixtures" / "mini"
GOLDEN = ROOT / "fixtures" / "golden"
TRIM_STEPS = 5


def build_runs(out: Path) -> list[Path]:
    for pipeline in ("trove", "primitive"):
        code = main(
            [
                "run",
                "--dataset", str(MINI / "mini.jsonl"),
                "--pipeline", pipeline,
                "--k", "15",
                "--seeds", "1", "2",
                "--backend", "mock",
                "--fixtures", str(MINI / "completions.jsonl"),
                "--exec-fixtures", str(MINI / "outcomes.jsonl"),
                "--trim-steps", str(TRIM_STEPS),
                "--out", str(out),
            ]
        )
        if code != 0:
            raise SystemExit(f"run failed with exit code {code}")
    return sorted(p for p in out.iterdir() if p.is_dir())


def main_script() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as scratch:
        runs = build_runs(Path(scratch))
        code = main(
            ["analyze", "--runs", *map(str, runs), "--out", str(GOLDEN)]
        )
        if code != 0:
            raise SystemExit(f"analyze failed with exit code {code}")
    print(f"golden reports written to {GOLDEN}")


if __name__ == "__main__":
    main_script()
