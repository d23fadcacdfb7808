"""Induced-tool library: extraction from generated code, prompt rendering, use counts, trimming."""

from __future__ import annotations

import ast
from dataclasses import dataclass

from .lexing import called_names

NO_TOOLS_FRAGMENT = "# (the toolbox is empty: no tools available)"


@dataclass
class Tool:
    name: str
    source: str
    origin_task: str
    created_at_step: int
    use_count: int = 0
    import_count: int = 0


class Toolbox:
    """Ordered library of induced helper functions.

    Single-writer by contract: the pipeline mutates it strictly in task order,
    and ``step`` counts processed tasks.
    """

    def __init__(self, trim_steps: int = 500):
        if trim_steps < 1:
            raise ValueError("trim_steps must be >= 1")
        self.tools: dict[str, Tool] = {}
        self.step = 0
        self.trim_steps = trim_steps

    def advance(self) -> None:
        self.step += 1

    def __len__(self) -> int:
        return len(self.tools)


def _top_level_functions(source: str) -> list[tuple[str, str]]:
    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError):
        return []
    functions = []
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            segment = ast.get_source_segment(source, node)
            if segment:
                functions.append((node.name, segment))
    return functions


def extract_tools(toolbox: Toolbox, source: str, origin_task: str, step: int) -> list[Tool]:
    """Register every new top-level function definition found in ``source``.

    Nested functions are not extracted, an unparseable source contributes
    nothing (extraction is best-effort; the candidate still executes), and a
    name collision keeps the first definition.
    """
    added: list[Tool] = []
    for name, segment in _top_level_functions(source):
        if name in toolbox.tools:
            continue
        tool = Tool(name=name, source=segment, origin_task=origin_task, created_at_step=step)
        toolbox.tools[name] = tool
        added.append(tool)
    return added


def rendered_names(toolbox: Toolbox, limit: int) -> list[str]:
    """Names of the tools a prompt fragment would list, in insertion order."""
    if limit < 0:
        raise ValueError("limit must be >= 0")
    return list(toolbox.tools)[:limit]


def render_toolbox(toolbox: Toolbox, limit: int) -> str:
    """Deterministic prompt fragment listing up to ``limit`` tools with full sources."""
    names = rendered_names(toolbox, limit)
    if not names:
        return NO_TOOLS_FRAGMENT
    blocks = []
    for name in names:
        tool = toolbox.tools[name]
        blocks.append(f"# tool: {name} (from task {tool.origin_task})\n{tool.source}")
    return "\n\n".join(blocks)


def record_use(toolbox: Toolbox, candidate_source: str) -> list[str]:
    """Bump use_count once per tool called in the candidate (per candidate, not per call site)."""
    calls = called_names(candidate_source)
    hits = [name for name in toolbox.tools if name in calls]
    for name in hits:
        toolbox.tools[name].use_count += 1
    return hits


def record_imports(toolbox: Toolbox, names: list[str]) -> None:
    """Count one prompt injection for each listed tool."""
    for name in names:
        if name in toolbox.tools:
            toolbox.tools[name].import_count += 1


def maybe_trim(toolbox: Toolbox) -> list[str]:
    """Drop dead weight at each trim boundary; call once per task after ``advance``.

    At step B (a multiple of trim_steps) every tool still unused and created
    before the boundary task is removed. Tools created during the boundary task
    itself get a full window to prove themselves.
    """
    if toolbox.step == 0 or toolbox.step % toolbox.trim_steps != 0:
        return []
    doomed = [
        name
        for name, tool in toolbox.tools.items()
        if tool.use_count == 0 and tool.created_at_step < toolbox.step
    ]
    for name in doomed:
        del toolbox.tools[name]
    return doomed


def snapshot(toolbox: Toolbox) -> dict:
    """Serializable snapshot of the current toolbox state, insertion-ordered."""
    return {
        "step": toolbox.step,
        "trim_steps": toolbox.trim_steps,
        "tools": [
            {
                "name": tool.name,
                "source": tool.source,
                "origin_task": tool.origin_task,
                "created_at_step": tool.created_at_step,
                "use_count": tool.use_count,
                "import_count": tool.import_count,
            }
            for tool in toolbox.tools.values()
        ],
    }
