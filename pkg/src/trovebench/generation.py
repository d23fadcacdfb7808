"""Generation backends (live HTTP and scripted mock) with per-task budget accounting."""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol

import requests

from .errors import BudgetError, FixtureError, TransportError


class Mode(str, Enum):
    SKIP = "SKIP"
    CREATE = "CREATE"
    IMPORT = "IMPORT"
    PRIMITIVE = "PRIMITIVE"


# Tie-break order used throughout selection and ordering logic.
MODE_RANK = {Mode.SKIP: 0, Mode.CREATE: 1, Mode.IMPORT: 2, Mode.PRIMITIVE: 3}

# Generation order of the budget-split pipeline within one task.
TROVE_MODES = (Mode.SKIP, Mode.CREATE, Mode.IMPORT)


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 0.6
    top_p: float = 0.95
    max_new_tokens: int = 512
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")

    def as_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_new_tokens": self.max_new_tokens,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GenerationRequest:
    task_id: str
    mode: Mode
    prompt: str
    n: int
    config: SamplingConfig
    # Mock backends key completions by within-mode sample index; a request
    # resuming mid-task starts above zero.
    first_index: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class Generation:
    """One sampled completion: extracted program plus the raw text for audit."""

    source: str
    raw: str


_FENCE_RE = re.compile(r"```[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```", re.DOTALL)


def extract_code(completion: str) -> str:
    """First fenced code block of ``completion``, or the whole completion when none."""
    match = _FENCE_RE.search(completion)
    if match:
        return match.group(1).strip()
    return completion.strip()


class BudgetLedger:
    """Thread-safe per-task, per-mode call counter with hard limits.

    ``reserve`` is an atomic check-and-increment so concurrent workers cannot
    overshoot; ``release`` exists only to roll back a reservation whose backend
    call failed (the run aborts on that path).
    """

    def __init__(self, limits: Mapping[Mode, int]):
        if not limits:
            raise ValueError("ledger needs at least one mode limit")
        for mode, limit in limits.items():
            if limit < 1:
                raise ValueError(f"limit for {mode.value} must be >= 1")
        self.limits: dict[Mode, int] = dict(limits)
        self.k_limit = sum(self.limits.values())
        self._counts: dict[str, dict[Mode, int]] = {}
        self._lock = threading.Lock()

    def reserve(self, task_id: str, mode: Mode, n: int) -> None:
        with self._lock:
            limit = self.limits.get(mode)
            if limit is None:
                raise BudgetError(f"mode {mode.value} has no budget in this run")
            counts = self._counts.setdefault(task_id, {m: 0 for m in self.limits})
            if counts[mode] + n > limit:
                raise BudgetError(
                    f"task {task_id}: {counts[mode]} + {n} {mode.value} calls "
                    f"would exceed the limit of {limit}"
                )
            counts[mode] += n

    def release(self, task_id: str, mode: Mode, n: int) -> None:
        with self._lock:
            counts = self._counts[task_id]
            counts[mode] = max(0, counts[mode] - n)

    def counts(self, task_id: str) -> dict[Mode, int]:
        with self._lock:
            return dict(self._counts.get(task_id, {m: 0 for m in self.limits}))

    def task_ids(self) -> list[str]:
        with self._lock:
            return list(self._counts)


def ledger_report(ledger: BudgetLedger) -> dict:
    """Plain-data budget summary: per-task, per-mode counts plus totals."""
    per_task: dict[str, dict] = {}
    total_calls = 0
    for task_id in ledger.task_ids():
        counts = ledger.counts(task_id)
        task_total = sum(counts.values())
        total_calls += task_total
        per_task[task_id] = {mode.value: counts[mode] for mode in counts}
        per_task[task_id]["total"] = task_total
    return {
        "k_limit": ledger.k_limit,
        "limits": {mode.value: limit for mode, limit in ledger.limits.items()},
        "per_task": per_task,
        "total_calls": total_calls,
    }


class Backend(Protocol):
    def complete(self, request: GenerationRequest) -> list[str]: ...


class MockBackend:
    """Deterministic backend replaying scripted completions.

    Entries are keyed by (task_id, mode, sample_index) with an optional seed
    for per-seed variants; a missing key falls back to ``default`` when one is
    configured and raises otherwise.
    """

    def __init__(
        self,
        entries: Mapping[tuple[str, str, int, int | None], str],
        default: str | None = None,
        seed: int | None = None,
    ):
        self._entries = dict(entries)
        self._default = default
        self._seed = seed

    @classmethod
    def from_file(cls, path: str | Path, default: str | None = None, seed: int | None = None) -> "MockBackend":
        entries: dict[tuple[str, str, int, int | None], str] = {}
        path = Path(path)
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
                    entries[key] = str(obj["completion"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise FixtureError(f"{path}:{lineno}: bad completion fixture: {exc}") from exc
        return cls(entries, default=default, seed=seed)

    def _lookup(self, task_id: str, mode: Mode, index: int) -> str:
        for seed in (self._seed, None):
            hit = self._entries.get((task_id, mode.value, index, seed))
            if hit is not None:
                return hit
        if self._default is not None:
            return self._default
        raise FixtureError(
            f"no scripted completion for ({task_id}, {mode.value}, {index})"
            + (f" at seed {self._seed}" if self._seed is not None else "")
        )

    def complete(self, request: GenerationRequest) -> list[str]:
        start = request.first_index
        return [self._lookup(request.task_id, request.mode, start + i) for i in range(request.n)]


class HttpBackend:
    """OpenAI-compatible chat-completions client with bounded retries.

    One request per ``complete`` call; ``n`` sampled sequences come back
    batched. The budget unit is returned sequences, not HTTP round-trips.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        max_retries: int = 3,
        retry_wait_s: float = 1.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.retry_wait_s = retry_wait_s
        self._session = requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, request: GenerationRequest) -> list[str]:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "n": request.n,
            "temperature": request.config.temperature,
            "top_p": request.config.top_p,
            "max_tokens": request.config.max_new_tokens,
            "seed": request.config.seed,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.retry_wait_s * attempt)
            try:
                response = self._session.post(
                    self.endpoint, json=payload, headers=self._headers(), timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"backend returned {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"backend returned {response.status_code}: {response.text[:200]}")
            try:
                choices = response.json()["choices"]
                texts = [str(choice["message"]["content"] or "") for choice in choices]
            except (ValueError, KeyError, TypeError) as exc:
                raise TransportError(f"malformed backend reply: {exc}") from exc
            if len(texts) != request.n:
                raise TransportError(f"requested {request.n} sequences, backend returned {len(texts)}")
            return texts
        raise TransportError(f"backend unreachable after {self.max_retries + 1} attempts: {last_error}")


def generate(request: GenerationRequest, backend: Backend, ledger: BudgetLedger) -> list[Generation]:
    """Sample ``request.n`` completions, charging the ledger before backend contact.

    The reservation is rolled back if the backend fails, so ledger totals count
    returned sequences only.
    """
    ledger.reserve(request.task_id, request.mode, request.n)
    try:
        raws = backend.complete(request)
    except Exception:
        ledger.release(request.task_id, request.mode, request.n)
        raise
    if len(raws) != request.n:
        ledger.release(request.task_id, request.mode, request.n)
        raise TransportError(f"backend returned {len(raws)} sequences for n={request.n}")
    return [Generation(source=extract_code(raw), raw=raw) for raw in raws]
