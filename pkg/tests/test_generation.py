import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from trovebench.errors import BudgetError, FixtureError, TransportError
from trovebench.generation import (
    BudgetLedger,
    GenerationRequest,
    HttpBackend,
    MockBackend,
    Mode,
    SamplingConfig,
    extract_code,
    generate,
    ledger_report,
)

CFG = SamplingConfig(seed=1)


def req(task_id="t1", mode=Mode.SKIP, n=1, prompt="p"):
    return GenerationRequest(task_id=task_id, mode=mode, prompt=prompt, n=n, config=CFG)


def test_extract_first_fenced_block():
    completion = "Some text\n```python\nanswer = 1\n```\nmore\n```python\nanswer = 2\n```"
    assert extract_code(completion) == "answer = 1"


def test_extract_without_language_tag():
    assert extract_code("```\nx = 1\n```") == "x = 1"


def test_extract_whole_completion_when_unfenced():
    assert extract_code("  answer = 3  \n") == "answer = 3"


def test_sampling_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig(temperature=-0.1)
    with pytest.raises(ValueError):
        SamplingConfig(top_p=0)
    with pytest.raises(ValueError):
        SamplingConfig(max_new_tokens=0)


def test_request_rejects_n_zero():
    with pytest.raises(ValueError):
        req(n=0)


def test_mock_backend_returns_scripted_sources_verbatim():
    backend = MockBackend(
        {
            ("t1", "SKIP", 0, None): "answer = 1",
            ("t1", "SKIP", 1, None): "answer = 2",
        }
    )
    ledger = BudgetLedger({Mode.SKIP: 5})
    generations = generate(req(n=2), backend, ledger)
    assert [g.source for g in generations] == ["answer = 1", "answer = 2"]
    assert [g.raw for g in generations] == ["answer = 1", "answer = 2"]


def test_mock_backend_seed_specific_entries_win():
    backend = MockBackend(
        {("t1", "SKIP", 0, None): "base", ("t1", "SKIP", 0, 2): "seeded"}, seed=2
    )
    assert backend.complete(req()) == ["seeded"]


def test_mock_backend_default_completion():
    backend = MockBackend({}, default="answer = 0")
    assert backend.complete(req()) == ["answer = 0"]


def test_mock_backend_resumes_above_first_index():
    backend = MockBackend({("t1", "SKIP", 2, None): "late"})
    request = GenerationRequest(task_id="t1", mode=Mode.SKIP, prompt="p", n=1, config=CFG, first_index=2)
    assert backend.complete(request) == ["late"]


def test_mock_backend_missing_key_without_default():
    backend = MockBackend({})
    with pytest.raises(FixtureError, match="no scripted completion"):
        backend.complete(req())


def test_budget_refused_before_backend_contact():
    calls = []

    class SpyBackend:
        def complete(self, request):
            calls.append(request)
            return ["x"] * request.n

    ledger = BudgetLedger({Mode.PRIMITIVE: 15})
    for _ in range(15):
        generate(req(mode=Mode.PRIMITIVE), SpyBackend(), ledger)
    with pytest.raises(BudgetError):
        generate(req(mode=Mode.PRIMITIVE), SpyBackend(), ledger)
    assert len(calls) == 15
    assert ledger.counts("t1")[Mode.PRIMITIVE] == 15


def test_reservation_rolls_back_on_backend_failure():
    class FailingBackend:
        def complete(self, request):
            raise TransportError("down")

    ledger = BudgetLedger({Mode.SKIP: 5})
    with pytest.raises(TransportError):
        generate(req(n=3), FailingBackend(), ledger)
    assert ledger.counts("t1")[Mode.SKIP] == 0


def test_ledger_mode_without_budget():
    ledger = BudgetLedger({Mode.PRIMITIVE: 3})
    with pytest.raises(BudgetError, match="no budget"):
        ledger.reserve("t1", Mode.CREATE, 1)


def test_concurrent_reservations_never_overshoot():
    ledger = BudgetLedger({Mode.PRIMITIVE: 50})
    taken = []

    def worker():
        for _ in range(20):
            try:
                ledger.reserve("t1", Mode.PRIMITIVE, 1)
                taken.append(1)
            except BudgetError:
                pass

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(taken) == 50
    assert ledger.counts("t1")[Mode.PRIMITIVE] == 50


def test_ledger_report_trove_split():
    ledger = BudgetLedger({Mode.SKIP: 5, Mode.CREATE: 5, Mode.IMPORT: 5})
    for task in ("a", "b"):
        for mode in (Mode.SKIP, Mode.CREATE, Mode.IMPORT):
            ledger.reserve(task, mode, 5)
    report = ledger_report(ledger)
    assert report["k_limit"] == 15
    assert report["per_task"]["a"] == {"SKIP": 5, "CREATE": 5, "IMPORT": 5, "total": 15}
    assert report["total_calls"] == 30


def test_ledger_report_primitive():
    ledger = BudgetLedger({Mode.PRIMITIVE: 3})
    ledger.reserve("a", Mode.PRIMITIVE, 3)
    report = ledger_report(ledger)
    assert report["per_task"]["a"]["total"] == 3
    assert report["total_calls"] == 3


def test_ledger_report_fresh():
    report = ledger_report(BudgetLedger({Mode.PRIMITIVE: 3}))
    assert report["per_task"] == {}
    assert report["total_calls"] == 0


class _Handler(BaseHTTPRequestHandler):
    failures_left = 0
    requests_seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).requests_seen.append(body)
        if type(self).failures_left > 0:
            type(self).failures_left -= 1
            self.send_response(503)
            self.end_headers()
            return
        choices = [
            {"message": {"content": f"```python\nanswer = {i}\n```"}} for i in range(body["n"])
        ]
        payload = json.dumps({"choices": choices}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.failures_left = 0
    _Handler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


def test_http_backend_batched_sampling(http_server):
    backend = HttpBackend(http_server, model="m", api_key="k")
    ledger = BudgetLedger({Mode.SKIP: 5})
    generations = generate(req(n=3), backend, ledger)
    assert [g.source for g in generations] == ["answer = 0", "answer = 1", "answer = 2"]
    assert _Handler.requests_seen[0]["n"] == 3
    assert _Handler.requests_seen[0]["temperature"] == CFG.temperature
    assert ledger.counts("t1")[Mode.SKIP] == 3


def test_http_backend_retries_transient_failures(http_server):
    _Handler.failures_left = 2
    backend = HttpBackend(http_server, model="m", max_retries=3, retry_wait_s=0.01)
    assert backend.complete(req(n=1)) == ["```python\nanswer = 0\n```"]
    assert len(_Handler.requests_seen) == 3


def test_http_backend_gives_up_after_bounded_retries(http_server):
    _Handler.failures_left = 99
    backend = HttpBackend(http_server, model="m", max_retries=2, retry_wait_s=0.01)
    with pytest.raises(TransportError):
        backend.complete(req(n=1))
    assert len(_Handler.requests_seen) == 3


def test_http_backend_unreachable():
    backend = HttpBackend("http://127.0.0.1:9/none", model="m", max_retries=1, retry_wait_s=0.01)
    with pytest.raises(TransportError):
        backend.complete(req())
