from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from exbt.errors import BackendTimeout, BackendUnavailable, MalformedResponse
from exbt.genbackend import (
    GenerationParams,
    HttpBackend,
    RequestLog,
    StubBackend,
    digest,
    extract_candidate,
    make_backend,
)

PARAMS = GenerationParams(max_new_tokens=64, temperature=0.0, seed=7)


# --- stub backend ---


def test_stub_digest_match():
    instruction = "write a test"
    stub = StubBackend([{"digest": digest(instruction), "completion": "ok"}])
    assert stub.generate(instruction, PARAMS) == "ok"


def test_stub_contains_match_first_wins():
    stub = StubBackend(
        [
            {"contains": "Account.java:14", "completion": "withdraw test"},
            {"contains": "Account", "completion": "generic"},
        ]
    )
    assert stub.generate("target Account.java:14 please", PARAMS) == "withdraw test"
    assert stub.generate("target Account.java:22 please", PARAMS) == "generic"


def test_stub_no_match_is_unavailable():
    with pytest.raises(BackendUnavailable):
        StubBackend([]).generate("anything", PARAMS)


def test_stub_replay_determinism(tmp_path):
    log = RequestLog()
    stub = StubBackend([{"contains": "x", "completion": "fixed body"}], log=log)
    first = stub.generate("x marks the spot", PARAMS)
    second = stub.generate("x marks the spot", PARAMS)
    assert first == second
    log.write(tmp_path / "requests.jsonl")
    entries = [json.loads(l) for l in (tmp_path / "requests.jsonl").read_text().splitlines()]
    assert len(entries) == 2
    assert entries[0]["completion_digest"] == entries[1]["completion_digest"]
    assert entries[0]["instruction_digest"] == digest("x marks the spot")


# --- http backend against a real local server ---


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        if self.path == "/ok":
            payload = json.dumps({"text": "echo: " + body["prompt"][:10]})
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(payload.encode())
        elif self.path == "/choices":
            payload = json.dumps({"choices": [{"message": {"content": "chatty"}}]})
            self.send_response(200)
            self.end_headers()
            self.wfile.write(payload.encode())
        elif self.path == "/notjson":
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"<html>oops</html>")
        elif self.path == "/slow":
            import time

            time.sleep(2)
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"{}")
        else:
            self.send_response(404)
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def server():
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}"
    httpd.shutdown()


def test_http_plain_text_contract(server):
    backend = HttpBackend(server + "/ok")
    assert backend.generate("hello world", PARAMS) == "echo: hello worl"[:16]


def test_http_choices_shape_adapts(server):
    assert HttpBackend(server + "/choices").generate("x", PARAMS) == "chatty"


def test_http_non_json_is_malformed(server):
    with pytest.raises(MalformedResponse):
        HttpBackend(server + "/notjson").generate("x", PARAMS)


def test_http_missing_text_is_malformed(server):
    with pytest.raises(MalformedResponse):
        HttpBackend(server + "/slow", timeout=10).generate("x", PARAMS)


def test_http_deadline(server):
    with pytest.raises(BackendTimeout) as err:
        HttpBackend(server + "/slow", timeout=0.2).generate("x", PARAMS)
    assert err.value.elapsed == 0.2


def test_http_unreachable_is_unavailable():
    with pytest.raises(BackendUnavailable):
        HttpBackend("http://127.0.0.1:1/none", timeout=0.5).generate("x", PARAMS)


def test_make_backend_env(monkeypatch):
    monkeypatch.setenv("BACKEND_KIND", "stub")
    assert isinstance(make_backend(), StubBackend)
    monkeypatch.setenv("BACKEND_KIND", "http")
    monkeypatch.setenv("BACKEND_URL", "http://127.0.0.1:9/x")
    assert isinstance(make_backend(), HttpBackend)
    with pytest.raises(BackendUnavailable):
        make_backend("nonsense")


# --- candidate extraction ---

FENCED = """Sure! Here's a test:

```java
@Test(expected = IllegalArgumentException.class)
public void testNegative() {
    new Account(10).withdraw(-1);
}
```

Let me know if you need more.
"""


def test_extract_fenced_method():
    method = extract_candidate(FENCED)
    assert method is not None
    assert method.startswith("@Test")
    assert method.endswith("}")
    assert "```" not in method


def test_extract_prose_only_is_none():
    assert extract_candidate("I cannot write that test, sorry.") is None


def test_extract_first_of_two_methods():
    completion = (
        "@Test public void first() { a(); }\n"
        "@Test public void second() { b(); }\n"
    )
    method = extract_candidate(completion)
    assert "first" in method and "second" not in method


def test_extract_unbalanced_braces_is_none():
    assert extract_candidate("@Test public void broken() { if (x) {") is None


def test_extract_requires_test_annotation():
    assert extract_candidate("public void helper() { a(); }") is None


def test_extracted_candidate_reparses():
    from exbt.classifier import classify_test

    method = extract_candidate(FENCED)
    assert classify_test(method).is_ebt


def test_extract_handles_string_braces():
    completion = '@Test public void s() { log("{unbalanced"); }'
    method = extract_candidate(completion)
    assert method == completion
