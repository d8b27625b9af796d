import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clozeprobe.errors import (
    BatchRejected,
    EndpointUnavailable,
    MalformedResponse,
    MaskCountError,
    OversizedBatch,
)
from clozeprobe.scoring import (
    MockScorer,
    ScoreRequest,
    ScoreResult,
    ScoringClient,
    entropy_bits,
    mock_score,
    result_from_distribution,
)


def test_request_rejects_bad_mask_counts():
    with pytest.raises(MaskCountError):
        ScoreRequest(id="x", text="no mask here.")
    with pytest.raises(MaskCountError):
        ScoreRequest(id="x", text="[MASK] and [MASK].")
    ScoreRequest(id="x", text="Paris is the capital of [MASK].")


def test_result_ordering_validation():
    ScoreResult(id="x", top=(("France", 0.7), ("Italy", 0.3)), entropy_bits=0.88)
    with pytest.raises(ValueError):
        ScoreResult(id="x", top=(("Italy", 0.3), ("France", 0.7)), entropy_bits=0.88)
    with pytest.raises(ValueError):  # tie must be broken lexicographically
        ScoreResult(id="x", top=(("b", 0.5), ("a", 0.5)), entropy_bits=1.0)
    with pytest.raises(ValueError):  # probs exceed 1
        ScoreResult(id="x", top=(("b", 0.8), ("a", 0.7)), entropy_bits=1.0)


def test_entropy_values():
    assert entropy_bits([1.0]) == 0.0
    assert entropy_bits([0.5, 0.5]) == 1.0
    assert math.isclose(entropy_bits([0.7, 0.3]), 0.8813, abs_tol=1e-4)
    assert entropy_bits([0.5, 0.5, 0.0]) == 1.0  # zero mass contributes nothing


@given(st.lists(st.floats(min_value=1e-9, max_value=1.0), min_size=1, max_size=50))
def test_entropy_bounds(weights):
    total = sum(weights)
    probs = [w / total for w in weights]
    h = entropy_bits(probs)
    assert 0.0 <= h <= math.log2(len(probs)) + 1e-9


def test_result_from_distribution_gold_handling():
    dist = {"France": 0.7, "Italy": 0.2, "Spain": 0.1}
    res = result_from_distribution("r", dist, top_k=2, gold_token="Italy")
    assert res.top == (("France", 0.7), ("Italy", 0.2))
    assert res.gold_prob == 0.2
    assert res.gold_rank == 2
    res = result_from_distribution("r", dist, gold_token="Atlantis")
    assert res.gold_prob == 0.0
    assert res.gold_rank is None
    res = result_from_distribution("r", dist)
    assert res.gold_prob is None


def test_result_from_distribution_rank_ties_are_lexicographic():
    dist = {"b": 0.4, "a": 0.4, "c": 0.2}
    res = result_from_distribution("r", dist, gold_token="b")
    assert res.top[0] == ("a", 0.4)
    assert res.gold_rank == 2  # "a" outranks "b" on the tie


def test_result_from_distribution_respects_rank_horizon():
    dist = {f"t{i:03d}": (1.0 / 300) for i in range(300)}
    res = result_from_distribution("r", dist, gold_token="t299", rank_horizon=100)
    assert res.gold_rank is None
    assert res.gold_prob == pytest.approx(1.0 / 300)


def test_mock_table_entry_is_returned_exactly():
    table = {"Paris is the capital of [MASK].": {"France": 0.7, "Italy": 0.3}}
    res = mock_score("Paris is the capital of [MASK].", gold_token="France", table=table)
    assert res.top == (("France", 0.7), ("Italy", 0.3))
    assert res.gold_prob == 0.7
    assert res.gold_rank == 1
    assert math.isclose(res.entropy_bits, 0.8813, abs_tol=1e-4)


def test_mock_replay_is_bit_identical():
    scorer_a, scorer_b = MockScorer(), MockScorer()
    requests_ = [
        ScoreRequest(id=f"q{i}", text=f"Subject{i} relates to [MASK].", gold_token="France")
        for i in range(20)
    ]
    assert scorer_a.score_batch(requests_) == scorer_b.score_batch(requests_)


def test_mock_includes_gold_in_support():
    res = mock_score("Anything goes [MASK].", gold_token="zzz-unlikely-token")
    assert res.gold_prob is not None and res.gold_prob > 0.0


# --- wire protocol client ----------------------------------------------------


class _FakeScoreService(BaseHTTPRequestHandler):
    """Configurable in-process stand-in for the scoring service."""

    behaviors: list[str] = []  # queue of "ok" | "503" | "400" | "garbage"
    seen_payloads: list[dict] = []
    mock = MockScorer()

    def log_message(self, *args):  # silence request logging
        pass

    def do_GET(self):
        if self.path == "/v1/vocab":
            body = json.dumps({"tokens": ["France", "Italy", "Spain"]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(body)
        else:
            self.send_response(404)
            self.end_headers()

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        type(self).seen_payloads.append(payload)
        behavior = type(self).behaviors.pop(0) if type(self).behaviors else "ok"

        if behavior == "503":
            self.send_response(503)
            self.end_headers()
            return
        if behavior == "400":
            body = json.dumps(
                {"error": "bad gold token", "failed_ids": [r["id"] for r in payload["requests"]]}
            ).encode()
            self.send_response(400)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(body)
            return
        if behavior == "garbage":
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(b'{"nope": 1}')
            return

        requests_ = [
            ScoreRequest(
                id=r["id"], text=r["text"], gold_token=r.get("gold_token"), top_k=r.get("top_k", 10)
            )
            for r in payload["requests"]
        ]
        results = type(self).mock.score_batch(requests_)
        body = json.dumps({"results": [r.to_json() for r in reversed(results)]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture
def fake_service():
    server = HTTPServer(("127.0.0.1", 0), _FakeScoreService)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _FakeScoreService.behaviors = []
    _FakeScoreService.seen_payloads = []
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def _requests(n):
    return [
        ScoreRequest(id=f"p{i}", text=f"City{i} is the capital of [MASK].", gold_token="France")
        for i in range(n)
    ]


def test_client_results_align_with_request_order(fake_service):
    client = ScoringClient(fake_service, model="mock")
    results = client.score_batch(_requests(3))
    assert [r.id for r in results] == ["p0", "p1", "p2"]  # service shuffles; client realigns


def test_client_retries_503_then_succeeds(fake_service):
    _FakeScoreService.behaviors = ["503", "503", "ok"]
    client = ScoringClient(fake_service, model="mock", backoff=0.01)
    results = client.score_batch(_requests(2))
    assert len(results) == 2
    assert len(_FakeScoreService.seen_payloads) == 3


def test_client_gives_up_after_retries(fake_service):
    _FakeScoreService.behaviors = ["503"] * 10
    client = ScoringClient(fake_service, model="mock", backoff=0.01, max_retries=2)
    with pytest.raises(EndpointUnavailable):
        client.score_batch(_requests(1))


def test_client_unreachable_endpoint():
    client = ScoringClient("http://127.0.0.1:1", model="mock", backoff=0.01, max_retries=1)
    with pytest.raises(EndpointUnavailable):
        client.score_batch(_requests(1))


def test_client_surfaces_failed_ids(fake_service):
    _FakeScoreService.behaviors = ["400"]
    client = ScoringClient(fake_service, model="mock")
    with pytest.raises(BatchRejected) as excinfo:
        client.score_batch(_requests(2))
    assert excinfo.value.failed_ids == ["p0", "p1"]


def test_client_rejects_oversized_batch(fake_service):
    client = ScoringClient(fake_service, model="mock", max_batch=4)
    with pytest.raises(OversizedBatch):
        client.score_batch(_requests(5))


def test_client_malformed_response(fake_service):
    _FakeScoreService.behaviors = ["garbage"]
    client = ScoringClient(fake_service, model="mock")
    with pytest.raises(MalformedResponse):
        client.score_batch(_requests(1))


def test_score_all_chunks_and_merges(fake_service):
    client = ScoringClient(fake_service, model="mock", max_batch=4, max_in_flight=2)
    requests_ = _requests(10)
    results = client.score_all(requests_)
    assert [r.id for r in results] == [r.id for r in requests_]
    assert len(_FakeScoreService.seen_payloads) == 3  # 4 + 4 + 2


def test_fetch_vocab(fake_service):
    client = ScoringClient(fake_service, model="mock")
    assert client.fetch_vocab() == ["France", "Italy", "Spain"]
