import math


def score_payload(*entries, model="tiny-test"):
    return {"model": model, "requests": list(entries)}


def test_healthz(client):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"
    assert body["model"]["name"] == "tiny-test"
    assert body["model"]["mask_token"] == "[MASK]"
    assert "convention" in str(body["model"]["convention_notes"]) or body["model"]["convention_notes"]


def test_score_happy_path(client):
    response = client.post(
        "/v1/score",
        json=score_payload(
            {"id": "a", "text": "paris is the capital of [MASK].", "gold_token": "france", "top_k": 5}
        ),
    )
    assert response.status_code == 200
    (result,) = response.json()["results"]
    assert result["id"] == "a"
    assert len(result["top"]) == 5
    probs = [p for _, p in result["top"]]
    assert probs == sorted(probs, reverse=True)
    assert sum(probs) <= 1.0 + 1e-6
    assert 0.0 <= result["entropy_bits"] <= math.log2(42)
    assert 0.0 <= result["gold_prob"] <= 1.0
    assert result.get("gold_rank", 1) >= 1


def test_top_ties_break_lexicographically(client):
    response = client.post(
        "/v1/score",
        json=score_payload({"id": "a", "text": "paris is the capital of [MASK].", "top_k": 42}),
    )
    top = response.json()["results"][0]["top"]
    for (t1, p1), (t2, p2) in zip(top, top[1:]):
        assert p1 > p2 or (p1 == p2 and t1 < t2)


def test_gold_optional(client):
    response = client.post(
        "/v1/score", json=score_payload({"id": "a", "text": "rome is located in [MASK]."})
    )
    (result,) = response.json()["results"]
    assert "gold_prob" not in result and "gold_rank" not in result


def test_two_masks_rejected(client):
    response = client.post(
        "/v1/score",
        json=score_payload(
            {"id": "good", "text": "paris is the capital of [MASK]."},
            {"id": "bad", "text": "[MASK] is the capital of [MASK]."},
        ),
    )
    assert response.status_code == 400
    body = response.json()
    assert body["failed_ids"] == ["bad"]
    assert "exactly one" in body["error"]


def test_zero_masks_rejected(client):
    response = client.post(
        "/v1/score", json=score_payload({"id": "bad", "text": "paris is the capital of france."})
    )
    assert response.status_code == 400
    assert response.json()["failed_ids"] == ["bad"]


def test_multi_subtoken_gold_flagged(client):
    # "madrid" tokenizes into ("mad", "##rid") in the tiny vocabulary
    response = client.post(
        "/v1/score",
        json=score_payload(
            {"id": "split", "text": "spain has the capital [MASK].", "gold_token": "madrid"}
        ),
    )
    assert response.status_code == 400
    body = response.json()
    assert body["failed_ids"] == ["split"]
    assert "2 vocabulary pieces" in body["error"]


def test_oov_gold_flagged(client):
    response = client.post(
        "/v1/score",
        json=score_payload(
            {"id": "oov", "text": "spain has the capital [MASK].", "gold_token": "zzzunknown"}
        ),
    )
    assert response.status_code == 400
    assert response.json()["failed_ids"] == ["oov"]


def test_unknown_model_rejected(client):
    response = client.post(
        "/v1/score",
        json=score_payload({"id": "a", "text": "x [MASK]."}, model="bert-base-cased"),
    )
    assert response.status_code == 400
    assert client.get("/v1/vocab", params={"model": "bert-base-cased"}).status_code == 404
    assert client.get("/v1/vocab", params={"model": "tiny-test"}).status_code == 200


def test_oversized_batch_rejected(client):
    entries = [{"id": f"r{i}", "text": "paris is [MASK]."} for i in range(17)]
    response = client.post("/v1/score", json=score_payload(*entries))
    assert response.status_code == 400
    assert "exceeds maximum" in response.json()["error"]


def test_vocab_export(client):
    tokens = client.get("/v1/vocab").json()["tokens"]
    assert "paris" in tokens and "france" in tokens
    assert "[MASK]" not in tokens and "[PAD]" not in tokens  # specials dropped
    assert "##rid" not in tokens  # continuation pieces dropped
    assert client.get("/v1/vocab").json()["tokens"] == tokens  # deterministic


def test_repeat_scoring_is_deterministic(client):
    payload = score_payload(
        {"id": "a", "text": "paris is the capital of [MASK].", "gold_token": "france"},
        {"id": "b", "text": "rome is located in [MASK].", "gold_token": "europe"},
    )
    first = client.post("/v1/score", json=payload).json()
    second = client.post("/v1/score", json=payload).json()
    assert first == second


def test_entropy_bounds_across_prompts(client):
    entries = [
        {"id": f"p{i}", "text": f"{subject} is located in [MASK]."}
        for i, subject in enumerate(["paris", "rome", "berlin", "tokyo"])
    ]
    response = client.post("/v1/score", json=score_payload(*entries))
    for result in response.json()["results"]:
        assert 0.0 <= result["entropy_bits"] <= math.log2(42)


def test_gold_rank_agrees_with_top_listing(client):
    response = client.post(
        "/v1/score",
        json=score_payload(
            {"id": "a", "text": "paris is the capital of [MASK].", "gold_token": "france", "top_k": 42}
        ),
    )
    (result,) = response.json()["results"]
    listed = [token for token, _ in result["top"]]
    assert result["gold_rank"] == listed.index("france") + 1
