"""Masked-LM scoring contract: wire-protocol client and deterministic mock.

Wire protocol (JSON over HTTP):

    POST /v1/score   {"model": str, "requests": [{"id", "text", "gold_token"?, "top_k"}]}
    200 -> {"results": [{"id", "top": [["token", prob], ...], "entropy_bits",
                         "gold_prob"?, "gold_rank"?}]}
    400 -> {"error": str, "failed_ids": [...]}      (batch rejected)
    503 -> retryable

    GET /v1/vocab -> {"tokens": [...]}
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import requests

from .errors import (
    BatchRejected,
    EndpointUnavailable,
    MalformedResponse,
    MaskCountError,
    OversizedBatch,
)
from .templating import MASK_TOKEN

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 10
DEFAULT_RANK_HORIZON = 100
DEFAULT_MAX_BATCH = 64

_TOP_SUM_SLACK = 1e-6


@dataclass(frozen=True)
class ScoreRequest:
    """One prompt to score. ``text`` must contain exactly one mask."""

    id: str
    text: str
    gold_token: Optional[str] = None
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if self.text.count(MASK_TOKEN) != 1:
            raise MaskCountError(f"request {self.id!r}: text must contain exactly one {MASK_TOKEN}")
        if self.top_k < 1:
            raise ValueError(f"request {self.id!r}: top_k must be >= 1")


@dataclass(frozen=True)
class ScoreResult:
    """A model's response to one prompt.

    ``top`` holds the k most probable tokens sorted by probability
    descending, ties broken lexicographically. ``entropy_bits`` is the
    Shannon entropy (base 2) of the full mask distribution. ``gold_prob``
    is present iff a gold token was supplied; ``gold_rank`` only when the
    gold token ranks within the service's horizon.
    """

    id: str
    top: tuple[tuple[str, float], ...]
    entropy_bits: float
    gold_prob: Optional[float] = None
    gold_rank: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "top", tuple((t, float(p)) for t, p in self.top))
        if not self.top:
            raise ValueError(f"result {self.id!r}: top must be non-empty")
        for token, prob in self.top:
            if not (0.0 < prob <= 1.0):
                raise ValueError(f"result {self.id!r}: top prob out of (0,1]: {token}={prob}")
        for (t1, p1), (t2, p2) in zip(self.top, self.top[1:]):
            if p1 < p2 or (p1 == p2 and t1 > t2):
                raise ValueError(f"result {self.id!r}: top not sorted by (prob desc, token asc)")
        if sum(p for _, p in self.top) > 1.0 + _TOP_SUM_SLACK:
            raise ValueError(f"result {self.id!r}: top probabilities exceed 1")
        if self.entropy_bits < 0:
            raise ValueError(f"result {self.id!r}: entropy must be non-negative")
        if self.gold_prob is not None and not (0.0 <= self.gold_prob <= 1.0):
            raise ValueError(f"result {self.id!r}: gold_prob out of [0,1]")
        if self.gold_rank is not None and self.gold_rank < 1:
            raise ValueError(f"result {self.id!r}: gold_rank must be >= 1")

    @property
    def top_token(self) -> str:
        return self.top[0][0]

    @property
    def top_prob(self) -> float:
        return self.top[0][1]

    def to_json(self) -> dict:
        payload: dict = {
            "id": self.id,
            "top": [[t, p] for t, p in self.top],
            "entropy_bits": self.entropy_bits,
        }
        if self.gold_prob is not None:
            payload["gold_prob"] = self.gold_prob
        if self.gold_rank is not None:
            payload["gold_rank"] = self.gold_rank
        return payload

    @classmethod
    def from_json(cls, payload: Mapping) -> "ScoreResult":
        return cls(
            id=payload["id"],
            top=tuple((t, float(p)) for t, p in payload["top"]),
            entropy_bits=float(payload["entropy_bits"]),
            gold_prob=payload.get("gold_prob"),
            gold_rank=payload.get("gold_rank"),
        )


def entropy_bits(probs: Iterable[float]) -> float:
    """Shannon entropy in bits; zero-probability entries contribute nothing."""
    total = 0.0
    for p in probs:
        if p > 0.0:
            total -= p * math.log2(p)
    return max(total, 0.0)


def result_from_distribution(
    request_id: str,
    distribution: Mapping[str, float],
    top_k: int = DEFAULT_TOP_K,
    gold_token: Optional[str] = None,
    rank_horizon: int = DEFAULT_RANK_HORIZON,
) -> ScoreResult:
    """Build a ScoreResult from a full token distribution.

    Used by the mock scorer and by oracle tests; applies the canonical
    ordering (prob descending, token ascending) for both top-k extraction
    and gold ranking.
    """
    ranked = sorted(distribution.items(), key=lambda kv: (-kv[1], kv[0]))
    top = tuple((t, p) for t, p in ranked if p > 0.0)[:top_k]

    gold_prob = None
    gold_rank = None
    if gold_token is not None:
        gold_prob = float(distribution.get(gold_token, 0.0))
        if gold_prob > 0.0:
            rank = 1 + sum(
                1 for t, p in distribution.items() if p > gold_prob or (p == gold_prob and t < gold_token)
            )
            if rank <= rank_horizon:
                gold_rank = rank

    return ScoreResult(
        id=request_id,
        top=top,
        entropy_bits=entropy_bits(distribution.values()),
        gold_prob=gold_prob,
        gold_rank=gold_rank,
    )


class MockScorer:
    """Deterministic in-process scorer for tests and dry runs.

    Table entries map prompt text to an explicit token distribution and are
    returned verbatim. Texts outside the table get a pseudo-distribution
    over ``vocab`` plus the gold token, seeded by a stable hash of the text,
    so identical request sequences replay bit-identically.
    """

    def __init__(
        self,
        table: Optional[Mapping[str, Mapping[str, float]]] = None,
        vocab: Optional[Sequence[str]] = None,
        rank_horizon: int = DEFAULT_RANK_HORIZON,
        gold_boost: float = 2.0,
    ):
        self.table = dict(table or {})
        self.vocab = tuple(vocab) if vocab is not None else tuple(f"word{i:03d}" for i in range(24))
        self.rank_horizon = rank_horizon
        # Dirichlet weight multiplier for the gold token; keeps a usable
        # fraction of gold tokens inside the top-10 on small vocabularies.
        self.gold_boost = gold_boost
        self.calls = 0

    def _pseudo_distribution(self, text: str, gold_token: Optional[str]) -> dict[str, float]:
        support = sorted(set(self.vocab) | ({gold_token} if gold_token else set()))
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        alpha = np.ones(len(support))
        if gold_token in support:
            alpha[support.index(gold_token)] = self.gold_boost
        probs = rng.dirichlet(alpha)
        return {token: float(p) for token, p in zip(support, probs)}

    def score(self, request: ScoreRequest) -> ScoreResult:
        self.calls += 1
        if request.text in self.table:
            distribution = dict(self.table[request.text])
            total = sum(distribution.values())
            if total > 1.0 + _TOP_SUM_SLACK:
                raise ValueError(f"table distribution for {request.text!r} sums to {total} > 1")
        else:
            distribution = self._pseudo_distribution(request.text, request.gold_token)
        return result_from_distribution(
            request.id,
            distribution,
            top_k=request.top_k,
            gold_token=request.gold_token,
            rank_horizon=self.rank_horizon,
        )

    def score_batch(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResult]:
        return [self.score(r) for r in requests_]

    def score_all(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResult]:
        return self.score_batch(requests_)


def mock_score(
    text: str,
    gold_token: Optional[str] = None,
    top_k: int = DEFAULT_TOP_K,
    table: Optional[Mapping[str, Mapping[str, float]]] = None,
) -> ScoreResult:
    """One-shot convenience wrapper around :class:`MockScorer`."""
    scorer = MockScorer(table=table)
    return scorer.score(ScoreRequest(id="mock", text=text, gold_token=gold_token, top_k=top_k))


class ScoringClient:
    """HTTP client for the scoring protocol.

    Retries transient failures (connection errors, 503) with exponential
    backoff; never returns partial batches. ``score_all`` chunks oversized
    request lists and may keep several batches in flight.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        max_batch: int = DEFAULT_MAX_BATCH,
        max_retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.max_batch = max_batch
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self.session = session or requests.Session()

    def _post_with_retries(self, payload: dict) -> requests.Response:
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self.session.post(
                    f"{self.endpoint}/v1/score", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code != 503:
                    return response
                last_error = EndpointUnavailable(f"503 from {self.endpoint}")
            if attempt < self.max_retries:
                time.sleep(self.backoff * (2**attempt))
        raise EndpointUnavailable(
            f"scoring endpoint {self.endpoint} unavailable after {self.max_retries + 1} attempts"
        ) from last_error

    def score_batch(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResult]:
        if len(requests_) > self.max_batch:
            raise OversizedBatch(f"batch of {len(requests_)} exceeds max {self.max_batch}")
        if not requests_:
            return []
        ids = [r.id for r in requests_]
        if len(set(ids)) != len(ids):
            raise ValueError("request ids within a batch must be unique")

        payload = {
            "model": self.model,
            "requests": [
                {
                    "id": r.id,
                    "text": r.text,
                    "top_k": r.top_k,
                    **({"gold_token": r.gold_token} if r.gold_token is not None else {}),
                }
                for r in requests_
            ],
        }
        response = self._post_with_retries(payload)
        if response.status_code == 400:
            try:
                body = response.json()
                failed = list(body.get("failed_ids", []))
                message = body.get("error", "batch rejected")
            except ValueError:
                raise MalformedResponse(f"400 with non-JSON body from {self.endpoint}")
            raise BatchRejected(message, failed)
        if response.status_code != 200:
            raise EndpointUnavailable(f"unexpected status {response.status_code} from {self.endpoint}")

        try:
            results = [ScoreResult.from_json(entry) for entry in response.json()["results"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"cannot parse score response: {exc}") from exc

        by_id = {r.id: r for r in results}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise MalformedResponse(f"response missing results for ids {missing}")
        return [by_id[i] for i in ids]

    def score_all(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResult]:
        chunks = [
            list(requests_[i : i + self.max_batch]) for i in range(0, len(requests_), self.max_batch)
        ]
        if len(chunks) <= 1:
            return self.score_batch(list(requests_))
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            per_chunk = list(pool.map(self.score_batch, chunks))
        merged = {r.id: r for results in per_chunk for r in results}
        return [merged[r.id] for r in requests_]

    def fetch_vocab(self) -> list[str]:
        try:
            response = self.session.get(f"{self.endpoint}/v1/vocab", timeout=self.timeout)
        except requests.RequestException as exc:
            raise EndpointUnavailable(f"vocab fetch failed: {exc}") from exc
        if response.status_code != 200:
            raise EndpointUnavailable(f"vocab fetch returned {response.status_code}")
        try:
            tokens = response.json()["tokens"]
        except (ValueError, KeyError) as exc:
            raise MalformedResponse(f"cannot parse vocab response: {exc}") from exc
        return list(tokens)
