"""Evaluation analyses: P@1, combinability bounds, consistency partitions,
and response-entropy aggregation over the known subset."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Optional, Sequence

from .core import PromptType, Strategy
from .errors import CoverageMismatch, EmptyGroup, TooManySets

_PROB_SLACK = 1e-9


@dataclass(frozen=True)
class EvaluationRecord:
    """One scored prompt joined with its gold outcome.

    ``correct`` must agree with the gold object the runner compared
    against; ``top_prob`` is the model's maximum token probability and can
    never be below ``gold_prob``.
    """

    triple_key: str
    prompt_type: PromptType
    strategy: Strategy
    predicted_token: str
    correct: bool
    gold_prob: float
    top_prob: float
    entropy_bits: float
    gold_rank: Optional[int] = None

    def __post_init__(self):
        if self.top_prob + _PROB_SLACK < self.gold_prob:
            raise ValueError(f"{self.triple_key}: top_prob {self.top_prob} < gold_prob {self.gold_prob}")
        if self.correct and abs(self.gold_prob - self.top_prob) > _PROB_SLACK:
            raise ValueError(f"{self.triple_key}: correct record must have gold_prob == top_prob")
        if self.entropy_bits < 0:
            raise ValueError(f"{self.triple_key}: entropy must be non-negative")
        if self.gold_rank is not None and self.gold_rank < 1:
            raise ValueError(f"{self.triple_key}: gold_rank must be >= 1")

    def to_json(self) -> dict:
        payload = {
            "triple_key": self.triple_key,
            "prompt_type": self.prompt_type.value,
            "strategy": self.strategy.value,
            "predicted_token": self.predicted_token,
            "correct": self.correct,
            "gold_prob": self.gold_prob,
            "top_prob": self.top_prob,
            "entropy_bits": self.entropy_bits,
        }
        if self.gold_rank is not None:
            payload["gold_rank"] = self.gold_rank
        return payload

    @classmethod
    def from_json(cls, payload: Mapping) -> "EvaluationRecord":
        return cls(
            triple_key=payload["triple_key"],
            prompt_type=PromptType(payload["prompt_type"]),
            strategy=Strategy(payload["strategy"]),
            predicted_token=payload["predicted_token"],
            correct=bool(payload["correct"]),
            gold_prob=float(payload["gold_prob"]),
            top_prob=float(payload["top_prob"]),
            entropy_bits=float(payload["entropy_bits"]),
            gold_rank=payload.get("gold_rank"),
        )


def write_records(records: Iterable[EvaluationRecord], path, header: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"kind": "provenance", **header}) + "\n")
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def read_records(path, tolerate_partial_tail: bool = False) -> tuple[Optional[dict], list[EvaluationRecord]]:
    """Returns (provenance header or None, records).

    With ``tolerate_partial_tail`` a truncated final line (interrupted
    write) is dropped instead of raising; anything after it is ignored.
    """
    header = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except ValueError:
                if tolerate_partial_tail:
                    break
                raise
            if i == 0 and payload.get("kind") == "provenance":
                header = payload
                continue
            records.append(EvaluationRecord.from_json(payload))
    return header, records


# --- P@1 --------------------------------------------------------------------


def p_at_1(
    records: Sequence[EvaluationRecord],
    group_by: Callable[[EvaluationRecord], Hashable] = lambda r: "all",
) -> dict[Hashable, float]:
    """Fraction of correct records per group. Empty input is an error, not
    a NaN."""
    if not records:
        raise EmptyGroup("p_at_1 called with no records")
    counts: dict[Hashable, list[int]] = {}
    for record in records:
        key = group_by(record)
        bucket = counts.setdefault(key, [0, 0])
        bucket[0] += int(record.correct)
        bucket[1] += 1
    return {key: hits / total for key, (hits, total) in counts.items()}


# --- known subset -------------------------------------------------------------


def known_subset(simple_records: Sequence[EvaluationRecord], k: int = 10) -> set[str]:
    """Triples whose simple-prompt gold rank is within the top k. Records
    with no rank (gold beyond the service's horizon) count as not known."""
    return {
        r.triple_key
        for r in simple_records
        if r.gold_rank is not None and r.gold_rank <= k
    }


# --- combinability bounds -----------------------------------------------------


@dataclass(frozen=True)
class BoundsCell:
    lower_correct: bool
    upper_correct: bool
    lower_from: PromptType
    upper_from: PromptType


def combinability_bounds(
    domain_records: Sequence[EvaluationRecord],
    range_records: Sequence[EvaluationRecord],
) -> dict[str, BoundsCell]:
    """Per-triple performance interval over the two single-information
    prompts.

    The lower bound answers with the more confident prompt (larger
    top_prob); the upper bound answers with the prompt that gives the gold
    token more probability. Ties pick the domain-information record.
    """
    domain_by_key = {r.triple_key: r for r in domain_records}
    range_by_key = {r.triple_key: r for r in range_records}
    if set(domain_by_key) != set(range_by_key):
        only_domain = sorted(set(domain_by_key) - set(range_by_key))[:5]
        only_range = sorted(set(range_by_key) - set(domain_by_key))[:5]
        raise CoverageMismatch(
            f"record sets cover different triples (only-domain: {only_domain}, only-range: {only_range})"
        )

    out = {}
    for key, dom in domain_by_key.items():
        rng = range_by_key[key]
        lower = dom if dom.top_prob >= rng.top_prob else rng
        upper = dom if dom.gold_prob >= rng.gold_prob else rng
        out[key] = BoundsCell(
            lower_correct=lower.correct,
            upper_correct=upper.correct,
            lower_from=lower.prompt_type,
            upper_from=upper.prompt_type,
        )
    return out


# --- consistency partition ----------------------------------------------------


@dataclass(frozen=True)
class PartitionCell:
    membership: int  # bitmask over set_names; bit i = member of set_names[i]
    triples: frozenset[str]

    @property
    def size(self) -> int:
        return len(self.triples)


@dataclass(frozen=True)
class ConsistencyPartition:
    set_names: tuple[str, ...]
    cells: tuple[PartitionCell, ...]
    totals: dict[str, int]

    def members_of(self, cell: PartitionCell) -> tuple[str, ...]:
        return tuple(
            name for i, name in enumerate(self.set_names) if cell.membership & (1 << i)
        )

    def to_json(self) -> dict:
        return {
            "set_names": list(self.set_names),
            "totals": dict(self.totals),
            "cells": [
                {
                    "membership": list(self.members_of(cell)),
                    "size": cell.size,
                    "triples": sorted(cell.triples),
                }
                for cell in self.cells
            ],
        }


def consistency_partition(correct_sets: Mapping[str, set[str]]) -> ConsistencyPartition:
    """Exact disjoint decomposition of 2 to 8 named sets into membership
    cells (the supervenn columns). Empty cells are omitted; cells are
    ordered by descending size, then ascending bitmask."""
    if not 2 <= len(correct_sets) <= 8:
        raise TooManySets(f"consistency partition supports 2..8 sets, got {len(correct_sets)}")
    set_names = tuple(correct_sets.keys())
    sets = [set(correct_sets[name]) for name in set_names]

    universe = set().union(*sets)
    cell_members: dict[int, set[str]] = {}
    for key in universe:
        mask = 0
        for i, members in enumerate(sets):
            if key in members:
                mask |= 1 << i
        cell_members.setdefault(mask, set()).add(key)

    cells = tuple(
        PartitionCell(membership=mask, triples=frozenset(members))
        for mask, members in sorted(cell_members.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    )
    totals = {name: len(members) for name, members in zip(set_names, sets)}
    return ConsistencyPartition(set_names=set_names, cells=cells, totals=totals)


# --- entropy aggregation --------------------------------------------------------


def mean_entropy(
    records: Sequence[EvaluationRecord],
    known: set[str],
    group_by: Callable[[EvaluationRecord], Hashable] = lambda r: (r.prompt_type, r.strategy),
) -> dict[Hashable, float]:
    """Arithmetic mean of entropy_bits per group, restricted to triples in
    the known subset."""
    sums: dict[Hashable, list[float]] = {}
    for record in records:
        if record.triple_key not in known:
            continue
        key = group_by(record)
        bucket = sums.setdefault(key, [0.0, 0])
        bucket[0] += record.entropy_bits
        bucket[1] += 1
    if not sums:
        raise EmptyGroup("no records fall inside the known subset")
    return {key: total / count for key, (total, count) in sums.items()}
