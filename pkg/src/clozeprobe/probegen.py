"""Probe construction: full prompt expansion plus the two completion
strategies that pick supplementary type labels per triple.

Quality completion maximizes the probability of the gold token; confidence
completion maximizes the probability of the model's top token, gold-agnostic.
Both select per (slot, syntax) independently; the combined prompt reuses the
two winners without re-selection.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

from .core import (
    InfoContent,
    KnowledgeTriple,
    PromptType,
    RelationSpec,
    Strategy,
    SyntaxFamily,
    prompt_type_for,
)
from .errors import EmptyCandidates, SyntaxMismatch
from .scoring import ScoreRequest, ScoreResult
from .templating import PromptInstance, render, render_family

log = logging.getLogger(__name__)


class Slot(str, Enum):
    DOMAIN = "domain"
    RANGE = "range"


class Scorer(Protocol):
    def score_batch(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResult]: ...


@dataclass(frozen=True)
class CompletionChoice:
    """Outcome of one completion-strategy run for a (triple, slot, syntax).

    ``all_scores`` keeps every candidate's criterion value for auditing;
    ``winning_result`` is the full score of the chosen candidate's prompt.
    """

    triple_key: str
    strategy: Strategy
    slot: Slot
    syntax: SyntaxFamily
    chosen_type: str
    score_used: float
    all_scores: Mapping[str, float]
    winning_result: ScoreResult

    def __post_init__(self):
        if self.chosen_type not in self.all_scores:
            raise ValueError("chosen_type must appear in all_scores")
        if self.score_used != max(self.all_scores.values()):
            raise ValueError("score_used must be the maximum criterion value")


def single_info_prompt_type(slot: Slot, syntax: SyntaxFamily) -> PromptType:
    """Prompt type carrying exactly one kind of supplementary information."""
    info = InfoContent.DOMAIN if slot is Slot.DOMAIN else InfoContent.RANGE
    return prompt_type_for(syntax, info)


def combined_prompt_type(syntax: SyntaxFamily) -> PromptType:
    return prompt_type_for(syntax, InfoContent.BOTH)


def candidate_prompts(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    slot: Slot,
    syntax: SyntaxFamily,
    candidates: Optional[Sequence[str]] = None,
    appositive_range_style: str = "pre",
) -> list[tuple[str, PromptInstance]]:
    if candidates is None:
        candidates = spec.domain_types if slot is Slot.DOMAIN else spec.range_types
    if not candidates:
        raise EmptyCandidates(f"no {slot.value} candidates for relation {spec.relation_id}")
    prompt_type = single_info_prompt_type(slot, syntax)
    out = []
    for candidate in candidates:
        kwargs = {"domain_type": candidate} if slot is Slot.DOMAIN else {"range_type": candidate}
        out.append(
            (candidate, render(triple, spec, prompt_type, appositive_range_style=appositive_range_style, **kwargs))
        )
    return out


def score_candidates(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    slot: Slot,
    syntax: SyntaxFamily,
    scorer: Scorer,
    with_gold: bool = True,
    top_k: int = 10,
    appositive_range_style: str = "pre",
) -> list[tuple[str, ScoreResult]]:
    """Render and score one prompt per candidate type, keeping candidate order."""
    pairs = candidate_prompts(triple, spec, slot, syntax, appositive_range_style=appositive_range_style)
    requests_ = [
        ScoreRequest(
            id=f"{triple.key}#{slot.value}#{syntax.value}#{i}",
            text=prompt.text,
            gold_token=triple.object if with_gold else None,
            top_k=top_k,
        )
        for i, (_, prompt) in enumerate(pairs)
    ]
    results = scorer.score_batch(requests_)
    return [(candidate, result) for (candidate, _), result in zip(pairs, results)]


def _criterion(strategy: Strategy, result: ScoreResult) -> float:
    if strategy is Strategy.QUALITY:
        if result.gold_prob is None:
            raise ValueError("quality completion needs gold-token scores")
        return result.gold_prob
    if strategy is Strategy.CONFIDENCE:
        return result.top_prob
    raise ValueError(f"not a selectable strategy: {strategy}")


def select_choice(
    triple: KnowledgeTriple,
    slot: Slot,
    syntax: SyntaxFamily,
    strategy: Strategy,
    scored: Sequence[tuple[str, ScoreResult]],
) -> CompletionChoice:
    """Argmax of the strategy criterion over scored candidates; ties go to
    the earliest candidate in constraint order."""
    if not scored:
        raise EmptyCandidates(f"no scored candidates for {triple.key}")
    all_scores = {candidate: _criterion(strategy, result) for candidate, result in scored}
    best_candidate, best_result = scored[0]
    best_score = all_scores[best_candidate]
    for candidate, result in scored[1:]:
        score = all_scores[candidate]
        if score > best_score:
            best_candidate, best_result, best_score = candidate, result, score
    return CompletionChoice(
        triple_key=triple.key,
        strategy=strategy,
        slot=slot,
        syntax=syntax,
        chosen_type=best_candidate,
        score_used=best_score,
        all_scores=all_scores,
        winning_result=best_result,
    )


def quality_completion(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    slot: Slot,
    syntax: SyntaxFamily,
    scorer: Scorer,
    top_k: int = 10,
    appositive_range_style: str = "pre",
) -> CompletionChoice:
    """Pick the type label whose prompt gives the gold token the highest
    probability."""
    scored = score_candidates(
        triple, spec, slot, syntax, scorer, with_gold=True, top_k=top_k,
        appositive_range_style=appositive_range_style,
    )
    return select_choice(triple, slot, syntax, Strategy.QUALITY, scored)


def confidence_completion(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    slot: Slot,
    syntax: SyntaxFamily,
    scorer: Scorer,
    top_k: int = 10,
    appositive_range_style: str = "pre",
) -> CompletionChoice:
    """Pick the type label whose prompt makes the model most confident in
    any token; no gold token is sent."""
    scored = score_candidates(
        triple, spec, slot, syntax, scorer, with_gold=False, top_k=top_k,
        appositive_range_style=appositive_range_style,
    )
    return select_choice(triple, slot, syntax, Strategy.CONFIDENCE, scored)


def build_combined(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    syntax: SyntaxFamily,
    domain_choice: CompletionChoice,
    range_choice: CompletionChoice,
    appositive_range_style: str = "pre",
) -> PromptInstance:
    """Render the both-slots prompt from two already-made choices.

    Performs no scoring and no re-selection; choices must belong to the
    same triple and syntax family.
    """
    for choice, slot in ((domain_choice, Slot.DOMAIN), (range_choice, Slot.RANGE)):
        if choice.syntax is not syntax:
            raise SyntaxMismatch(f"{slot.value} choice was made for {choice.syntax.value}, not {syntax.value}")
        if choice.slot is not slot:
            raise SyntaxMismatch(f"expected a {slot.value} choice, got {choice.slot.value}")
        if choice.triple_key != triple.key:
            raise SyntaxMismatch(f"{slot.value} choice belongs to {choice.triple_key}, not {triple.key}")
    return render(
        triple,
        spec,
        combined_prompt_type(syntax),
        domain_type=domain_choice.chosen_type,
        range_type=range_choice.chosen_type,
        appositive_range_style=appositive_range_style,
    )


# --- full probe expansion ---------------------------------------------------


class ShardedJsonlSink:
    """Streams JSON objects into numbered JSONL shards capped at
    ``max_lines`` lines each."""

    def __init__(self, directory: str | Path, prefix: str = "probe", max_lines: int = 1_000_000):
        if max_lines < 1:
            raise ValueError("max_lines must be >= 1")
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.prefix = prefix
        self.max_lines = max_lines
        self.shard_names: list[str] = []
        self._fh = None
        self._lines_in_shard = 0
        self.total_lines = 0

    def _open_next_shard(self):
        if self._fh is not None:
            self._fh.close()
        name = f"{self.prefix}-{len(self.shard_names):05d}.jsonl"
        self.shard_names.append(name)
        self._fh = open(self.directory / name, "w", encoding="utf-8")
        self._lines_in_shard = 0

    def write(self, obj: dict) -> None:
        if self._fh is None or self._lines_in_shard >= self.max_lines:
            self._open_next_shard()
        self._fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
        self._lines_in_shard += 1
        self.total_lines += 1

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def prompt_to_shard_line(prompt: PromptInstance) -> dict:
    line = {
        "triple_key": prompt.triple_key,
        "prompt_type": prompt.prompt_type.value,
        "text": prompt.text,
    }
    if prompt.domain_type_used is not None:
        line["domain_type"] = prompt.domain_type_used
    if prompt.range_type_used is not None:
        line["range_type"] = prompt.range_type_used
    return line


def build_probe(
    triples: Sequence[KnowledgeTriple],
    specs: Mapping[str, RelationSpec],
    sink: ShardedJsonlSink,
    appositive_range_style: str = "pre",
) -> dict:
    """Stream the full expansion of every triple to the sink and return a
    manifest with per-relation and per-prompt-type counts. Prompts are never
    materialized in memory beyond one family."""
    per_relation: dict[str, int] = {}
    per_type: dict[str, int] = {}
    for triple in triples:
        spec = specs.get(triple.relation_id)
        if spec is None:
            raise KeyError(f"no relation spec for {triple.relation_id}")
        # One family at a time; a family is small (1 + 2|D| + 2|R| + 2|D||R|).
        for prompt in render_family(triple, spec, appositive_range_style=appositive_range_style):
            sink.write(prompt_to_shard_line(prompt))
            per_relation[triple.relation_id] = per_relation.get(triple.relation_id, 0) + 1
            per_type[prompt.prompt_type.value] = per_type.get(prompt.prompt_type.value, 0) + 1
    sink.close()
    return {
        "total_prompts": sink.total_lines,
        "per_relation": dict(sorted(per_relation.items())),
        "per_type": dict(sorted(per_type.items())),
        "shards": list(sink.shard_names),
    }
