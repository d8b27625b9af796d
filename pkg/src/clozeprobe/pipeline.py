"""Run orchestration behind the CLI: staged probe building, evaluation with
checkpoint/resume, and analysis artifact emission.

Every artifact carries a provenance header (config hash, constraint file
hash, model name). Given the mock scorer and fixed inputs the whole
pipeline is byte-reproducible; the output directory is deliberately kept
out of the config hash so reruns in fresh directories compare equal.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .constraints import ConstraintCache, RelationConfig, load_relation_configs
from .core import (
    Corpus,
    InfoContent,
    KnowledgeTriple,
    PromptType,
    RelationSpec,
    Strategy,
    SyntaxFamily,
    TypeConstraintSet,
    prompt_type_for,
)
from .corpus import compute_stats, filter_by_vocab, load_triples, load_vocab, stats_to_csv
from .errors import ConfigError, CoverageMismatch, StageMismatch
from .metrics import (
    EvaluationRecord,
    combinability_bounds,
    consistency_partition,
    known_subset,
    mean_entropy,
    p_at_1,
    read_records,
)
from .probegen import (
    ShardedJsonlSink,
    Slot,
    build_combined,
    build_probe,
    candidate_prompts,
    select_choice,
)
from .scoring import MockScorer, ScoreRequest, ScoreResult, ScoringClient
from .templating import render

log = logging.getLogger(__name__)

STRATEGIES = (Strategy.QUALITY, Strategy.CONFIDENCE)
SYNTAXES = (SyntaxFamily.CLAUSAL, SyntaxFamily.APPOSITIVE)


@dataclass
class RunConfig:
    """Everything an experiment run depends on, loadable from JSON.

    Relative paths are resolved against the config file's directory at load
    time; the hash is taken over the raw (unresolved) document so runs from
    different working directories compare equal.
    """

    corpus_path: str
    corpus_kind: Corpus
    relations_path: str
    constraints_path: str
    vocab_paths: list[str] = field(default_factory=list)
    scorer_kind: str = "mock"  # "mock" | "http"
    endpoint: Optional[str] = None
    model: str = "mock"
    top_k: int = 10
    known_k: int = 10
    max_batch: int = 64
    max_in_flight: int = 4
    eval_batch_triples: int = 16
    strategies: tuple[Strategy, ...] = STRATEGIES
    syntaxes: tuple[SyntaxFamily, ...] = SYNTAXES
    shard_size: int = 1_000_000
    appositive_range_style: str = "pre"
    seed: int = 1234
    field_map: Optional[dict] = None
    config_hash: str = ""

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read run config {path}: {exc}") from exc

        digest = hashlib.sha256(
            json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).hexdigest()[:16]

        base = path.parent

        def resolve(p: str) -> str:
            return str((base / p) if not Path(p).is_absolute() else Path(p))

        scorer = raw.get("scorer", {})
        try:
            cfg = cls(
                corpus_path=resolve(raw["corpus"]["path"]),
                corpus_kind=Corpus(raw["corpus"]["kind"]),
                field_map=raw["corpus"].get("field_map"),
                relations_path=resolve(raw["relations_path"]),
                constraints_path=resolve(raw["constraints_path"]),
                vocab_paths=[resolve(p) for p in raw.get("vocab_paths", [])],
                scorer_kind=scorer.get("kind", "mock"),
                endpoint=scorer.get("endpoint"),
                model=scorer.get("model", "mock"),
                top_k=int(scorer.get("top_k", 10)),
                max_batch=int(scorer.get("max_batch", 64)),
                max_in_flight=int(scorer.get("max_in_flight", 4)),
                known_k=int(raw.get("known_k", 10)),
                eval_batch_triples=int(raw.get("eval_batch_triples", 16)),
                strategies=tuple(Strategy(s) for s in raw.get("strategies", ["quality", "confidence"])),
                syntaxes=tuple(SyntaxFamily(s) for s in raw.get("syntaxes", ["clausal", "appositive"])),
                shard_size=int(raw.get("shard_size", 1_000_000)),
                appositive_range_style=raw.get("appositive_range_style", "pre"),
                seed=int(raw.get("seed", 1234)),
                config_hash=digest,
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid run config {path}: {exc}") from exc

        for required in [cfg.corpus_path, cfg.relations_path, cfg.constraints_path, *cfg.vocab_paths]:
            if not Path(required).exists():
                raise ConfigError(f"run config references missing path: {required}")
        if cfg.scorer_kind not in ("mock", "http"):
            raise ConfigError(f"unknown scorer kind {cfg.scorer_kind!r}")
        if cfg.scorer_kind == "http" and not cfg.endpoint:
            raise ConfigError("http scorer requires an endpoint")
        if cfg.appositive_range_style not in ("pre", "post"):
            raise ConfigError("appositive_range_style must be 'pre' or 'post'")
        if not cfg.strategies or not cfg.syntaxes:
            raise ConfigError("strategies and syntaxes must be non-empty")
        return cfg

    def override_appositive_range(self, style: str) -> None:
        """CLI-level override; folded into the config hash because it changes
        the rendered surface grammar and therefore the experiment identity."""
        if style == self.appositive_range_style:
            return
        if style not in ("pre", "post"):
            raise ConfigError("appositive range style must be 'pre' or 'post'")
        self.appositive_range_style = style
        self.config_hash = hashlib.sha256(
            f"{self.config_hash}:appositive-range={style}".encode("utf-8")
        ).hexdigest()[:16]

    def make_scorer(self):
        if self.scorer_kind == "mock":
            return MockScorer()
        return ScoringClient(
            self.endpoint,
            model=self.model,
            max_batch=self.max_batch,
            max_in_flight=self.max_in_flight,
        )


def provenance(cfg: RunConfig) -> dict:
    cache_digest = hashlib.sha256(Path(cfg.constraints_path).read_bytes()).hexdigest()[:16]
    return {
        "config_hash": cfg.config_hash,
        "constraints_hash": cache_digest,
        "model": cfg.model,
    }


def provenance_comment_lines(cfg: RunConfig) -> list[str]:
    head = provenance(cfg)
    return [f"{key}={value}" for key, value in head.items()]


# --- shared input loading ------------------------------------------------------


def specs_from_constraints(
    relations: Sequence[RelationConfig],
    constraints: Mapping[str, TypeConstraintSet],
) -> dict[str, RelationSpec]:
    """Join relation verbalizations with resolved constraint labels.

    Labels are deduplicated case-folded (distinct knowledge-base classes may
    share an English label) so the RelationSpec uniqueness invariant holds.
    """
    specs = {}
    for relation in relations:
        cset = constraints.get(relation.relation_id)
        if cset is None:
            continue

        def unique_labels(entries):
            seen, out = set(), []
            for entry in entries:
                folded = entry.label.casefold()
                if folded not in seen:
                    seen.add(folded)
                    out.append(entry.label)
            return tuple(out)

        specs[relation.relation_id] = RelationSpec(
            relation_id=relation.relation_id,
            relation_text=relation.relation_text,
            domain_types=unique_labels(cset.domain),
            range_types=unique_labels(cset.range),
            manual_fallback=cset.manual_fallback,
        )
    return specs


@dataclass
class RunInputs:
    relations: list[RelationConfig]
    constraints: dict[str, TypeConstraintSet]  # keyed by relation_id
    specs: dict[str, RelationSpec]
    triples: list[KnowledgeTriple]  # vocabulary-filtered
    dropped: list[KnowledgeTriple]


def load_inputs(cfg: RunConfig) -> RunInputs:
    relations = load_relation_configs(cfg.relations_path)
    cache = ConstraintCache(cfg.constraints_path)
    constraints: dict[str, TypeConstraintSet] = {}
    for relation in relations:
        cset = cache.get(relation.property_id)
        if cset is not None:
            constraints[relation.relation_id] = cset

    grouping_map = {r.relation_id: r.grouping for r in relations if r.grouping is not None}
    from .corpus import FieldMap

    fmap = FieldMap(**cfg.field_map) if cfg.field_map else None
    loaded = load_triples(cfg.corpus_path, cfg.corpus_kind, field_map=fmap, grouping_by_relation=grouping_map)
    for error in loaded.errors:
        log.warning("%s:%d: %s", cfg.corpus_path, error.line_no, error.reason)

    known_relations = [t for t in loaded.triples if t.relation_id in constraints]
    skipped = len(loaded.triples) - len(known_relations)
    if skipped:
        log.warning("%d triples reference relations without constraints; skipped", skipped)

    if cfg.vocab_paths:
        vocabularies = [load_vocab(p) for p in cfg.vocab_paths]
        kept, dropped = filter_by_vocab(known_relations, vocabularies)
    else:
        kept, dropped = known_relations, []
    return RunInputs(
        relations=relations,
        constraints=constraints,
        specs=specs_from_constraints(relations, constraints),
        triples=kept,
        dropped=dropped,
    )


# --- stage: build-probe ----------------------------------------------------------


def run_build_probe(cfg: RunConfig, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    inputs = load_inputs(cfg)
    sink = ShardedJsonlSink(out_dir / "probe", max_lines=cfg.shard_size)
    manifest = build_probe(
        inputs.triples, inputs.specs, sink, appositive_range_style=cfg.appositive_range_style
    )
    manifest = {
        "provenance": provenance(cfg),
        "n_triples": len(inputs.triples),
        "n_dropped_by_vocab": len(inputs.dropped),
        **manifest,
    }
    manifest_path = out_dir / "probe" / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


# --- stage: run-eval ----------------------------------------------------------------


class CheckpointedScorer:
    """Score cache with scorer-batch checkpoint granularity.

    Every finished scorer batch is appended to ``scores.jsonl`` and flushed,
    so an interrupted run never re-scores a completed batch even when the
    surrounding triple's records were not written yet. Request ids are
    content-stable across runs, which makes cache hits safe.
    """

    def __init__(self, scorer, path: Path, cfg: RunConfig):
        self.scorer = scorer
        self.path = path
        self.max_batch = cfg.max_batch
        self._cfg = cfg
        self._fh = None
        self._cache: dict[str, ScoreResult] = {}
        self._needs_header = True

        if path.exists():
            raw = path.read_bytes()
            valid_bytes = 0
            for i, line in enumerate(raw.splitlines(keepends=True)):
                if not line.endswith(b"\n"):
                    break  # interrupted final write
                try:
                    payload = json.loads(line.decode("utf-8"))
                    if i == 0:
                        if payload.get("kind") != "provenance":
                            break
                        if payload.get("config_hash") != cfg.config_hash:
                            raise StageMismatch(
                                f"{path} belongs to a different run config; use a fresh output directory"
                            )
                        self._needs_header = False
                    else:
                        result = ScoreResult.from_json(payload)
                        self._cache[result.id] = result
                except (ValueError, KeyError, TypeError):
                    break
                valid_bytes += len(line)
            if valid_bytes < len(raw):
                log.warning("truncating %s to the last intact line", path)
                with open(path, "r+b") as fh:
                    fh.truncate(valid_bytes)
                if valid_bytes == 0:
                    self._needs_header = True
                    self._cache.clear()

    def _writer(self):
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8")
            if self._needs_header:
                self._fh.write(json.dumps({"kind": "provenance", **provenance(self._cfg)}) + "\n")
                self._fh.flush()
                self._needs_header = False
        return self._fh

    def score_all(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResult]:
        pending = [r for r in requests_ if r.id not in self._cache]
        # dispatch one in-flight window at a time so the underlying client
        # can still parallelize batches; checkpoint after each window
        window = self.max_batch * max(1, self._cfg.max_in_flight)
        for start in range(0, len(pending), window):
            chunk = pending[start : start + window]
            results = self.scorer.score_all(chunk)
            fh = self._writer()
            for result in results:
                self._cache[result.id] = result
                fh.write(json.dumps(result.to_json(), ensure_ascii=False) + "\n")
            fh.flush()
        return [self._cache[r.id] for r in requests_]

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def _records_per_triple(cfg: RunConfig) -> int:
    return 1 + 3 * len(cfg.syntaxes) * len(cfg.strategies)


def _load_checkpoint(cfg: RunConfig, records_path: Path) -> dict[str, list[EvaluationRecord]]:
    """Records of fully evaluated triples from an interrupted run, keyed by
    triple. Partial groups (crash mid-write) are discarded."""
    if not records_path.exists():
        return {}
    header, records = read_records(records_path, tolerate_partial_tail=True)
    if header is None or header.get("config_hash") != cfg.config_hash:
        raise StageMismatch(
            f"{records_path} was produced by a different run config; "
            "delete it or point the run at a fresh output directory"
        )
    by_triple: dict[str, list[EvaluationRecord]] = {}
    for record in records:
        by_triple.setdefault(record.triple_key, []).append(record)
    expected = _records_per_triple(cfg)
    return {key: group for key, group in by_triple.items() if len(group) == expected}


def _evaluate_batch(
    cfg: RunConfig,
    batch: Sequence[KnowledgeTriple],
    specs: Mapping[str, RelationSpec],
    scorer,
) -> list[EvaluationRecord]:
    """Score one batch of triples: one simple prompt each, every completion
    candidate per (slot, syntax), then the combined prompts the selected
    types induce."""
    style = cfg.appositive_range_style

    requests: list[ScoreRequest] = []
    candidate_index: dict[tuple[str, SyntaxFamily, Slot], list[tuple[str, str]]] = {}

    for triple in batch:
        spec = specs[triple.relation_id]
        requests.append(
            ScoreRequest(
                id=f"{triple.key}#simple",
                text=render(triple, spec, PromptType.SIMPLE).text,
                gold_token=triple.object,
                top_k=cfg.top_k,
            )
        )
        for syntax in cfg.syntaxes:
            for slot in (Slot.DOMAIN, Slot.RANGE):
                pairs = candidate_prompts(triple, spec, slot, syntax, appositive_range_style=style)
                ids = []
                for i, (candidate, prompt) in enumerate(pairs):
                    request_id = f"{triple.key}#{slot.value}#{syntax.value}#{i}"
                    requests.append(
                        ScoreRequest(
                            id=request_id, text=prompt.text, gold_token=triple.object, top_k=cfg.top_k
                        )
                    )
                    ids.append((candidate, request_id))
                candidate_index[(triple.key, syntax, slot)] = ids

    results = {r.id: r for r in scorer.score_all(requests)}

    # Select per (syntax, strategy); build the combined prompts they induce.
    choices: dict[tuple[str, SyntaxFamily, Strategy, Slot], object] = {}
    combined_requests: list[ScoreRequest] = []
    combined_ids: dict[tuple[str, SyntaxFamily, Strategy], str] = {}
    # dedup scoped per triple: other triples may render the same text but
    # carry a different gold token
    seen_combined_texts: dict[tuple[str, str], str] = {}
    for triple in batch:
        spec = specs[triple.relation_id]
        for syntax in cfg.syntaxes:
            scored_by_slot = {
                slot: [
                    (candidate, results[request_id])
                    for candidate, request_id in candidate_index[(triple.key, syntax, slot)]
                ]
                for slot in (Slot.DOMAIN, Slot.RANGE)
            }
            for strategy in cfg.strategies:
                domain_choice = select_choice(triple, Slot.DOMAIN, syntax, strategy, scored_by_slot[Slot.DOMAIN])
                range_choice = select_choice(triple, Slot.RANGE, syntax, strategy, scored_by_slot[Slot.RANGE])
                choices[(triple.key, syntax, strategy, Slot.DOMAIN)] = domain_choice
                choices[(triple.key, syntax, strategy, Slot.RANGE)] = range_choice
                combined = build_combined(
                    triple, spec, syntax, domain_choice, range_choice, appositive_range_style=style
                )
                # identical selections across strategies yield identical
                # combined prompts; score each distinct text once per triple
                dedup_key = (triple.key, combined.text)
                if dedup_key in seen_combined_texts:
                    combined_ids[(triple.key, syntax, strategy)] = seen_combined_texts[dedup_key]
                else:
                    request_id = f"{triple.key}#combined#{syntax.value}#{strategy.value}"
                    combined_requests.append(
                        ScoreRequest(
                            id=request_id, text=combined.text, gold_token=triple.object, top_k=cfg.top_k
                        )
                    )
                    seen_combined_texts[dedup_key] = request_id
                    combined_ids[(triple.key, syntax, strategy)] = request_id

    results.update({r.id: r for r in scorer.score_all(combined_requests)})

    def to_record(triple: KnowledgeTriple, prompt_type: PromptType, strategy: Strategy, result) -> EvaluationRecord:
        return EvaluationRecord(
            triple_key=triple.key,
            prompt_type=prompt_type,
            strategy=strategy,
            predicted_token=result.top_token,
            correct=result.top_token == triple.object,
            gold_prob=result.gold_prob,
            top_prob=result.top_prob,
            entropy_bits=result.entropy_bits,
            gold_rank=result.gold_rank,
        )

    records = []
    for triple in batch:
        records.append(to_record(triple, PromptType.SIMPLE, Strategy.NOT_APPLICABLE, results[f"{triple.key}#simple"]))
        for syntax in cfg.syntaxes:
            for strategy in cfg.strategies:
                for slot in (Slot.DOMAIN, Slot.RANGE):
                    choice = choices[(triple.key, syntax, strategy, slot)]
                    info = InfoContent.DOMAIN if slot is Slot.DOMAIN else InfoContent.RANGE
                    records.append(
                        to_record(triple, prompt_type_for(syntax, info), strategy, choice.winning_result)
                    )
                combined_result = results[combined_ids[(triple.key, syntax, strategy)]]
                records.append(
                    to_record(triple, prompt_type_for(syntax, InfoContent.BOTH), strategy, combined_result)
                )
    return records


def run_eval(cfg: RunConfig, out_dir: str | Path, stop_after_triples: Optional[int] = None) -> Path:
    """Produce the EvaluationRecord JSONL. Resumable: finished triples are
    never re-scored; partially written triples are discarded and redone."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"

    manifest_path = out_dir / "probe" / "manifest.json"
    if manifest_path.exists():
        manifest_head = json.loads(manifest_path.read_text(encoding="utf-8")).get("provenance", {})
        if manifest_head.get("config_hash") != cfg.config_hash:
            raise StageMismatch(
                f"{manifest_path} was built from a different config (check --appositive-range "
                "and the config file); use a fresh output directory"
            )

    inputs = load_inputs(cfg)
    scorer = CheckpointedScorer(cfg.make_scorer(), out_dir / "scores.jsonl", cfg)
    done = _load_checkpoint(cfg, records_path)

    pending = [t for t in inputs.triples if t.key not in done]
    log.info("evaluating %d triples (%d already done)", len(pending), len(done))

    # Rewrite in canonical triple order: completed groups verbatim, pending
    # groups as they finish; flush after every scorer batch.
    with open(records_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "provenance", **provenance(cfg)}) + "\n")
        for triple in inputs.triples:
            if triple.key in done:
                for record in done[triple.key]:
                    fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
        fh.flush()

        evaluated = 0
        batch_size = max(1, cfg.eval_batch_triples)
        for start in range(0, len(pending), batch_size):
            if stop_after_triples is not None and evaluated >= stop_after_triples:
                log.info("stopping early after %d freshly evaluated triples", evaluated)
                break
            batch = pending[start : start + batch_size]
            for record in _evaluate_batch(cfg, batch, inputs.specs, scorer):
                fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
            fh.flush()
            evaluated += len(batch)
    scorer.close()
    return records_path


# --- stage: analyze -------------------------------------------------------------


def _group_of(triple: KnowledgeTriple) -> str:
    if triple.corpus is Corpus.TREX:
        return triple.grouping.value
    if triple.corpus is Corpus.GOOGLE_RE:
        return triple.relation_id
    return "Total"


def _single_info_type(syntax: SyntaxFamily, slot: Slot) -> PromptType:
    info = InfoContent.DOMAIN if slot is Slot.DOMAIN else InfoContent.RANGE
    return prompt_type_for(syntax, info)


P_AT_1_COLUMNS = [
    PromptType.SIMPLE,
    PromptType.COMPOUND,
    PromptType.APPOSITIVE_DOMAIN,
    PromptType.COMPLEX,
    PromptType.APPOSITIVE_RANGE,
    PromptType.COMPOUND_COMPLEX,
    PromptType.APPOSITIVE_BOTH,
]


def run_analyze(cfg: RunConfig, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    records_path = out_dir / "records.jsonl"
    if not records_path.exists():
        raise StageMismatch(f"{records_path} not found; run the 'run-eval' stage first")
    header, records = read_records(records_path)
    if header is not None and header.get("config_hash") != cfg.config_hash:
        raise StageMismatch("records.jsonl belongs to a different run config")

    if not records:
        raise StageMismatch(f"{records_path} holds no records; did 'run-eval' see any triples?")

    inputs = load_inputs(cfg)
    triples_by_key = {t.key: t for t in inputs.triples}
    missing = sorted({r.triple_key for r in records} - set(triples_by_key))
    if missing:
        raise StageMismatch(f"records reference triples outside the corpus: {missing[:3]}")

    # every expected (prompt type, strategy) column must cover the same
    # triple set, exactly once
    reference = {r.triple_key for r in records}
    expected_columns = [(PromptType.SIMPLE, Strategy.NOT_APPLICABLE)]
    for syntax in cfg.syntaxes:
        for strategy in cfg.strategies:
            expected_columns += [
                (_single_info_type(syntax, Slot.DOMAIN), strategy),
                (_single_info_type(syntax, Slot.RANGE), strategy),
                (prompt_type_for(syntax, InfoContent.BOTH), strategy),
            ]
    for prompt_type, strategy in expected_columns:
        column = [r for r in records if r.prompt_type is prompt_type and r.strategy is strategy]
        keys = {r.triple_key for r in column}
        if len(column) != len(keys):
            raise StageMismatch(
                f"duplicate {prompt_type.value}/{strategy.value} records; regenerate records.jsonl"
            )
        if keys != reference:
            raise CoverageMismatch(
                f"{prompt_type.value}/{strategy.value} records cover {len(keys)} of "
                f"{len(reference)} triples; resume 'run-eval' to completion first"
            )

    analysis_dir = out_dir / "analysis"
    analysis_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    head = provenance(cfg)

    # corpus statistics (Table-3-style)
    stats = compute_stats(inputs.triples, inputs.constraints)
    stats_path = analysis_dir / "stats.csv"
    stats_to_csv(stats, stats_path, header_lines=provenance_comment_lines(cfg))
    artifacts["stats"] = stats_path

    # P@1 table
    corpus_name = cfg.corpus_kind.value
    groups = sorted({_group_of(triples_by_key[r.triple_key]) for r in records})
    if groups != ["Total"]:
        groups = groups + ["Total"]
    p_table_path = analysis_dir / "p_at_1.csv"
    with open(p_table_path, "w", newline="", encoding="utf-8") as fh:
        for line in provenance_comment_lines(cfg):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["corpus", "group", "strategy", "n_triples"] + [t.value for t in P_AT_1_COLUMNS])
        for strategy in cfg.strategies:
            for group in groups:
                group_records = [
                    r
                    for r in records
                    if (group == "Total" or _group_of(triples_by_key[r.triple_key]) == group)
                    and (r.strategy is strategy or r.strategy is Strategy.NOT_APPLICABLE)
                ]
                n_triples = len({r.triple_key for r in group_records})
                by_type = p_at_1(group_records, group_by=lambda r: r.prompt_type)
                row = [corpus_name, group, strategy.value, n_triples]
                for prompt_type in P_AT_1_COLUMNS:
                    value = by_type.get(prompt_type)
                    row.append("" if value is None else f"{value:.4f}")
                writer.writerow(row)
    artifacts["p_at_1"] = p_table_path

    by_type_strategy: dict[tuple[PromptType, Strategy], list[EvaluationRecord]] = {}
    for record in records:
        by_type_strategy.setdefault((record.prompt_type, record.strategy), []).append(record)

    def records_of(prompt_type: PromptType, strategy: Strategy) -> list[EvaluationRecord]:
        if prompt_type is PromptType.SIMPLE:
            return by_type_strategy.get((prompt_type, Strategy.NOT_APPLICABLE), [])
        return by_type_strategy.get((prompt_type, strategy), [])

    simple_records = records_of(PromptType.SIMPLE, Strategy.NOT_APPLICABLE)

    # combinability bounds (per syntax x strategy)
    bounds_payload = {"provenance": head, "syntaxes": {}}
    for syntax in cfg.syntaxes:
        per_strategy = {}
        for strategy in cfg.strategies:
            domain_records = records_of(_single_info_type(syntax, Slot.DOMAIN), strategy)
            range_records = records_of(_single_info_type(syntax, Slot.RANGE), strategy)
            combined_records = records_of(prompt_type_for(syntax, InfoContent.BOTH), strategy)
            bounds = combinability_bounds(domain_records, range_records)
            observed_by_key = {r.triple_key: r.correct for r in combined_records}
            n = len(bounds)
            per_strategy[strategy.value] = {
                "n_triples": n,
                "lower_p_at_1": sum(c.lower_correct for c in bounds.values()) / n,
                "observed_p_at_1": sum(observed_by_key.values()) / n,
                "upper_p_at_1": sum(c.upper_correct for c in bounds.values()) / n,
                "triples": {
                    key: {
                        "lower_correct": cell.lower_correct,
                        "upper_correct": cell.upper_correct,
                        "observed_correct": observed_by_key[key],
                        "lower_from": cell.lower_from.value,
                        "upper_from": cell.upper_from.value,
                    }
                    for key, cell in sorted(bounds.items())
                },
            }
        bounds_payload["syntaxes"][syntax.value] = per_strategy
    bounds_path = analysis_dir / "bounds.json"
    bounds_path.write_text(json.dumps(bounds_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts["bounds"] = bounds_path

    # consistency partitions (per syntax x strategy), percentages vs simple
    partition_payload = {"provenance": head, "syntaxes": {}}
    for syntax in cfg.syntaxes:
        per_strategy = {}
        for strategy in cfg.strategies:
            correct_sets = {"simple": {r.triple_key for r in simple_records if r.correct}}
            for slot in (Slot.DOMAIN, Slot.RANGE):
                prompt_type = _single_info_type(syntax, slot)
                correct_sets[prompt_type.value] = {
                    r.triple_key for r in records_of(prompt_type, strategy) if r.correct
                }
            combined_type = prompt_type_for(syntax, InfoContent.BOTH)
            correct_sets[combined_type.value] = {
                r.triple_key for r in records_of(combined_type, strategy) if r.correct
            }
            partition = consistency_partition(correct_sets)
            simple_total = partition.totals["simple"]
            payload = partition.to_json()
            payload["percent_of_simple"] = {
                name: (100.0 * total / simple_total if simple_total else None)
                for name, total in partition.totals.items()
            }
            per_strategy[strategy.value] = payload
        partition_payload["syntaxes"][syntax.value] = per_strategy
    partition_path = analysis_dir / "partition.json"
    partition_path.write_text(
        json.dumps(partition_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    artifacts["partition"] = partition_path

    # entropy grid over the known subset (syntax x strategy x info level)
    known = known_subset(simple_records, k=cfg.known_k)
    entropy_payload = {
        "provenance": head,
        "known_k": cfg.known_k,
        "known_size": len(known),
        "grid": {},
    }
    if known:
        restricted = [r for r in records if r.triple_key in known]
        means = mean_entropy(restricted, known, group_by=lambda r: (r.prompt_type, r.strategy))
        for syntax in cfg.syntaxes:
            grid_row = {}
            for strategy in cfg.strategies:
                grid_row[strategy.value] = {
                    "simple": means[(PromptType.SIMPLE, Strategy.NOT_APPLICABLE)],
                    "domain": means[(_single_info_type(syntax, Slot.DOMAIN), strategy)],
                    "range": means[(_single_info_type(syntax, Slot.RANGE), strategy)],
                    "combined": means[(prompt_type_for(syntax, InfoContent.BOTH), strategy)],
                }
            entropy_payload["grid"][syntax.value] = grid_row
    else:
        log.warning("known subset is empty; entropy grid left blank")
    entropy_path = analysis_dir / "entropy.json"
    entropy_path.write_text(json.dumps(entropy_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts["entropy"] = entropy_path

    return artifacts
