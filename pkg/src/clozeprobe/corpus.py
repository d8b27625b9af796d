"""Triple-corpus ingestion, vocabulary filtering, and probe statistics.

Corpora arrive as JSON-lines with a configurable field map per corpus kind.
Malformed lines are collected into an error report instead of being dropped
silently; strict mode turns a non-empty report into SchemaMismatch.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .core import Corpus, Grouping, KnowledgeTriple, TypeConstraintSet
from .errors import MissingConstraint, SchemaMismatch, UnreadableFile


@dataclass(frozen=True)
class FieldMap:
    """Which JSONL fields hold the triple parts for a given corpus export."""

    sub_field: str = "sub_label"
    obj_field: str = "obj_label"
    rel_field: str = "predicate_id"
    grouping_field: Optional[str] = None


DEFAULT_FIELD_MAPS: dict[Corpus, FieldMap] = {
    Corpus.TREX: FieldMap(),
    Corpus.GOOGLE_RE: FieldMap(rel_field="pred"),
    Corpus.CONCEPT_NET: FieldMap(rel_field="pred"),
}


@dataclass(frozen=True)
class LineError:
    line_no: int
    reason: str


@dataclass
class LoadResult:
    triples: list[KnowledgeTriple]
    errors: list[LineError] = field(default_factory=list)

    def __iter__(self):
        return iter(self.triples)

    def __len__(self):
        return len(self.triples)


def load_triples(
    path: str | Path,
    corpus_kind: Corpus,
    field_map: Optional[FieldMap] = None,
    grouping_by_relation: Optional[Mapping[str, Grouping]] = None,
    strict: bool = False,
) -> LoadResult:
    """Load one triple per JSONL line.

    TREx triples need a grouping: either a ``grouping_field`` in the line or
    a relation-to-grouping map (typically from the relations metadata file).
    """
    fmap = field_map or DEFAULT_FIELD_MAPS[corpus_kind]
    grouping_by_relation = grouping_by_relation or {}
    triples: list[KnowledgeTriple] = []
    errors: list[LineError] = []

    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot read corpus {path}: {exc}") from exc

    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError:
                errors.append(LineError(line_no, "invalid JSON"))
                continue
            missing = [f for f in (fmap.sub_field, fmap.obj_field, fmap.rel_field) if f not in record]
            if missing:
                errors.append(LineError(line_no, f"missing fields: {', '.join(missing)}"))
                continue

            grouping = None
            if corpus_kind is Corpus.TREX:
                raw_grouping = record.get(fmap.grouping_field) if fmap.grouping_field else None
                if raw_grouping is None:
                    raw_grouping = grouping_by_relation.get(record[fmap.rel_field])
                if raw_grouping is None:
                    errors.append(LineError(line_no, "no grouping available for TREx triple"))
                    continue
                grouping = Grouping(raw_grouping)

            try:
                triples.append(
                    KnowledgeTriple(
                        subject=str(record[fmap.sub_field]),
                        relation_id=str(record[fmap.rel_field]),
                        object=str(record[fmap.obj_field]),
                        corpus=corpus_kind,
                        grouping=grouping,
                    )
                )
            except ValueError as exc:
                errors.append(LineError(line_no, str(exc)))

    if strict and errors:
        raise SchemaMismatch(str(path), [e.line_no for e in errors])
    return LoadResult(triples=triples, errors=errors)


def load_vocab(path: str | Path) -> frozenset[str]:
    """One token per line, UTF-8. Membership tests are exact string matches,
    so any per-model normalization must already be baked into the file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot read vocabulary {path}: {exc}") from exc
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def filter_by_vocab(
    triples: Sequence[KnowledgeTriple],
    vocabularies: Sequence[frozenset[str] | set[str]],
) -> tuple[list[KnowledgeTriple], list[KnowledgeTriple]]:
    """Keep triples whose object is in every supplied vocabulary.

    Returns (kept, dropped); order is preserved and kept + dropped
    partition the input.
    """
    if not vocabularies:
        raise ValueError("at least one vocabulary is required")
    kept, dropped = [], []
    for triple in triples:
        if all(triple.object in vocab for vocab in vocabularies):
            kept.append(triple)
        else:
            dropped.append(triple)
    return kept, dropped


@dataclass(frozen=True)
class StatsRow:
    group: str
    n_relations: int
    n_facts: int
    mean_domain_types: float
    mean_range_types: float


@dataclass(frozen=True)
class CorpusStats:
    corpus: Corpus
    rows: tuple[StatsRow, ...]

    @property
    def total(self) -> StatsRow:
        return next(r for r in self.rows if r.group == "Total")


def _stats_row(group: str, relations: Mapping[str, TypeConstraintSet], facts: int) -> StatsRow:
    n = len(relations)
    return StatsRow(
        group=group,
        n_relations=n,
        n_facts=facts,
        mean_domain_types=sum(len(c.domain) for c in relations.values()) / n,
        mean_range_types=sum(len(c.range) for c in relations.values()) / n,
    )


def compute_stats(
    triples: Sequence[KnowledgeTriple],
    constraints: Mapping[str, TypeConstraintSet],
) -> list[CorpusStats]:
    """Per-corpus statistics: fact counts plus per-relation means of
    |domain| and |range| (means over relations, not facts).

    TREx rows are per grouping, GoogleRE rows per relation, ConceptNet a
    single Total row; every corpus also gets a Total row.
    """
    by_corpus: dict[Corpus, list[KnowledgeTriple]] = {}
    for triple in triples:
        by_corpus.setdefault(triple.corpus, []).append(triple)

    out = []
    for corpus in (Corpus.TREX, Corpus.GOOGLE_RE, Corpus.CONCEPT_NET):
        subset = by_corpus.get(corpus)
        if not subset:
            continue

        relation_facts: dict[str, int] = {}
        relation_group: dict[str, str] = {}
        for triple in subset:
            if triple.relation_id not in constraints:
                raise MissingConstraint(f"no resolved constraints for relation {triple.relation_id}")
            relation_facts[triple.relation_id] = relation_facts.get(triple.relation_id, 0) + 1
            if corpus is Corpus.TREX:
                relation_group[triple.relation_id] = triple.grouping.value
            elif corpus is Corpus.GOOGLE_RE:
                relation_group[triple.relation_id] = triple.relation_id
            else:
                relation_group[triple.relation_id] = "Total"

        rows = []
        group_order: list[str] = []
        for rel in relation_facts:
            g = relation_group[rel]
            if g not in group_order:
                group_order.append(g)
        if corpus is Corpus.TREX:
            order = [g.value for g in (Grouping.ONE_TO_ONE, Grouping.N_TO_ONE, Grouping.N_TO_M)]
            group_order = [g for g in order if g in group_order]

        for group in group_order:
            rels = {r: constraints[r] for r, g in relation_group.items() if g == group}
            facts = sum(relation_facts[r] for r in rels)
            rows.append(_stats_row(group, rels, facts))
        if not (len(group_order) == 1 and group_order[0] == "Total"):
            rows.append(
                _stats_row("Total", {r: constraints[r] for r in relation_facts}, len(subset))
            )
        out.append(CorpusStats(corpus=corpus, rows=tuple(rows)))
    return out


def stats_to_csv(stats: Iterable[CorpusStats], path: str | Path, header_lines: Sequence[str] = ()) -> None:
    """CSV mirroring the corpus/grouping/relations/facts/dom/rng layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["corpus", "grouping", "n_relations", "n_facts", "mean_domain_types", "mean_range_types"])
        for cs in stats:
            for row in cs.rows:
                writer.writerow(
                    [
                        cs.corpus.value,
                        row.group,
                        row.n_relations,
                        row.n_facts,
                        f"{row.mean_domain_types:.4f}",
                        f"{row.mean_range_types:.4f}",
                    ]
                )


def format_stats(stats: Iterable[CorpusStats]) -> str:
    lines = [f"{'corpus':<12} {'group':<14} {'#rel':>5} {'#facts':>8} {'Dom':>6} {'Rng':>6}"]
    for cs in stats:
        for row in cs.rows:
            lines.append(
                f"{cs.corpus.value:<12} {row.group:<14} {row.n_relations:>5} {row.n_facts:>8}"
                f" {row.mean_domain_types:>6.1f} {row.mean_range_types:>6.1f}"
            )
    return "\n".join(lines)
