"""Shared vocabulary: triples, prompt types, relation specs, type constraints.

All types here are immutable value objects and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence


class Corpus(str, Enum):
    TREX = "TREx"
    GOOGLE_RE = "GoogleRE"
    CONCEPT_NET = "ConceptNet"


class Grouping(str, Enum):
    """Relation cardinality buckets used for TREx reporting."""

    ONE_TO_ONE = "1:1"
    N_TO_ONE = "N:1"
    N_TO_M = "N:M"


class PromptType(str, Enum):
    """The seven prompt shapes: one bare form plus {clausal, appositive} x
    {domain, range, both} supplementary-information variants."""

    SIMPLE = "simple"
    COMPOUND = "compound"
    COMPLEX = "complex"
    COMPOUND_COMPLEX = "compound-complex"
    APPOSITIVE_DOMAIN = "appositive-domain"
    APPOSITIVE_RANGE = "appositive-range"
    APPOSITIVE_BOTH = "appositive-both"


class SyntaxFamily(str, Enum):
    CLAUSAL = "clausal"
    APPOSITIVE = "appositive"
    NONE = "none"


class InfoContent(str, Enum):
    NONE = "none"
    DOMAIN = "domain"
    RANGE = "range"
    BOTH = "both"


class Strategy(str, Enum):
    """How the supplementary type label for a prompt was selected."""

    QUALITY = "quality"
    CONFIDENCE = "confidence"
    NOT_APPLICABLE = "none"


_SYNTAX = {
    PromptType.SIMPLE: SyntaxFamily.NONE,
    PromptType.COMPOUND: SyntaxFamily.CLAUSAL,
    PromptType.COMPLEX: SyntaxFamily.CLAUSAL,
    PromptType.COMPOUND_COMPLEX: SyntaxFamily.CLAUSAL,
    PromptType.APPOSITIVE_DOMAIN: SyntaxFamily.APPOSITIVE,
    PromptType.APPOSITIVE_RANGE: SyntaxFamily.APPOSITIVE,
    PromptType.APPOSITIVE_BOTH: SyntaxFamily.APPOSITIVE,
}

_INFO = {
    PromptType.SIMPLE: InfoContent.NONE,
    PromptType.COMPOUND: InfoContent.DOMAIN,
    PromptType.COMPLEX: InfoContent.RANGE,
    PromptType.COMPOUND_COMPLEX: InfoContent.BOTH,
    PromptType.APPOSITIVE_DOMAIN: InfoContent.DOMAIN,
    PromptType.APPOSITIVE_RANGE: InfoContent.RANGE,
    PromptType.APPOSITIVE_BOTH: InfoContent.BOTH,
}


def syntax_family(prompt_type: PromptType) -> SyntaxFamily:
    """Clausal for compound/complex/compound-complex, appositive for the
    appositive forms, none for the simple prompt."""
    return _SYNTAX[prompt_type]


def info_content(prompt_type: PromptType) -> InfoContent:
    """Which supplementary type slots the prompt carries."""
    return _INFO[prompt_type]


def prompt_type_for(syntax: SyntaxFamily, info: InfoContent) -> PromptType:
    """Inverse of (syntax_family, info_content); the simple prompt is
    (none, none)."""
    for t in PromptType:
        if _SYNTAX[t] == syntax and _INFO[t] == info:
            return t
    raise KeyError(f"no prompt type for syntax={syntax} info={info}")


@dataclass(frozen=True)
class KnowledgeTriple:
    """One (subject, relation, object) fact with corpus provenance.

    Surface labels are stored whitespace-trimmed; the object must be a
    single-token label (enforced downstream by vocabulary filtering).
    """

    subject: str
    relation_id: str
    object: str
    corpus: Corpus
    grouping: Optional[Grouping] = None

    def __post_init__(self):
        object.__setattr__(self, "subject", self.subject.strip())
        object.__setattr__(self, "object", self.object.strip())
        if not self.subject or not self.object:
            raise ValueError("subject and object must be non-empty after trimming")
        if not self.relation_id:
            raise ValueError("relation_id must be non-empty")
        if (self.grouping is not None) != (self.corpus is Corpus.TREX):
            raise ValueError("grouping must be present iff the corpus is TREx")

    @property
    def key(self) -> str:
        """Stable human-readable identifier used to join prompts, scores,
        and evaluation records."""
        return f"{self.corpus.value}:{self.relation_id}:{self.subject}:{self.object}"


def _fold_unique(labels: Sequence[str], what: str) -> None:
    folded = [x.casefold() for x in labels]
    if len(set(folded)) != len(folded):
        raise ValueError(f"{what} entries must be unique after case-folding: {labels}")


@dataclass(frozen=True)
class RelationSpec:
    """Per-relation verbalization fragment plus its type-constraint candidates.

    ``relation_text`` is the bare predicate fragment (e.g. "is the capital
    of"); it must not contain a mask marker. Type lists keep source order,
    which downstream tie-breaking relies on.
    """

    relation_id: str
    relation_text: str
    domain_types: tuple[str, ...]
    range_types: tuple[str, ...]
    manual_fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "domain_types", tuple(self.domain_types))
        object.__setattr__(self, "range_types", tuple(self.range_types))
        if not self.relation_text.strip():
            raise ValueError("relation_text must be non-empty")
        if "[MASK]" in self.relation_text:
            raise ValueError("relation_text must not contain a mask marker")
        if not self.domain_types or not self.range_types:
            raise ValueError("domain_types and range_types each need at least one entry")
        _fold_unique(self.domain_types, "domain_types")
        _fold_unique(self.range_types, "range_types")


class ConstraintSource(str, Enum):
    WIKIDATA_LIVE = "wikidata-live"
    FILE_FIXTURE = "file-fixture"
    CONCEPT_GRAPH = "concept-graph"
    MANUAL = "manual"


@dataclass(frozen=True)
class TypeEntry:
    """A type label together with the knowledge-base class it came from."""

    label: str
    class_id: str


@dataclass(frozen=True)
class TypeConstraintSet:
    """Domain/range class constraints for one property, as acquired from a
    source. ``manual_fallback`` marks sets where at least one slot had to be
    filled from hand-authored defaults."""

    property_id: str
    domain: tuple[TypeEntry, ...]
    range: tuple[TypeEntry, ...]
    source: ConstraintSource
    fetched_at: str
    manual_fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "range", tuple(self.range))
        for slot_name, entries in (("domain", self.domain), ("range", self.range)):
            ids = [e.class_id for e in entries]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate class ids in {slot_name}: {ids}")
        if self.source is ConstraintSource.MANUAL and (not self.domain or not self.range):
            raise ValueError("manual constraint sets must fill both domain and range")

    @property
    def domain_labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.domain)

    @property
    def range_labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.range)
