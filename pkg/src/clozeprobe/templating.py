"""Meta-template rendering: one masked single-sentence prompt per
(triple, relation verbalization, prompt type, supplementary types).

The surface grammar, with S = subject, R = relation text, M = mask,
d/r = domain/range type label and a(x) the indefinite article:

    simple              S R M.
    compound            S is a(d) d and R M.
    complex             S R M, which is a(r) r.
    compound-complex    S is a(d) d and R M, which is a(r) r.
    appositive-domain   The d S R M.
    appositive-range    S R the r M.            (pre-nominal, default)
    appositive-both     The d S R the r M.

The range appositive is configurable: ``appositive_range_style="post"``
realizes it as a post-nominal appositive after the mask ("S R M, a(r) r.").
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import InfoContent, KnowledgeTriple, PromptType, RelationSpec, info_content
from .errors import MissingTypeArgument, SurfaceCollision

MASK_TOKEN = "[MASK]"

APPOSITIVE_RANGE_STYLES = ("pre", "post")

_VOWELS = frozenset("aeiou")

# Vowel-letter onsets pronounced with a consonant sound ("a European
# country", "a university") and silent-h words ("an hour").
_CONSONANT_SOUND_PREFIXES = ("eu", "uni", "use", "one", "once", "ubiq")
_SILENT_H_PREFIXES = ("hour", "honest", "heir", "honor", "honour")


@dataclass(frozen=True)
class PromptInstance:
    """A fully instantiated masked prompt."""

    triple_key: str
    prompt_type: PromptType
    text: str
    domain_type_used: Optional[str] = None
    range_type_used: Optional[str] = None

    def __post_init__(self):
        if self.text.count(MASK_TOKEN) != 1:
            raise ValueError(f"prompt must contain exactly one {MASK_TOKEN}: {self.text!r}")
        if not self.text.endswith("."):
            raise ValueError(f"prompt must end with a period: {self.text!r}")
        if "  " in self.text:
            raise ValueError(f"prompt must not contain double spaces: {self.text!r}")
        info = info_content(self.prompt_type)
        wants_domain = info in (InfoContent.DOMAIN, InfoContent.BOTH)
        wants_range = info in (InfoContent.RANGE, InfoContent.BOTH)
        if (self.domain_type_used is not None) != wants_domain:
            raise ValueError(f"domain_type_used must be set iff the type carries domain info ({self.prompt_type})")
        if (self.range_type_used is not None) != wants_range:
            raise ValueError(f"range_type_used must be set iff the type carries range info ({self.prompt_type})")


def article_for(type_label: str) -> str:
    """Indefinite article: "an" before a vowel sound, else "a".

    Decides on the first alphabetic character (so labels like "'90s band"
    still resolve), with a small exception list for vowel letters spoken
    with a consonant onset ("European", "university") and for silent-h
    words ("hour").
    """
    if not type_label:
        raise ValueError("type label must be non-empty")
    for i, ch in enumerate(type_label):
        if ch.isalpha():
            word = type_label[i:].lower()
            if ch.lower() in _VOWELS:
                return "a" if word.startswith(_CONSONANT_SOUND_PREFIXES) else "an"
            return "an" if word.startswith(_SILENT_H_PREFIXES) else "a"
    return "a"


def _clean_surface(text: str, what: str) -> str:
    cleaned = " ".join(text.split())
    if not cleaned:
        raise ValueError(f"{what} must be non-empty")
    if MASK_TOKEN in cleaned:
        raise SurfaceCollision(f"{what} contains the mask placeholder: {text!r}")
    return cleaned


def render(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    prompt_type: PromptType,
    domain_type: Optional[str] = None,
    range_type: Optional[str] = None,
    appositive_range_style: str = "pre",
) -> PromptInstance:
    """Render one masked prompt. Pure function of its arguments.

    The object position is always masked; relation text and mask stay in
    the main clause for every prompt type.
    """
    if appositive_range_style not in APPOSITIVE_RANGE_STYLES:
        raise ValueError(f"appositive_range_style must be one of {APPOSITIVE_RANGE_STYLES}")

    info = info_content(prompt_type)
    wants_domain = info in (InfoContent.DOMAIN, InfoContent.BOTH)
    wants_range = info in (InfoContent.RANGE, InfoContent.BOTH)
    if wants_domain and domain_type is None:
        raise MissingTypeArgument(f"{prompt_type.value} requires a domain type label")
    if wants_range and range_type is None:
        raise MissingTypeArgument(f"{prompt_type.value} requires a range type label")
    if not wants_domain and domain_type is not None:
        raise ValueError(f"{prompt_type.value} does not take a domain type label")
    if not wants_range and range_type is not None:
        raise ValueError(f"{prompt_type.value} does not take a range type label")

    subject = _clean_surface(triple.subject, "subject")
    relation = _clean_surface(spec.relation_text, "relation text")
    d = _clean_surface(domain_type, "domain type label") if wants_domain else None
    r = _clean_surface(range_type, "range type label") if wants_range else None

    if prompt_type is PromptType.SIMPLE:
        text = f"{subject} {relation} {MASK_TOKEN}."
    elif prompt_type is PromptType.COMPOUND:
        text = f"{subject} is {article_for(d)} {d} and {relation} {MASK_TOKEN}."
    elif prompt_type is PromptType.COMPLEX:
        text = f"{subject} {relation} {MASK_TOKEN}, which is {article_for(r)} {r}."
    elif prompt_type is PromptType.COMPOUND_COMPLEX:
        text = (
            f"{subject} is {article_for(d)} {d} and {relation} {MASK_TOKEN},"
            f" which is {article_for(r)} {r}."
        )
    elif prompt_type is PromptType.APPOSITIVE_DOMAIN:
        text = f"The {d} {subject} {relation} {MASK_TOKEN}."
    elif prompt_type is PromptType.APPOSITIVE_RANGE:
        if appositive_range_style == "pre":
            text = f"{subject} {relation} the {r} {MASK_TOKEN}."
        else:
            text = f"{subject} {relation} {MASK_TOKEN}, {article_for(r)} {r}."
    elif prompt_type is PromptType.APPOSITIVE_BOTH:
        if appositive_range_style == "pre":
            text = f"The {d} {subject} {relation} the {r} {MASK_TOKEN}."
        else:
            text = f"The {d} {subject} {relation} {MASK_TOKEN}, {article_for(r)} {r}."
    else:  # pragma: no cover - exhaustive over the enum
        raise AssertionError(prompt_type)

    return PromptInstance(
        triple_key=triple.key,
        prompt_type=prompt_type,
        text=text,
        domain_type_used=d,
        range_type_used=r,
    )


def render_family(
    triple: KnowledgeTriple,
    spec: RelationSpec,
    domain_types: Optional[Sequence[str]] = None,
    range_types: Optional[Sequence[str]] = None,
    appositive_range_style: str = "pre",
) -> list[PromptInstance]:
    """Full expansion for one triple: the simple prompt, every single-type
    variant in both syntax families, and every domain x range pair for the
    combined types. Size is 1 + 2|D| + 2|R| + 2|D||R|.
    """
    domains = list(domain_types if domain_types is not None else spec.domain_types)
    ranges = list(range_types if range_types is not None else spec.range_types)
    if not domains or not ranges:
        raise ValueError("domain and range candidate lists must be non-empty")

    def one(prompt_type, d=None, r=None):
        return render(triple, spec, prompt_type, d, r, appositive_range_style)

    prompts = [one(PromptType.SIMPLE)]
    prompts += [one(PromptType.COMPOUND, d=d) for d in domains]
    prompts += [one(PromptType.APPOSITIVE_DOMAIN, d=d) for d in domains]
    prompts += [one(PromptType.COMPLEX, r=r) for r in ranges]
    prompts += [one(PromptType.APPOSITIVE_RANGE, r=r) for r in ranges]
    prompts += [one(PromptType.COMPOUND_COMPLEX, d=d, r=r) for d in domains for r in ranges]
    prompts += [one(PromptType.APPOSITIVE_BOTH, d=d, r=r) for d in domains for r in ranges]
    return prompts


def family_size(n_domains: int, n_ranges: int) -> int:
    return 1 + 2 * n_domains + 2 * n_ranges + 2 * n_domains * n_ranges


# --- relation spec file interface ----------------------------------------
#
# JSON array of {relation_id, relation_text, domain_types[], range_types[],
# manual_fallback}; UTF-8.


def load_relation_specs(path: str | Path) -> dict[str, RelationSpec]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ValueError(f"{path}: relation spec file must hold a JSON array")
    specs = {}
    for entry in raw:
        spec = RelationSpec(
            relation_id=entry["relation_id"],
            relation_text=entry["relation_text"],
            domain_types=tuple(entry["domain_types"]),
            range_types=tuple(entry["range_types"]),
            manual_fallback=bool(entry.get("manual_fallback", False)),
        )
        specs[spec.relation_id] = spec
    return specs


def save_relation_specs(specs: Iterable[RelationSpec], path: str | Path) -> None:
    payload = [
        {
            "relation_id": s.relation_id,
            "relation_text": s.relation_text,
            "domain_types": list(s.domain_types),
            "range_types": list(s.range_types),
            "manual_fallback": s.manual_fallback,
        }
        for s in specs
    ]
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
