"""Deterministic synthetic corpora for tests, demos, and desk-scale runs.

The TREx-shaped fixture mirrors the released probe's aggregate geometry:
41 relations split 2/23/16 across the 1:1, N:1 and N:M groupings, 29523
facts surviving the three-model vocabulary filter, and per-relation
domain/range constraint counts whose means match the published corpus
statistics. Everything is a pure function of the tables below, so repeated
materializations are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .constraints import FIXED_TIMESTAMP
from .core import ConstraintSource, Grouping

# label pool for synthetic constraint lists; slices of <= 16 consecutive
# entries are collision-free
_TYPE_WORDS = [
    "person", "human", "city", "town", "settlement", "country", "state", "region",
    "organization", "company", "institution", "language", "occupation", "profession",
    "genre", "style", "instrument", "device", "place", "location", "district",
    "field", "discipline", "position", "role", "team", "club", "river", "mountain",
    "island", "continent", "nation", "territory", "municipality", "religion",
    "movement", "band", "ensemble", "work", "film", "series", "show", "book",
    "album", "song", "award", "event", "sport", "science", "art", "craft", "tool",
    "vehicle", "animal", "plant", "material", "substance", "concept", "entity",
    "structure", "building", "network", "system", "product", "brand", "group",
    "family", "community", "league", "federation", "alliance", "union", "party",
    "agency", "bureau", "department", "ministry", "council", "committee", "court",
    "school", "university", "college", "academy", "hospital", "museum", "library",
    "theater", "studio", "channel", "station", "port", "airport", "bridge", "road",
    "street", "square", "park", "garden", "forest", "desert", "lake", "valley",
]


@dataclass(frozen=True)
class SynthRelation:
    property_id: str
    relation_text: str
    grouping: Grouping
    n_domain: int
    n_range: int
    n_facts: int


def _one_to_one() -> list[SynthRelation]:
    return [
        SynthRelation("P36", "has the capital", Grouping.ONE_TO_ONE, 6, 5, 326),
        SynthRelation("P1376", "is the capital of", Grouping.ONE_TO_ONE, 7, 6, 325),
    ]


_N_TO_ONE = [
    ("P19", "was born in"), ("P20", "died in"), ("P27", "is a citizen of"),
    ("P30", "is located in"), ("P103", "natively speaks"), ("P131", "is located in"),
    ("P136", "plays"), ("P140", "is affiliated with"), ("P159", "is headquartered in"),
    ("P176", "is produced by"), ("P264", "is represented by"), ("P276", "is located in"),
    ("P279", "is a subclass of"), ("P361", "is part of"), ("P364", "was originally aired in"),
    ("P407", "was written in"), ("P413", "plays in the position of"),
    ("P449", "was originally aired on"), ("P495", "was created in"),
    ("P740", "was founded in"), ("P937", "used to work in"), ("P1303", "plays the"),
    ("P1412", "used to communicate in"),
]

_N_TO_M = [
    ("P17", "is located in"), ("P31", "is a kind of"), ("P37", "has the official language"),
    ("P39", "has the position of"), ("P47", "shares the border with"),
    ("P101", "works in the field of"), ("P106", "has occupation"), ("P108", "works for"),
    ("P127", "is owned by"), ("P138", "is named after"), ("P178", "is developed by"),
    ("P190", "is a twin city of"), ("P463", "is a member of"), ("P527", "consists of"),
    ("P530", "maintains diplomatic relations with"), ("P1001", "is a legal term in"),
]


def trex_relations() -> list[SynthRelation]:
    """The 41-relation table. Group sums are pinned so that per-grouping and
    total constraint means land on the published statistics (1:1 6.5/5.5,
    N:1 9.5/6.4, Total 11.7/7.8) and fact counts sum to 651/18682/10190."""
    out = _one_to_one()
    for i, (prop, text) in enumerate(_N_TO_ONE):
        out.append(
            SynthRelation(
                prop, text, Grouping.N_TO_ONE,
                n_domain=10 if i < 11 else 9,        # sum 218
                n_range=7 if i < 9 else 6,           # sum 147
                n_facts=813 if i < 6 else 812,       # sum 18682
            )
        )
    for i, (prop, text) in enumerate(_N_TO_M):
        out.append(
            SynthRelation(
                prop, text, Grouping.N_TO_M,
                n_domain=16 if i < 8 else 15,        # sum 248
                n_range=11 if i == 0 else 10,        # sum 161
                n_facts=637 if i < 14 else 636,      # sum 10190
            )
        )
    return out


# hand-pinned labels for the running example property
_P36_DOMAIN = ["area", "geographic region", "fictional planet", "city", "municipality", "human settlement"]
_P36_RANGE = ["political territorial entity", "fictional city", "capital city", "country", "city"]


def _labels(relation_index: int, slot: str, size: int) -> list[str]:
    offset = (relation_index * 17 + (0 if slot == "domain" else 53)) % len(_TYPE_WORDS)
    return [_TYPE_WORDS[(offset + k) % len(_TYPE_WORDS)] for k in range(size)]


def trex_relations_json(relations: list[SynthRelation] | None = None) -> list[dict]:
    relations = relations or trex_relations()
    return [
        {
            "relation_id": r.property_id,
            "relation_text": r.relation_text,
            "grouping": r.grouping.value,
        }
        for r in relations
    ]


def trex_constraints_json(relations: list[SynthRelation] | None = None) -> dict:
    relations = relations or trex_relations()
    payload = {}
    for i, relation in enumerate(relations):
        if relation.property_id == "P36":
            domain = _P36_DOMAIN
            range_ = _P36_RANGE
        else:
            domain = _labels(i, "domain", relation.n_domain)
            range_ = _labels(i, "range", relation.n_range)
        payload[relation.property_id] = {
            "property_id": relation.property_id,
            "domain": [[label, f"{relation.property_id}-D{k}"] for k, label in enumerate(domain)],
            "range": [[label, f"{relation.property_id}-R{k}"] for k, label in enumerate(range_)],
            "source": ConstraintSource.FILE_FIXTURE.value,
            "fetched_at": FIXED_TIMESTAMP,
            "manual_fallback": False,
        }
    return payload


N_SHARED_OBJECTS = 1500


def shared_object(index: int) -> str:
    return f"token{index % N_SHARED_OBJECTS:04d}"


def write_trex_corpus(directory: str | Path, n_dropped_per_kind: int = 100) -> dict[str, Path]:
    """Materialize triples.jsonl plus three vocabulary files.

    Exactly the tabled fact counts survive filtering against all three
    vocabularies; three flavors of droppable triples exercise the filter
    (object known to one model, to two, or to none).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    relations = trex_relations()

    triples_path = directory / "triples.jsonl"
    with open(triples_path, "w", encoding="utf-8") as fh:
        serial = 0
        for i, relation in enumerate(relations):
            for j in range(relation.n_facts):
                line = {
                    "sub_label": f"Subject {i:02d} {j:05d}",
                    "obj_label": shared_object(serial * 7 + i),
                    "predicate_id": relation.property_id,
                }
                fh.write(json.dumps(line) + "\n")
                serial += 1
        # droppable triples, spread over the first relations
        for kind, prefix in enumerate(("only-a", "a-and-b", "nowhere")):
            for j in range(n_dropped_per_kind):
                relation = relations[j % len(relations)]
                line = {
                    "sub_label": f"Dropped {prefix} {j:04d}",
                    "obj_label": f"rare-{prefix}-{j:04d}",
                    "predicate_id": relation.property_id,
                }
                fh.write(json.dumps(line) + "\n")

    shared = [shared_object(k) for k in range(N_SHARED_OBJECTS)]
    only_a = [f"rare-only-a-{j:04d}" for j in range(n_dropped_per_kind)]
    a_and_b = [f"rare-a-and-b-{j:04d}" for j in range(n_dropped_per_kind)]
    vocabs = {
        "vocab_bert.txt": shared + only_a + a_and_b + ["bert-extra"],
        "vocab_roberta.txt": shared + a_and_b + ["roberta-extra"],
        "vocab_luke.txt": shared + ["luke-extra"],
    }
    paths = {"triples": triples_path}
    for name, tokens in vocabs.items():
        path = directory / name
        path.write_text("\n".join(tokens) + "\n", encoding="utf-8")
        paths[name] = path
    return paths


def write_trex_fixture(directory: str | Path, with_corpus: bool = False) -> None:
    """Write relations.json and constraints.json (and optionally the full
    synthetic corpus) under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "relations.json").write_text(
        json.dumps(trex_relations_json(), indent=2) + "\n", encoding="utf-8"
    )
    (directory / "constraints.json").write_text(
        json.dumps(trex_constraints_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if with_corpus:
        write_trex_corpus(directory)
