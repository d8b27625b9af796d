"""Domain/range type-constraint acquisition and caching.

Constraints come from (in any caller-chosen order): a live Wikidata SPARQL
endpoint, a recorded file fixture, a concept graph (ConceptNet-style TSV),
or hand-authored manual defaults as the fallback of last resort.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

import requests

from .core import ConstraintSource, Grouping, TypeConstraintSet, TypeEntry
from .errors import (
    CorruptCache,
    EmptyConstraint,
    NetworkError,
    NoFallbackAvailable,
    UnreadableFile,
)

log = logging.getLogger(__name__)

# Fixed query shape: property -> P2302 constraint statements, restricted to
# subject-type (Q21503250) and value-type (Q21510865) constraints, reading
# the P2308 class qualifier with English labels.
WIKIDATA_CONSTRAINT_QUERY = """
SELECT ?slot ?class ?classLabel WHERE {{
  wd:{property_id} p:P2302 ?statement .
  ?statement ps:P2302 ?constraintType .
  VALUES (?constraintType ?slot) {{ (wd:Q21503250 "domain") (wd:Q21510865 "range") }}
  ?statement pq:P2308 ?class .
  SERVICE wikibase:label {{ bd:serviceParam wikibase:language "en". }}
}}
""".strip()

# Epoch placeholder for non-live sources keeps fixture-driven pipelines
# byte-reproducible across runs.
FIXED_TIMESTAMP = "1970-01-01T00:00:00+00:00"

# GoogleRE relations are resolved through their Wikidata counterparts.
GOOGLE_RE_PROPERTY_MAP = {
    "place_of_birth": "P19",
    "place_of_death": "P20",
    "date_of_birth": "P569",
}

_ARTICLES = ("a ", "an ", "the ")


def normalize_type_label(label: str) -> str:
    """Lowercase and strip a leading article; templates add their own."""
    cleaned = " ".join(label.split()).lower()
    for article in _ARTICLES:
        if cleaned.startswith(article):
            cleaned = cleaned[len(article) :]
            break
    return cleaned


def _dedupe(entries: Sequence[TypeEntry]) -> tuple[TypeEntry, ...]:
    seen: set[str] = set()
    out = []
    for entry in entries:
        if entry.class_id not in seen:
            seen.add(entry.class_id)
            out.append(entry)
    return tuple(out)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class WikidataClient:
    """Thin SPARQL-over-HTTP-GET client with retry/backoff."""

    def __init__(
        self,
        endpoint_url: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint_url = endpoint_url
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def query(self, sparql: str) -> dict:
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self.session.get(
                    self.endpoint_url,
                    params={"query": sparql, "format": "json"},
                    headers={"Accept": "application/sparql-results+json"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code == 200:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise NetworkError(f"non-JSON SPARQL response: {exc}") from exc
                if response.status_code not in (429, 500, 502, 503, 504):
                    raise NetworkError(f"SPARQL endpoint returned {response.status_code}")
                last_error = NetworkError(f"retryable status {response.status_code}")
            if attempt < self.max_retries:
                time.sleep(self.backoff * (2**attempt))
        raise NetworkError(f"SPARQL endpoint {self.endpoint_url} unreachable") from last_error


def _parse_constraint_bindings(property_id: str, payload: Mapping) -> tuple[list[TypeEntry], list[TypeEntry]]:
    try:
        bindings = payload["results"]["bindings"]
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed SPARQL result for {property_id}: {exc}") from exc

    domain: list[TypeEntry] = []
    range_: list[TypeEntry] = []
    for row in bindings:
        slot = row.get("slot", {}).get("value")
        class_uri = row.get("class", {}).get("value", "")
        class_id = class_uri.rsplit("/", 1)[-1]
        label = row.get("classLabel", {}).get("value")
        if not label or label == class_id:
            log.warning("skipping %s class %s: no English label", property_id, class_id)
            continue
        entry = TypeEntry(label=normalize_type_label(label), class_id=class_id)
        if slot == "domain":
            domain.append(entry)
        elif slot == "range":
            range_.append(entry)
    return list(_dedupe(domain)), list(_dedupe(range_))


def fetch_wikidata_constraints(
    property_id: str,
    endpoint_url: str,
    client: Optional[WikidataClient] = None,
) -> TypeConstraintSet:
    """Fetch the subject-type/value-type constraint classes of one property.

    Raises NetworkError when the endpoint cannot be reached and
    EmptyConstraint when the property carries no such constraint statements.
    Statement order is preserved; labels are lowercased and deduplicated.
    """
    if not (property_id.startswith("P") and property_id[1:].isdigit()):
        raise ValueError(f"not a Wikidata property id: {property_id!r}")
    client = client or WikidataClient(endpoint_url)
    payload = client.query(WIKIDATA_CONSTRAINT_QUERY.format(property_id=property_id))
    domain, range_ = _parse_constraint_bindings(property_id, payload)
    if not domain and not range_:
        raise EmptyConstraint(f"{property_id} has no subject-type or value-type constraints")
    return TypeConstraintSet(
        property_id=property_id,
        domain=tuple(domain),
        range=tuple(range_),
        source=ConstraintSource.WIKIDATA_LIVE,
        fetched_at=now_iso(),
    )


# --- concept graph --------------------------------------------------------


class EdgeLabel(str, Enum):
    RELATED_TO = "RelatedTo"
    DEFINED_BY = "DefinedBy"
    OTHER = "Other"


_EDGE_LABEL_ALIASES = {
    "relatedto": EdgeLabel.RELATED_TO,
    "related to": EdgeLabel.RELATED_TO,
    "/r/relatedto": EdgeLabel.RELATED_TO,
    "definedby": EdgeLabel.DEFINED_BY,
    "defined by": EdgeLabel.DEFINED_BY,
    "/r/definedby": EdgeLabel.DEFINED_BY,
}


@dataclass(frozen=True)
class ConceptGraphEdge:
    source_concept: str
    edge_label: EdgeLabel
    target_concept: str
    raw_label: str = ""

    def __post_init__(self):
        if self.source_concept == self.target_concept:
            raise ValueError(f"self-loop edge on {self.source_concept!r}")


def parse_edge_label(raw: str) -> EdgeLabel:
    return _EDGE_LABEL_ALIASES.get(raw.strip().lower(), EdgeLabel.OTHER)


def load_concept_graph(path: str | Path) -> list[ConceptGraphEdge]:
    """Read `source<TAB>edge_label<TAB>target` lines; self-loops and short
    rows are skipped with a warning."""
    edges = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    log.warning("%s:%d: expected 3 tab-separated fields", path, line_no)
                    continue
                source, raw_label, target = (p.strip() for p in parts)
                if source == target:
                    log.warning("%s:%d: skipping self-loop on %r", path, line_no, source)
                    continue
                edges.append(
                    ConceptGraphEdge(
                        source_concept=source,
                        edge_label=parse_edge_label(raw_label),
                        target_concept=target,
                        raw_label=raw_label,
                    )
                )
    except OSError as exc:
        raise UnreadableFile(f"cannot read concept graph {path}: {exc}") from exc
    return edges


def derive_from_concept_graph(seed_concept: str, edges: Sequence[ConceptGraphEdge]) -> list[str]:
    """Seed concept first, then unique direct neighbours reachable via
    RelatedTo/DefinedBy edges, in edge order. An unknown seed yields just
    the seed (the manually chosen type stays valid)."""
    if not seed_concept.strip():
        raise ValueError("seed concept must be non-empty")
    seed = seed_concept.strip()
    seen_anywhere = any(seed in (e.source_concept, e.target_concept) for e in edges)
    if not seen_anywhere:
        log.warning("seed concept %r appears in no edge; using seed only", seed)
    out = [seed]
    seen = {seed}
    for edge in edges:
        if edge.source_concept != seed:
            continue
        if edge.edge_label not in (EdgeLabel.RELATED_TO, EdgeLabel.DEFINED_BY):
            continue
        if edge.target_concept not in seen:
            seen.add(edge.target_concept)
            out.append(edge.target_concept)
    return out


# --- cache ----------------------------------------------------------------


def constraint_set_to_json(cset: TypeConstraintSet) -> dict:
    return {
        "property_id": cset.property_id,
        "domain": [[e.label, e.class_id] for e in cset.domain],
        "range": [[e.label, e.class_id] for e in cset.range],
        "source": cset.source.value,
        "fetched_at": cset.fetched_at,
        "manual_fallback": cset.manual_fallback,
    }


def constraint_set_from_json(payload: Mapping) -> TypeConstraintSet:
    return TypeConstraintSet(
        property_id=payload["property_id"],
        domain=tuple(TypeEntry(label, class_id) for label, class_id in payload["domain"]),
        range=tuple(TypeEntry(label, class_id) for label, class_id in payload["range"]),
        source=ConstraintSource(payload["source"]),
        fetched_at=payload["fetched_at"],
        manual_fallback=bool(payload.get("manual_fallback", False)),
    )


class ConstraintCache:
    """Durable key-value store: one human-readable JSON document mapping
    property_id to its constraint set. A corrupt file is treated as a miss
    (with a warning); the next put rewrites it."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._data: dict[str, dict] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        try:
            raw = json.loads(self.path.read_text(encoding="utf-8"))
            if not isinstance(raw, dict):
                raise ValueError("cache root must be a JSON object")
            for key, value in raw.items():
                constraint_set_from_json(value)  # validate eagerly
            self._data = raw
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("corrupt constraint cache %s (%s); treating as empty", self.path, exc)
            self._data = {}

    def get(self, property_id: str) -> Optional[TypeConstraintSet]:
        entry = self._data.get(property_id)
        return constraint_set_from_json(entry) if entry is not None else None

    def put(self, property_id: str, cset: TypeConstraintSet) -> None:
        self._data[property_id] = constraint_set_to_json(cset)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self._data, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def keys(self) -> list[str]:
        return sorted(self._data)


# --- resolution -----------------------------------------------------------


@dataclass(frozen=True)
class RelationConfig:
    """Per-relation acquisition inputs, read from the relations JSON file."""

    relation_id: str
    relation_text: str
    wikidata_property: Optional[str] = None
    grouping: Optional[Grouping] = None
    manual_domain: Optional[str] = None
    manual_range: Optional[str] = None
    domain_seed: Optional[str] = None
    range_seed: Optional[str] = None

    @property
    def property_id(self) -> str:
        """Wikidata property to query; GoogleRE names map through the static
        translation table, everything else defaults to the relation id."""
        if self.wikidata_property:
            return self.wikidata_property
        return GOOGLE_RE_PROPERTY_MAP.get(self.relation_id, self.relation_id)


def load_relation_configs(path: str | Path) -> list[RelationConfig]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UnreadableFile(f"cannot read relations file {path}: {exc}") from exc
    configs = []
    for entry in raw:
        grouping = entry.get("grouping")
        configs.append(
            RelationConfig(
                relation_id=entry["relation_id"],
                relation_text=entry["relation_text"],
                wikidata_property=entry.get("wikidata_property"),
                grouping=Grouping(grouping) if grouping else None,
                manual_domain=entry.get("manual_domain"),
                manual_range=entry.get("manual_range"),
                domain_seed=entry.get("domain_seed"),
                range_seed=entry.get("range_seed"),
            )
        )
    return configs


class ConstraintProvider(Protocol):
    def lookup(self, relation: RelationConfig) -> Optional[TypeConstraintSet]: ...


class FixtureProvider:
    """Reads recorded constraint sets from a cache-format JSON file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            raw = json.loads(self.path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise UnreadableFile(f"cannot read constraint fixture {path}: {exc}") from exc
        except ValueError as exc:
            raise CorruptCache(f"constraint fixture {path} is not valid JSON: {exc}") from exc
        self._data = {
            key: constraint_set_from_json(value) for key, value in raw.items()
        }

    def lookup(self, relation: RelationConfig) -> Optional[TypeConstraintSet]:
        cset = self._data.get(relation.property_id)
        if cset is None:
            return None
        # Re-stamp as fixture-sourced with the deterministic timestamp.
        return TypeConstraintSet(
            property_id=cset.property_id,
            domain=cset.domain,
            range=cset.range,
            source=ConstraintSource.FILE_FIXTURE,
            fetched_at=cset.fetched_at or FIXED_TIMESTAMP,
            manual_fallback=cset.manual_fallback,
        )


class LiveWikidataProvider:
    """Queries the SPARQL endpoint; network failures surface as NetworkError."""

    def __init__(self, endpoint_url: str, client: Optional[WikidataClient] = None):
        self.endpoint_url = endpoint_url
        self.client = client or WikidataClient(endpoint_url)

    def lookup(self, relation: RelationConfig) -> Optional[TypeConstraintSet]:
        property_id = relation.property_id
        if not (property_id.startswith("P") and property_id[1:].isdigit()):
            return None
        try:
            return fetch_wikidata_constraints(property_id, self.endpoint_url, client=self.client)
        except EmptyConstraint:
            return None


class ConceptGraphProvider:
    """Derives constraints from manually chosen seed concepts per relation."""

    def __init__(self, edges: Sequence[ConceptGraphEdge]):
        self.edges = list(edges)

    def lookup(self, relation: RelationConfig) -> Optional[TypeConstraintSet]:
        if not relation.domain_seed or not relation.range_seed:
            return None
        domain = derive_from_concept_graph(relation.domain_seed, self.edges)
        range_ = derive_from_concept_graph(relation.range_seed, self.edges)
        return TypeConstraintSet(
            property_id=relation.property_id,
            domain=tuple(TypeEntry(normalize_type_label(c), f"concept:{c}") for c in domain),
            range=tuple(TypeEntry(normalize_type_label(c), f"concept:{c}") for c in range_),
            source=ConstraintSource.CONCEPT_GRAPH,
            fetched_at=FIXED_TIMESTAMP,
        )


def resolve_constraints(
    relation: RelationConfig,
    providers: Sequence[ConstraintProvider],
    manual_defaults: Optional[Mapping[str, tuple[str, str]]] = None,
    strict_network: bool = False,
) -> TypeConstraintSet:
    """Try providers in order, per slot; empty slots fall back to the manual
    default for the relation. The result always has a non-empty domain and
    range, or NoFallbackAvailable is raised.

    Provider network failures are logged and skipped unless
    ``strict_network`` is set (forced-refresh semantics).
    """
    manual_defaults = dict(manual_defaults or {})
    if relation.manual_domain and relation.manual_range:
        manual_defaults.setdefault(relation.relation_id, (relation.manual_domain, relation.manual_range))

    domain: tuple[TypeEntry, ...] = ()
    range_: tuple[TypeEntry, ...] = ()
    source = None
    fetched_at = FIXED_TIMESTAMP
    for provider in providers:
        try:
            cset = provider.lookup(relation)
        except NetworkError:
            if strict_network:
                raise
            log.warning(
                "constraint provider %s failed for %s; trying next source",
                type(provider).__name__,
                relation.relation_id,
            )
            continue
        if cset is None:
            continue
        if not domain and cset.domain:
            domain = cset.domain
            if source is None:
                source, fetched_at = cset.source, cset.fetched_at
        if not range_ and cset.range:
            range_ = cset.range
            if source is None:
                source, fetched_at = cset.source, cset.fetched_at
        if domain and range_:
            break

    manual_used = False
    if not domain or not range_:
        default = manual_defaults.get(relation.relation_id)
        if default is None:
            raise NoFallbackAvailable(relation.relation_id, "domain" if not domain else "range")
        manual_domain, manual_range = default
        if not domain:
            label = normalize_type_label(manual_domain)
            domain = (TypeEntry(label=label, class_id=f"manual:{label}"),)
            manual_used = True
        if not range_:
            label = normalize_type_label(manual_range)
            range_ = (TypeEntry(label=label, class_id=f"manual:{label}"),)
            manual_used = True

    return TypeConstraintSet(
        property_id=relation.property_id,
        domain=domain,
        range=range_,
        source=source if source is not None else ConstraintSource.MANUAL,
        fetched_at=fetched_at,
        manual_fallback=manual_used,
    )
