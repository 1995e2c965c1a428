"""In-memory knowledge graph: entities, registered relations, qualified triples.

The store is append-only (entities and triples keep their insertion ids),
safe for one writer with any number of readers, and deduplicates triples on
the full (subject, relation, object, qualifiers) quadruple.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

from .normalize import SourceTag, normalize_label
from .units import Quantity, is_registered_unit

EntityId = int
TripleId = int

_QID_RE = re.compile(r"^Q[0-9]+$")
_PID_RE = re.compile(r"^P[0-9]+$")


class GraphError(Exception):
    """Base class for graph constraint violations."""


class EmptyLabelError(GraphError):
    """Label normalized to the empty string."""


class UnknownEntityError(GraphError):
    """Referenced entity id is not in the store."""


class UnregisteredRelationError(GraphError):
    """Relation is not in the registry."""


class DuplicateLabelError(GraphError):
    """create_entity called with a canonical label already in use."""


class RelationOrigin(enum.Enum):
    WIKIDATA_P = "wikidata-p"
    NOTES = "notes"
    PLUMBING = "plumbing"


@dataclass(frozen=True)
class RelationKind:
    """A registered relation; KB-origin relations carry their P-number."""

    name: str
    origin: RelationOrigin
    external_id: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("relation name must be non-empty")
        if self.origin is RelationOrigin.WIKIDATA_P:
            if not (self.external_id and _PID_RE.match(self.external_id)):
                raise ValueError(
                    f"KB relation {self.name!r} needs a P[0-9]+ id, got {self.external_id!r}")


# Display name -> property id on the public knowledge base.
WIKIDATA_RELATIONS: dict[str, str] = {
    "Instance of": "P31",
    "Subclass of": "P279",
    "Use": "P366",
    "Color": "P462",
    "Part of": "P361",
    "Uses": "P2283",
    "Has quality": "P1552",
    "Has cause": "P828",
    "Has part": "P527",
    "Facet of": "P1269",
    "Different from": "P1889",
}

NOTES_RELATIONS: tuple[str, ...] = (
    "has", "hasProperty", "uses", "usedTo", "usedIn", "causes", "producedBy",
    "makes", "hasExpression", "hasPart", "addedWith", "hasValue", "includes",
    "partOf", "alsoCalled", "dueTo", "instanceOf", "isAbbrev", "isAcronym",
    "hasComparator",
)


def relation_key(name: str) -> str:
    """Caseless, spaceless lookup key ("alsoCalled" == "also called")."""
    return re.sub(r"[\s_]+", "", name).lower()


class RelationRegistry:
    """Fixed inventory of relations a graph may use."""

    def __init__(self):
        self._by_name: dict[str, RelationKind] = {}
        self._by_key: dict[str, list[RelationKind]] = {}

    def register(self, kind: RelationKind) -> RelationKind:
        if kind.name in self._by_name:
            existing = self._by_name[kind.name]
            if existing != kind:
                raise ValueError(f"relation {kind.name!r} already registered differently")
            return existing
        self._by_name[kind.name] = kind
        self._by_key.setdefault(relation_key(kind.name), []).append(kind)
        return kind

    def get(self, name: str) -> RelationKind | None:
        """Exact-name lookup."""
        return self._by_name.get(name)

    def resolve(self, name: str, origin: RelationOrigin | None = None) -> RelationKind | None:
        """Exact match first, then caseless/spaceless, optionally origin-scoped.

        Where the caseless key is ambiguous across origins (e.g. the KB's
        "Instance of" vs the notes "instanceOf"), exact spelling or the origin
        argument decides; otherwise the notes relation wins, since free-text
        inputs are the only place fuzzy lookups happen.
        """
        exact = self._by_name.get(name)
        if exact is not None and (origin is None or exact.origin is origin):
            return exact
        candidates = [k for k in self._by_key.get(relation_key(name), ())
                      if origin is None or k.origin is origin]
        if not candidates:
            return None
        for kind in candidates:
            if kind.origin is RelationOrigin.NOTES:
                return kind
        return candidates[0]

    def names(self) -> list[str]:
        return sorted(self._by_name)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __len__(self) -> int:
        return len(self._by_name)


def default_registry() -> RelationRegistry:
    reg = RelationRegistry()
    for display, pid in WIKIDATA_RELATIONS.items():
        reg.register(RelationKind(display, RelationOrigin.WIKIDATA_P, pid))
    for name in NOTES_RELATIONS:
        reg.register(RelationKind(name, RelationOrigin.NOTES))
    return reg


class LiteralKind(enum.Enum):
    TEXT = "text"
    NUMBER = "number"
    QUANTITY = "quantity"
    EXPRESSION_REF = "expr"


_COLLAPSE_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Literal:
    """Non-entity triple object."""

    kind: LiteralKind
    value: str | float
    unit: str = ""

    def __post_init__(self):
        if self.kind in (LiteralKind.NUMBER, LiteralKind.QUANTITY):
            v = float(self.value)
            if not math.isfinite(v):
                raise ValueError("numeric literal must be finite")
            object.__setattr__(self, "value", v)
            if not is_registered_unit(self.unit):
                raise ValueError(f"unknown unit {self.unit!r}")
        else:
            if not isinstance(self.value, str):
                raise ValueError(f"{self.kind.value} literal needs a string value")
            if self.unit:
                raise ValueError("only quantities carry units")

    @classmethod
    def text(cls, value: str) -> "Literal":
        return cls(LiteralKind.TEXT, value)

    @classmethod
    def number(cls, value: float) -> "Literal":
        return cls(LiteralKind.NUMBER, value)

    @classmethod
    def quantity(cls, value: float, unit: str) -> "Literal":
        return cls(LiteralKind.QUANTITY, value, unit)

    @classmethod
    def from_quantity(cls, q: Quantity) -> "Literal":
        if q.unit:
            return cls(LiteralKind.QUANTITY, q.value, q.unit)
        return cls(LiteralKind.NUMBER, q.value)

    @classmethod
    def expression(cls, raw: str) -> "Literal":
        return cls(LiteralKind.EXPRESSION_REF, _COLLAPSE_RE.sub(" ", raw).strip())

    def render(self) -> str:
        if self.kind is LiteralKind.QUANTITY:
            return f"{self.value:g} {self.unit}".rstrip()
        if self.kind is LiteralKind.NUMBER:
            return f"{self.value:g}"
        return str(self.value)


@dataclass
class Entity:
    id: EntityId
    canonical_label: str
    aliases: set[str] = field(default_factory=set)
    categories: set[str] = field(default_factory=set)
    external_ids: set[str] = field(default_factory=set)
    provenance: set[SourceTag] = field(default_factory=set)


@dataclass
class Triple:
    id: TripleId
    subject: EntityId
    relation: RelationKind
    object: EntityId | Literal
    qualifiers: dict[str, str]
    provenance: set[SourceTag]

    @property
    def object_is_entity(self) -> bool:
        return isinstance(self.object, int)


@dataclass(frozen=True)
class Duplicate:
    """add_triple result for an already-present quadruple."""

    triple_id: TripleId


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    BOTH = "both"


@dataclass(frozen=True)
class GraphStats:
    entity_count: int
    triple_count: int
    relation_count: int
    per_source_counts: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "entity_count": self.entity_count,
            "triple_count": self.triple_count,
            "relation_count": self.relation_count,
            "per_source_counts": dict(sorted(self.per_source_counts.items())),
        }


def _object_key(obj: EntityId | Literal):
    if isinstance(obj, int):
        return ("e", obj)
    return ("l", obj.kind.value, obj.value, obj.unit)


class KnowledgeGraph:
    """Entity and triple store with label, alias and adjacency indexes."""

    def __init__(self, registry: RelationRegistry | None = None):
        self.registry = registry if registry is not None else default_registry()
        self._entities: list[Entity] = []
        self._triples: list[Triple] = []
        self._label_index: dict[str, EntityId] = {}
        self._alias_index: dict[str, set[EntityId]] = {}
        self._external_index: dict[str, EntityId] = {}
        self._triple_keys: dict[tuple, TripleId] = {}
        self._by_subject: dict[EntityId, list[TripleId]] = {}
        self._by_object: dict[EntityId, list[TripleId]] = {}

    # -- entities ----------------------------------------------------------

    def upsert_entity(self, label: str, category: str | None = None,
                      source: SourceTag | None = None) -> EntityId:
        """Return the entity for a label, creating it if needed.

        A label (or registered alias) that already maps to an entity reuses
        it; category and provenance are unioned in either way.
        """
        norm = normalize_label(label)
        if not norm:
            raise EmptyLabelError(f"label {label!r} normalizes to the empty string")
        eid = self._label_index.get(norm)
        if eid is None:
            hits = self._alias_index.get(norm)
            if hits:
                eid = min(hits)
        if eid is None:
            eid = self._create(norm)
        entity = self._entities[eid]
        if category:
            entity.categories.add(normalize_label(category))
        if source is not None:
            entity.provenance.add(source)
        return eid

    def create_entity(self, label: str, category: str | None = None,
                      source: SourceTag | None = None) -> EntityId:
        """Create a fresh entity; the canonical label must be unused."""
        norm = normalize_label(label)
        if not norm:
            raise EmptyLabelError(f"label {label!r} normalizes to the empty string")
        if norm in self._label_index:
            raise DuplicateLabelError(f"canonical label {norm!r} already in use")
        eid = self._create(norm)
        entity = self._entities[eid]
        if category:
            entity.categories.add(normalize_label(category))
        if source is not None:
            entity.provenance.add(source)
        return eid

    def _create(self, norm: str) -> EntityId:
        eid = len(self._entities)
        self._entities.append(Entity(id=eid, canonical_label=norm))
        self._label_index[norm] = eid
        return eid

    def entity(self, eid: EntityId) -> Entity:
        try:
            return self._entities[eid]
        except IndexError:
            raise UnknownEntityError(f"no entity {eid}") from None

    def add_alias(self, eid: EntityId, alias: str) -> bool:
        """Register an alias surface; no-op if it equals the canonical label."""
        entity = self.entity(eid)
        norm = normalize_label(alias)
        if not norm:
            raise EmptyLabelError(f"alias {alias!r} normalizes to the empty string")
        if norm == entity.canonical_label:
            return False
        if norm in entity.aliases:
            return False
        entity.aliases.add(norm)
        self._alias_index.setdefault(norm, set()).add(eid)
        return True

    def add_external_id(self, eid: EntityId, external_id: str) -> None:
        if not _QID_RE.match(external_id):
            raise ValueError(f"external id must match Q[0-9]+, got {external_id!r}")
        self.entity(eid).external_ids.add(external_id)
        self._external_index.setdefault(external_id, eid)

    def find_by_label(self, label: str) -> EntityId | None:
        return self._label_index.get(normalize_label(label))

    def find_by_alias(self, label: str) -> set[EntityId]:
        return set(self._alias_index.get(normalize_label(label), ()))

    def find_by_external_id(self, external_id: str) -> EntityId | None:
        return self._external_index.get(external_id)

    def lookup(self, label: str) -> list[EntityId]:
        """Entities whose canonical label or alias equals the normalized label."""
        norm = normalize_label(label)
        hits = set()
        eid = self._label_index.get(norm)
        if eid is not None:
            hits.add(eid)
        hits |= self._alias_index.get(norm, set())
        return sorted(hits)

    @property
    def entities(self) -> list[Entity]:
        return list(self._entities)

    @property
    def entity_count(self) -> int:
        return len(self._entities)

    # -- triples -----------------------------------------------------------

    def add_triple(self, subject: EntityId, relation: RelationKind | str,
                   obj: EntityId | Literal, qualifiers: dict[str, str] | None = None,
                   source: SourceTag | set[SourceTag] | None = None) -> TripleId | Duplicate:
        """Append a qualified triple; identical quadruples are not re-added.

        Re-adding an existing quadruple returns :class:`Duplicate` (carrying
        the original id) and only unions the provenance tags.
        """
        self.entity(subject)
        kind = self._resolve_relation(relation)
        if isinstance(obj, int):
            self.entity(obj)
        elif not isinstance(obj, Literal):
            raise TypeError(f"object must be EntityId or Literal, got {type(obj).__name__}")
        quals = dict(qualifiers) if qualifiers else {}
        for k, v in quals.items():
            if not k or not isinstance(k, str) or not isinstance(v, str):
                raise ValueError(f"qualifiers must map non-empty strings to strings: {k!r}={v!r}")
        tags = self._source_set(source)
        key = (subject, kind.name, _object_key(obj), tuple(sorted(quals.items())))
        existing = self._triple_keys.get(key)
        if existing is not None:
            self._triples[existing].provenance |= tags
            return Duplicate(existing)
        tid = len(self._triples)
        triple = Triple(id=tid, subject=subject, relation=kind, object=obj,
                        qualifiers=quals, provenance=tags)
        self._triples.append(triple)
        self._triple_keys[key] = tid
        self._by_subject.setdefault(subject, []).append(tid)
        if isinstance(obj, int):
            self._by_object.setdefault(obj, []).append(tid)
        return tid

    def _resolve_relation(self, relation: RelationKind | str) -> RelationKind:
        if isinstance(relation, RelationKind):
            registered = self.registry.get(relation.name)
            if registered is None or registered != relation:
                raise UnregisteredRelationError(f"relation {relation.name!r} is not registered")
            return registered
        kind = self.registry.resolve(relation)
        if kind is None:
            raise UnregisteredRelationError(f"relation {relation!r} is not registered")
        return kind

    @staticmethod
    def _source_set(source: SourceTag | set[SourceTag] | None) -> set[SourceTag]:
        if source is None:
            return set()
        if isinstance(source, SourceTag):
            return {source}
        return set(source)

    def triple(self, tid: TripleId) -> Triple:
        try:
            return self._triples[tid]
        except IndexError:
            raise GraphError(f"no triple {tid}") from None

    @property
    def triples(self) -> list[Triple]:
        return list(self._triples)

    @property
    def triple_count(self) -> int:
        return len(self._triples)

    def neighbors(self, eid: EntityId, direction: Direction = Direction.BOTH,
                  relation_filter: set[str] | None = None) -> list[Triple]:
        """Incident triples ordered by triple id.

        ``relation_filter`` holds relation names; Forward matches the entity
        as subject, Backward as (entity-valued) object.
        """
        self.entity(eid)
        ids: set[TripleId] = set()
        if direction in (Direction.FORWARD, Direction.BOTH):
            ids.update(self._by_subject.get(eid, ()))
        if direction in (Direction.BACKWARD, Direction.BOTH):
            ids.update(self._by_object.get(eid, ()))
        result = [self._triples[t] for t in sorted(ids)]
        if relation_filter is not None:
            keys = {relation_key(name) for name in relation_filter}
            result = [t for t in result if relation_key(t.relation.name) in keys]
        return result

    def stats(self) -> GraphStats:
        per_source: dict[str, int] = {}
        relations: set[str] = set()
        for t in self._triples:
            relations.add(t.relation.name)
            for tag in t.provenance:
                per_source[tag.value] = per_source.get(tag.value, 0) + 1
        return GraphStats(
            entity_count=len(self._entities),
            triple_count=len(self._triples),
            relation_count=len(relations),
            per_source_counts=per_source,
        )

    def describe_triples(self) -> list[tuple]:
        """Canonical, order-independent rendering used for comparisons."""
        out = []
        for t in self._triples:
            if isinstance(t.object, int):
                obj = ("entity", self._entities[t.object].canonical_label)
            else:
                obj = (t.object.kind.value, t.object.value, t.object.unit)
            out.append((
                self._entities[t.subject].canonical_label,
                t.relation.name,
                obj,
                tuple(sorted(t.qualifiers.items())),
                tuple(sorted(tag.value for tag in t.provenance)),
            ))
        return sorted(out)
