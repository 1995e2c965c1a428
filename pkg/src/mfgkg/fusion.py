"""Aligning the notes graph with the KB graph and merging them into one.

Alignment runs three passes of decreasing confidence: exact normalized-label
equality, shared alias surfaces, then Levenshtein clustering of what is left.
Anything ambiguous lands in the conflict list for a human instead of being
guessed; a manual override file settles those by hand.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .graph import Direction, EntityId, KnowledgeGraph, Literal
from .normalize import (
    DEFAULT_THRESHOLD, SourceTag, Threshold, cluster_variants, normalize_label,
)

# relations whose object is another name for the subject
_SURFACE_RELATIONS = {"alsoCalled", "isAbbrev", "isAcronym"}


class SynonymOrigin(enum.Enum):
    EXACT = "exact"
    ALIAS = "alias"
    LEVENSHTEIN = "levenshtein"
    MANUAL = "manual"


@dataclass(frozen=True)
class SynonymPair:
    notes_label: str
    wiki_label: str
    origin: SynonymOrigin


@dataclass(frozen=True)
class Conflict:
    surface: str
    candidates: tuple[str, ...]
    reason: str


@dataclass
class SynonymTable:
    pairs: list[SynonymPair] = field(default_factory=list)
    conflicts: list[Conflict] = field(default_factory=list)

    def mapping(self) -> dict[str, str]:
        return {p.notes_label: p.wiki_label for p in self.pairs}


def entity_surfaces(graph: KnowledgeGraph, eid: EntityId) -> set[str]:
    """Every normalized name the entity answers to.

    Canonical label, aliases, and the objects of its naming edges
    (alsoCalled and the abbreviation relations).
    """
    entity = graph.entity(eid)
    surfaces = {entity.canonical_label} | set(entity.aliases)
    for t in graph.neighbors(eid, Direction.FORWARD, _SURFACE_RELATIONS):
        if t.object_is_entity:
            surfaces.add(graph.entity(t.object).canonical_label)
        elif isinstance(t.object, Literal):
            surface = normalize_label(str(t.object.value))
            if surface:
                surfaces.add(surface)
    return surfaces


def build_synonym_table(notes_graph: KnowledgeGraph, wiki_graph: KnowledgeGraph,
                        threshold: Threshold = DEFAULT_THRESHOLD) -> SynonymTable:
    table = SynonymTable()
    matched_notes: set[EntityId] = set()
    matched_wiki: set[EntityId] = set()

    # pass 1: identical canonical labels
    for entity in notes_graph.entities:
        hit = wiki_graph.find_by_label(entity.canonical_label)
        if hit is not None:
            table.pairs.append(SynonymPair(
                entity.canonical_label, wiki_graph.entity(hit).canonical_label,
                SynonymOrigin.EXACT))
            matched_notes.add(entity.id)
            matched_wiki.add(hit)

    # pass 2: shared surfaces (aliases, alsoCalled objects, abbreviations)
    surface_owners: dict[str, tuple[set[EntityId], set[EntityId]]] = {}
    for entity in notes_graph.entities:
        if entity.id in matched_notes:
            continue
        for surface in entity_surfaces(notes_graph, entity.id):
            surface_owners.setdefault(surface, (set(), set()))[0].add(entity.id)
    for entity in wiki_graph.entities:
        if entity.id in matched_wiki:
            continue
        for surface in entity_surfaces(wiki_graph, entity.id):
            if surface in surface_owners:
                surface_owners[surface][1].add(entity.id)

    proposals: dict[EntityId, set[EntityId]] = {}
    reverse: dict[EntityId, set[EntityId]] = {}
    for surface in sorted(surface_owners):
        notes_side, wiki_side = surface_owners[surface]
        if not notes_side or not wiki_side:
            continue
        if len(notes_side) == 1 and len(wiki_side) == 1:
            n, w = next(iter(notes_side)), next(iter(wiki_side))
            proposals.setdefault(n, set()).add(w)
            reverse.setdefault(w, set()).add(n)
        else:
            names = sorted(
                {notes_graph.entity(n).canonical_label for n in notes_side}
                | {wiki_graph.entity(w).canonical_label for w in wiki_side})
            table.conflicts.append(Conflict(
                surface, tuple(names), "surface shared by several entities"))

    conflicted_wiki: set[EntityId] = set()
    for n in sorted(proposals):
        wiki_candidates = proposals[n]
        n_label = notes_graph.entity(n).canonical_label
        if len(wiki_candidates) == 1:
            w = next(iter(wiki_candidates))
            if len(reverse[w]) == 1:
                table.pairs.append(SynonymPair(
                    n_label, wiki_graph.entity(w).canonical_label,
                    SynonymOrigin.ALIAS))
                matched_notes.add(n)
                matched_wiki.add(w)
                continue
            if w in conflicted_wiki:  # already reported with all competitors
                continue
            conflicted_wiki.add(w)
            others = sorted(notes_graph.entity(x).canonical_label for x in reverse[w])
            table.conflicts.append(Conflict(
                wiki_graph.entity(w).canonical_label, tuple(others),
                "several notes entities share surfaces with one KB entity"))
        else:
            names = sorted(wiki_graph.entity(w).canonical_label for w in wiki_candidates)
            table.conflicts.append(Conflict(
                n_label, tuple(names), "alias matches several KB entities"))

    # pass 3: near-identical spellings among the leftovers
    notes_left = {e.canonical_label: e.id for e in notes_graph.entities
                  if e.id not in matched_notes}
    wiki_left = {e.canonical_label: e.id for e in wiki_graph.entities
                 if e.id not in matched_wiki}
    for cluster in cluster_variants(list(notes_left) + list(wiki_left), threshold):
        if len(cluster.members) < 2:
            continue
        in_notes = [m for m in cluster.members if m in notes_left]
        in_wiki = [m for m in cluster.members if m in wiki_left]
        if not in_notes or not in_wiki:
            continue
        if len(in_notes) == 1 and len(in_wiki) == 1 and in_notes[0] != in_wiki[0]:
            table.pairs.append(SynonymPair(
                in_notes[0], in_wiki[0], SynonymOrigin.LEVENSHTEIN))
        else:
            table.conflicts.append(Conflict(
                cluster.representative, tuple(sorted(cluster.members)),
                "near-duplicate spellings on both sides"))
    return table


def apply_manual_overrides(table: SynonymTable, lines) -> SynonymTable:
    """Apply "notes-label<TAB>kb-label" decisions, replacing earlier guesses.

    ``lines`` is an iterable of text lines or a path.  Blank lines and lines
    starting with # are skipped.  An override drops every pair and conflict
    that mentions either label, then records the pairing as manual.
    """
    if isinstance(lines, (str, Path)):
        lines = Path(lines).read_text(encoding="utf-8").splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        left, sep, right = line.partition("\t")
        notes_label = normalize_label(left)
        wiki_label = normalize_label(right)
        if not sep or not notes_label or not wiki_label:
            raise ValueError(f"override line {lineno} is not label<TAB>label: {raw!r}")
        touched = {notes_label, wiki_label}
        table.pairs = [p for p in table.pairs
                       if p.notes_label not in touched and p.wiki_label not in touched]
        table.conflicts = [c for c in table.conflicts
                           if c.surface not in touched
                           and not touched.intersection(c.candidates)]
        table.pairs.append(SynonymPair(notes_label, wiki_label, SynonymOrigin.MANUAL))
    return table


@dataclass
class MergeReport:
    textbook_entity_count: int
    kb_entity_count: int
    matched_count: int
    overlap_fraction: float
    new_link_count: int
    conflict_count: int
    origin_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "conflict_count": self.conflict_count,
            "kb_entity_count": self.kb_entity_count,
            "matched_count": self.matched_count,
            "new_link_count": self.new_link_count,
            "origin_counts": dict(sorted(self.origin_counts.items())),
            "overlap_fraction": self.overlap_fraction,
            "textbook_entity_count": self.textbook_entity_count,
        }


def _resolve(graph: KnowledgeGraph, label: str) -> EntityId | None:
    hits = graph.lookup(label)
    return hits[0] if hits else None


def merge_graphs(notes_graph: KnowledgeGraph, wiki_graph: KnowledgeGraph,
                 table: SynonymTable) -> tuple[KnowledgeGraph, MergeReport]:
    """Build the fused graph and a summary of how the two sides lined up.

    Matched entities collapse into one node whose canonical label comes from
    the side carrying an external id (the other label survives as an alias);
    aliases, categories, ids and provenance are unioned.  Every triple from
    both sides is re-added against the fused ids, so identical claims collapse
    with merged provenance.
    """
    matched: dict[EntityId, EntityId] = {}
    origin_by_notes_eid: dict[EntityId, SynonymOrigin] = {}
    wiki_taken: set[EntityId] = set()
    for pair in table.pairs:
        n = _resolve(notes_graph, pair.notes_label)
        w = _resolve(wiki_graph, pair.wiki_label)
        if n is None or w is None or n in matched:
            continue
        matched[n] = w
        origin_by_notes_eid[n] = pair.origin
        wiki_taken.add(w)

    fused = KnowledgeGraph()
    notes_ids: dict[EntityId, EntityId] = {}
    wiki_ids: dict[EntityId, EntityId] = {}
    fused_for_wiki: dict[EntityId, EntityId] = {}
    matched_fused: set[EntityId] = set()

    def adopt(label: str) -> EntityId:
        existing = fused.find_by_label(label)
        return existing if existing is not None else fused.create_entity(label)

    def copy_fields(dst: EntityId, src_graph: KnowledgeGraph, src: EntityId):
        src_entity = src_graph.entity(src)
        dst_entity = fused.entity(dst)
        for alias in src_entity.aliases:
            fused.add_alias(dst, alias)
        if normalize_label(src_entity.canonical_label) != dst_entity.canonical_label:
            fused.add_alias(dst, src_entity.canonical_label)
        dst_entity.categories.update(src_entity.categories)
        for xid in src_entity.external_ids:
            fused.add_external_id(dst, xid)
        dst_entity.provenance.update(src_entity.provenance)

    for entity in notes_graph.entities:
        w = matched.get(entity.id)
        if w is None:
            eid = adopt(entity.canonical_label)
            copy_fields(eid, notes_graph, entity.id)
        elif w in fused_for_wiki:  # several notes entities matched one KB item
            eid = fused_for_wiki[w]
            copy_fields(eid, notes_graph, entity.id)
        else:
            wiki_entity = wiki_graph.entity(w)
            keep_wiki = bool(wiki_entity.external_ids) or not entity.external_ids
            eid = adopt(wiki_entity.canonical_label if keep_wiki
                        else entity.canonical_label)
            copy_fields(eid, notes_graph, entity.id)
            copy_fields(eid, wiki_graph, w)
            fused_for_wiki[w] = eid
            wiki_ids[w] = eid
            matched_fused.add(eid)
        notes_ids[entity.id] = eid

    for entity in wiki_graph.entities:
        if entity.id in wiki_taken:
            continue
        eid = adopt(entity.canonical_label)
        copy_fields(eid, wiki_graph, entity.id)
        wiki_ids[entity.id] = eid

    def copy_triples(src_graph: KnowledgeGraph, id_map: dict[EntityId, EntityId]):
        for t in src_graph.triples:
            obj = id_map[t.object] if t.object_is_entity else t.object
            fused.add_triple(id_map[t.subject], t.relation, obj,
                             dict(t.qualifiers), source=set(t.provenance))

    copy_triples(notes_graph, notes_ids)
    copy_triples(wiki_graph, wiki_ids)

    new_links = _count_new_links(fused, matched_fused)
    origin_counts = Counter(o.value for o in origin_by_notes_eid.values())
    matched_count = len(matched)
    total = notes_graph.entity_count
    report = MergeReport(
        textbook_entity_count=total,
        kb_entity_count=wiki_graph.entity_count,
        matched_count=matched_count,
        overlap_fraction=matched_count / total if total else 0.0,
        new_link_count=new_links,
        conflict_count=len(table.conflicts),
        origin_counts=dict(origin_counts),
    )
    return fused, report


def _count_new_links(fused: KnowledgeGraph, matched_fused: set[EntityId]) -> int:
    """Notes-only claims connecting two KB-matched entities.

    These are edges the notes assert between items the KB already knows about
    but does not itself connect (in either direction), so they are candidate
    contributions back to the KB.
    """
    kb_pairs: set[tuple[EntityId, EntityId]] = set()
    for t in fused.triples:
        if t.object_is_entity and SourceTag.WIKIDATA in t.provenance:
            kb_pairs.add((min(t.subject, t.object), max(t.subject, t.object)))
    count = 0
    for t in fused.triples:
        if (t.object_is_entity
                and SourceTag.NOTES in t.provenance
                and SourceTag.WIKIDATA not in t.provenance
                and t.subject in matched_fused and t.object in matched_fused
                and (min(t.subject, t.object), max(t.subject, t.object)) not in kb_pairs):
            count += 1
    return count
