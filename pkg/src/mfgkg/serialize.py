"""Graph persistence: tab-separated triples plus an entity sidecar.

The triple file carries subject_label, relation, object_label, qualifiers
(JSON object), source (comma-joined tags) and object_kind.  A companion
``<name>.nodes.tsv`` keeps entities that own no triple, their aliases,
categories and external ids, so import(export(g)) reproduces the graph
exactly.  An N-Triples-style line format (percent-encoded labels) is
supported for export only.
"""

from __future__ import annotations

import json
import os
import urllib.parse
from pathlib import Path

from .graph import (
    KnowledgeGraph, Literal, LiteralKind, RelationRegistry, SourceTag, Triple,
)

TRIPLE_COLUMNS = ("subject_label", "relation", "object_label", "qualifiers",
                  "source", "object_kind")
NODE_COLUMNS = ("label", "categories", "aliases", "external_ids", "sources")


class FormatError(ValueError):
    """Malformed graph file."""


def nodes_sidecar_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".nodes.tsv")


def _render_object(obj, graph: KnowledgeGraph) -> tuple[str, str]:
    if isinstance(obj, int):
        return graph.entity(obj).canonical_label, "entity"
    if obj.kind is LiteralKind.TEXT:
        return json.dumps(obj.value, ensure_ascii=False), "text"
    if obj.kind is LiteralKind.NUMBER:
        return repr(obj.value), "number"
    if obj.kind is LiteralKind.QUANTITY:
        return f"{obj.value!r} {obj.unit}", "quantity"
    return obj.value, "expr"


def _parse_object(label: str, kind: str, graph: KnowledgeGraph, source_tags):
    if kind == "entity":
        return graph.upsert_entity(label)
    if kind == "text":
        return Literal.text(json.loads(label))
    if kind == "number":
        return Literal.number(float(label))
    if kind == "quantity":
        value, _, unit = label.partition(" ")
        return Literal.quantity(float(value), unit)
    if kind == "expr":
        return Literal.expression(label)
    raise FormatError(f"unknown object kind {kind!r}")


def _sources_field(tags) -> str:
    return ",".join(sorted(tag.value for tag in tags))


def _parse_sources(fieldtext: str) -> set[SourceTag]:
    if not fieldtext:
        return set()
    try:
        return {SourceTag(part) for part in fieldtext.split(",")}
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def export_graph_tsv(graph: KnowledgeGraph, path: str | os.PathLike,
                     nodes_path: str | os.PathLike | None = None) -> tuple[Path, Path]:
    """Write the triple table and the entity sidecar; returns both paths."""
    path = Path(path)
    nodes = Path(nodes_path) if nodes_path is not None else nodes_sidecar_path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(TRIPLE_COLUMNS) + "\n")
        for t in graph.triples:
            obj_label, obj_kind = _render_object(t.object, graph)
            fh.write("\t".join((
                graph.entity(t.subject).canonical_label,
                t.relation.name,
                obj_label,
                json.dumps(t.qualifiers, sort_keys=True, ensure_ascii=False),
                _sources_field(t.provenance),
                obj_kind,
            )) + "\n")
    with open(nodes, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(NODE_COLUMNS) + "\n")
        for e in graph.entities:
            fh.write("\t".join((
                e.canonical_label,
                json.dumps(sorted(e.categories), ensure_ascii=False),
                json.dumps(sorted(e.aliases), ensure_ascii=False),
                json.dumps(sorted(e.external_ids), ensure_ascii=False),
                _sources_field(e.provenance),
            )) + "\n")
    return path, nodes


def _split_row(line: str, n_columns: int, path, lineno: int) -> list[str]:
    row = line.rstrip("\n").split("\t")
    if len(row) != n_columns:
        raise FormatError(f"{path}:{lineno}: expected {n_columns} columns, got {len(row)}")
    return row


def import_graph_tsv(path: str | os.PathLike,
                     nodes_path: str | os.PathLike | None = None,
                     registry: RelationRegistry | None = None) -> KnowledgeGraph:
    """Rebuild a graph from the triple table (and sidecar when present)."""
    path = Path(path)
    nodes = Path(nodes_path) if nodes_path is not None else nodes_sidecar_path(path)
    graph = KnowledgeGraph(registry=registry)

    if nodes.exists():
        with open(nodes, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header.split("\t") != list(NODE_COLUMNS):
                raise FormatError(f"{nodes}: bad header {header!r}")
            for lineno, line in enumerate(fh, 2):
                if not line.strip():
                    continue
                label, categories, aliases, external_ids, sources = _split_row(
                    line, len(NODE_COLUMNS), nodes, lineno)
                # every sidecar row is its own entity; never fold into an alias
                eid = graph.find_by_label(label)
                if eid is None:
                    eid = graph.create_entity(label)
                entity = graph.entity(eid)
                entity.categories.update(json.loads(categories))
                for alias in json.loads(aliases):
                    graph.add_alias(eid, alias)
                for xid in json.loads(external_ids):
                    graph.add_external_id(eid, xid)
                entity.provenance.update(_parse_sources(sources))

    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != list(TRIPLE_COLUMNS):
            raise FormatError(f"{path}: bad header {header!r}")
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            subject, relation, obj_label, qualifiers, sources, obj_kind = _split_row(
                line, len(TRIPLE_COLUMNS), path, lineno)
            tags = _parse_sources(sources)
            sid = graph.upsert_entity(subject)
            try:
                obj = _parse_object(obj_label, obj_kind, graph, tags)
                quals = json.loads(qualifiers)
                graph.add_triple(sid, relation, obj, quals, tags)
            except (ValueError, KeyError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return graph


def _encode(label: str) -> str:
    return urllib.parse.quote(label, safe="")


def export_ntriples(graph: KnowledgeGraph, path: str | os.PathLike) -> Path:
    """One "subject relation object ." line per triple, labels percent-encoded."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in graph.triples:
            obj_label, _ = _render_object(t.object, graph)
            if isinstance(t.object, Literal) and t.object.kind is LiteralKind.TEXT:
                obj_label = t.object.value  # unquoted; encoding below is enough
            fh.write(f"{_encode(graph.entity(t.subject).canonical_label)} "
                     f"{_encode(t.relation.name)} {_encode(obj_label)} .\n")
    return path
