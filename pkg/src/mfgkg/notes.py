"""Parser and triple compiler for the structured cheatsheet notation.

The notation packs chapter summaries into a few lines of text::

    # Imperfections in solids
    Defects: point defect: displaced ion (Frenkel defect); line defect ;;
    Crystal structure: BCC; FCC

Shape of a document:

* a line starting with ``#`` opens a chapter; the rest of the line is its
  title and everything up to the next heading is the chapter body
* the body is a ``;;``-separated list of subtopics
* a subtopic is a name, optionally followed by ``:`` and a ``;``-separated
  list of points
* a point is free text, optionally carrying parenthesised attributes, one
  inner ``name: detail`` split, and a single top-level ``=`` turning it into
  a formula definition (``stress = force / area``)

Separators are only recognized outside parentheses.  ``parse_notes`` never
raises: malformed segments are skipped and reported as diagnostics with
line/column positions.

Compilation into graph triples:

* chapter ``includes`` subtopic
* subtopic REL point-head, where REL is the leading relation keyword of the
  point if it names a registered notes relation (camelCase or spaced,
  case-insensitive, longest match), else ``has``
* ``owner: detail`` points additionally emit owner REL detail-head, and their
  attributes attach to the owner with a ``context`` qualifier holding the
  detail text ("Defects: point defect: displaced ion (Frenkel defect)" gives
  ``point defect alsoCalled frenkel defect {context: displaced ion}``)
* an attribute parsing as a number with optional unit becomes
  ``head hasValue <quantity>``; an attribute of the form ``key=value``
  becomes a qualifier on the point's main edge; anything else becomes
  ``head alsoCalled <attribute>``
* a ``lhs = rhs`` point emits ``lhs hasExpression <rhs>`` (``==`` does not
  trigger; the formula text is kept verbatim for the solver)
"""

from __future__ import annotations

import enum
import re
from bisect import bisect_right
from dataclasses import dataclass, field

from .graph import (
    Duplicate, KnowledgeGraph, Literal, NOTES_RELATIONS, SourceTag, TripleId,
)
from .normalize import collapse_ws
from .units import parse_quantity


@dataclass
class Point:
    text: str
    relation_hint: str | None = None
    attributes: list[str] = field(default_factory=list)
    expression: str | None = None


@dataclass
class Subtopic:
    name: str
    points: list[Point] = field(default_factory=list)


@dataclass
class Chapter:
    title: str
    subtopics: list[Subtopic] = field(default_factory=list)


@dataclass
class NotesDocument:
    chapters: list[Chapter] = field(default_factory=list)


class Severity(enum.Enum):
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    severity: Severity
    message: str


class _LineMap:
    def __init__(self, text: str):
        self._starts = [0]
        for i, c in enumerate(text):
            if c == "\n":
                self._starts.append(i + 1)

    def locate(self, offset: int) -> tuple[int, int]:
        idx = bisect_right(self._starts, offset) - 1
        return idx + 1, offset - self._starts[idx] + 1


def _build_hint_forms() -> dict[str, str]:
    forms: dict[str, str] = {}
    for name in NOTES_RELATIONS:
        spaced = re.sub(r"(?<=[a-z])(?=[A-Z])", " ", name).lower()
        forms[name.lower()] = name
        forms[spaced] = name
    return forms


_HINT_FORMS = _build_hint_forms()
_HEADING_RE = re.compile(r"^#+\s*")


def split_relation_hint(text: str) -> tuple[str | None, str]:
    """Leading registered relation keyword and the remaining head text.

    Longest match wins ("has part x" resolves to hasPart, not has); a keyword
    with nothing after it is not treated as a hint.
    """
    words = text.split()
    for n in (2, 1):
        if len(words) > n:  # must leave a non-empty head
            candidate = " ".join(words[:n]).lower()
            hit = _HINT_FORMS.get(candidate)
            if hit is not None:
                return hit, " ".join(words[n:])
    return None, " ".join(words)


def _find_toplevel_eq(raw: str) -> int | None:
    """Index of the first single "=" outside brackets; ==, <=, >=, != don't count."""
    depth = 0
    n = len(raw)
    for i, c in enumerate(raw):
        if c == "(":
            depth += 1
        elif c == ")":
            depth = max(0, depth - 1)
        elif (c == "=" and depth == 0
                and (i + 1 >= n or raw[i + 1] != "=")
                and (i == 0 or raw[i - 1] not in "=<>!")):
            return i
    return None


@dataclass
class _AttrScan:
    attributes: list[str]   # inner texts, verbatim
    outside: str            # text with bracket groups removed
    nested_at: int | None   # absolute offset of first nested "("
    unclosed_at: int | None  # absolute offset of an unmatched "("


def _scan_attributes(raw: str, base: int) -> _AttrScan:
    attributes: list[str] = []
    outside: list[str] = []
    depth = 0
    group_start = -1
    nested_at: int | None = None
    for i, c in enumerate(raw):
        if c == "(":
            depth += 1
            if depth == 1:
                group_start = i
            elif depth == 2 and nested_at is None:
                nested_at = base + i
        elif c == ")":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    attributes.append(raw[group_start + 1:i])
            else:
                outside.append(c)  # stray closer stays literal text
        elif depth == 0:
            outside.append(c)
    unclosed_at = base + group_start if depth > 0 else None
    return _AttrScan(attributes, "".join(outside), nested_at, unclosed_at)


def _parse_point(text: str, start: int, end: int, lm: _LineMap,
                 diags: list[ParseDiagnostic]) -> Point | None:
    raw = text[start:end]
    if not raw.strip():
        return None
    first = start + (len(raw) - len(raw.lstrip()))

    expression: str | None = None
    head_region = raw
    eq = _find_toplevel_eq(raw)
    if eq is not None:
        rhs = collapse_ws(raw[eq + 1:])
        if rhs:
            expression = rhs
            head_region = raw[:eq]
        else:
            line, col = lm.locate(start + eq)
            diags.append(ParseDiagnostic(
                line, col, Severity.WARNING, "expression right-hand side is empty"))

    scan = _scan_attributes(head_region, start)
    if scan.unclosed_at is not None:
        line, col = lm.locate(scan.unclosed_at)
        diags.append(ParseDiagnostic(line, col, Severity.ERROR, "unclosed bracket"))
        return None
    if scan.nested_at is not None:
        line, col = lm.locate(scan.nested_at)
        diags.append(ParseDiagnostic(
            line, col, Severity.WARNING, "nested brackets kept as literal text"))

    attributes = [a for a in scan.attributes if a.strip()]
    stripped = collapse_ws(scan.outside)
    if not stripped:
        line, col = lm.locate(first)
        if expression is not None:
            diags.append(ParseDiagnostic(
                line, col, Severity.WARNING, "expression left-hand side is empty"))
        elif attributes:
            diags.append(ParseDiagnostic(
                line, col, Severity.WARNING, "point has attributes but no text"))
        return None

    owner, sep, detail = stripped.partition(":")
    owner, detail = owner.strip(), detail.strip()
    if sep and not owner:
        line, col = lm.locate(first)
        diags.append(ParseDiagnostic(
            line, col, Severity.WARNING, "empty text before ':'"))
        owner, detail = detail, ""
        if not owner:  # the point was only separators
            return None
    if sep and detail:
        canonical = f"{owner}: {detail}"
    else:
        canonical = owner
    hint, _ = split_relation_hint(owner)
    return Point(text=canonical, relation_hint=hint,
                 attributes=attributes, expression=expression)


def _split_depth0(text: str, start: int, end: int, sep: str) -> list[tuple[int, int]]:
    """Split a region on a separator token outside parentheses."""
    spans = []
    depth = 0
    seg_start = start
    i = start
    step = len(sep)
    while i < end:
        c = text[i]
        if c == "(":
            depth += 1
        elif c == ")":
            depth = max(0, depth - 1)
        elif depth == 0 and text.startswith(sep, i) and i + step <= end:
            if sep == ";" and text.startswith(";;", i):
                i += 2  # belongs to the subtopic separator, skip it
                continue
            spans.append((seg_start, i))
            i += step
            seg_start = i
            continue
        i += 1
    spans.append((seg_start, end))
    return spans


def _find_depth0(text: str, start: int, end: int, char: str) -> int | None:
    depth = 0
    for i in range(start, end):
        c = text[i]
        if c == "(":
            depth += 1
        elif c == ")":
            depth = max(0, depth - 1)
        elif depth == 0 and c == char:
            return i
    return None


def _parse_body(text: str, start: int, end: int, lm: _LineMap,
                diags: list[ParseDiagnostic]) -> list[Subtopic]:
    subtopics = []
    for seg_start, seg_end in _split_depth0(text, start, end, ";;"):
        seg = text[seg_start:seg_end]
        if not seg.strip():
            continue
        first = seg_start + (len(seg) - len(seg.lstrip()))
        colon = _find_depth0(text, seg_start, seg_end, ":")
        if colon is None:
            name = collapse_ws(seg)
            subtopics.append(Subtopic(name=name))
            continue
        name = collapse_ws(text[seg_start:colon])
        if not name:
            line, col = lm.locate(first)
            diags.append(ParseDiagnostic(
                line, col, Severity.ERROR, "empty subtopic name"))
            continue
        sub = Subtopic(name=name)
        for p_start, p_end in _split_depth0(text, colon + 1, seg_end, ";"):
            point = _parse_point(text, p_start, p_end, lm, diags)
            if point is not None:
                sub.points.append(point)
        subtopics.append(sub)
    return subtopics


def parse_notes(text: str) -> tuple[NotesDocument, list[ParseDiagnostic]]:
    """Parse notation text; always returns a document plus diagnostics."""
    diags: list[ParseDiagnostic] = []
    doc = NotesDocument()
    lm = _LineMap(text)

    headers = []  # (title, line_start_offset, body_start_offset)
    first_content: int | None = None
    offset = 0
    for raw_line in text.split("\n"):
        content = raw_line.rstrip("\r")
        if content.startswith("#"):
            title = collapse_ws(_HEADING_RE.sub("", content))
            headers.append((title, offset, offset + len(raw_line) + 1))
        elif content.strip() and first_content is None and not headers:
            first_content = offset + (len(content) - len(content.lstrip()))
        offset += len(raw_line) + 1

    if not headers:
        diags.append(ParseDiagnostic(1, 1, Severity.ERROR, "no chapter found"))
        return doc, diags
    if first_content is not None:
        line, col = lm.locate(first_content)
        diags.append(ParseDiagnostic(
            line, col, Severity.ERROR, "content before first chapter heading"))

    for idx, (title, line_start, body_start) in enumerate(headers):
        body_end = headers[idx + 1][1] if idx + 1 < len(headers) else len(text)
        if not title:
            line, col = lm.locate(line_start)
            diags.append(ParseDiagnostic(
                line, col, Severity.ERROR, "empty chapter title"))
            continue
        body_start = min(body_start, body_end)
        subtopics = _parse_body(text, body_start, body_end, lm, diags)
        doc.chapters.append(Chapter(title=title, subtopics=subtopics))
    return doc, diags


def render_notes(doc: NotesDocument) -> str:
    """Write a document back out; re-parsing yields a structurally equal one."""
    chunks = []
    for chapter in doc.chapters:
        lines = [f"# {chapter.title}"]
        sub_lines = []
        for sub in chapter.subtopics:
            if sub.points:
                rendered = "; ".join(_render_point(p) for p in sub.points)
                sub_lines.append(f"{sub.name}: {rendered}")
            else:
                sub_lines.append(sub.name)
        if sub_lines:
            lines.append(" ;;\n".join(sub_lines))
        chunks.append("\n".join(lines))
    return "\n".join(chunks) + ("\n" if chunks else "")


def _render_point(p: Point) -> str:
    out = p.text
    for attr in p.attributes:
        out += f" ({attr})"
    if p.expression is not None:
        out += f" = {p.expression}"
    return out


def _split_owner_detail(text: str) -> tuple[str, str | None]:
    owner, sep, detail = text.partition(":")
    owner, detail = owner.strip(), detail.strip()
    if sep and detail:
        return owner, detail
    return owner or text.strip(), None


def _classify_attribute(attr: str) -> tuple[str, object]:
    """One of ("qualifier", (key, value)), ("value", Literal), ("alias", text)."""
    if "=" in attr:
        key, _, value = attr.partition("=")
        key, value = collapse_ws(key).lower(), collapse_ws(value)
        if key and value:
            return "qualifier", (key, value)
    q = parse_quantity(attr)
    if q is not None:
        return "value", Literal.from_quantity(q)
    return "alias", collapse_ws(attr)


def notes_to_triples(doc: NotesDocument, graph: KnowledgeGraph) -> list[TripleId]:
    """Compile a parsed document into graph triples; returns the new triple ids."""
    src = SourceTag.NOTES
    added: list[TripleId] = []

    def add(subject, relation, obj, qualifiers=None):
        result = graph.add_triple(subject, relation, obj, qualifiers, src)
        if not isinstance(result, Duplicate):
            added.append(result)

    for chapter in doc.chapters:
        chapter_id = graph.upsert_entity(chapter.title, source=src)
        for sub in chapter.subtopics:
            sub_id = graph.upsert_entity(sub.name, source=src)
            add(chapter_id, "includes", sub_id)
            for point in sub.points:
                owner, detail = _split_owner_detail(point.text)
                hint0, head0 = split_relation_hint(owner)
                rel0 = hint0 or "has"

                qualifiers: dict[str, str] = {}
                plain_attrs: list[tuple[str, object]] = []
                for attr in point.attributes:
                    kind, payload = _classify_attribute(attr)
                    if kind == "qualifier":
                        key, value = payload
                        qualifiers[key] = value
                    else:
                        plain_attrs.append((kind, payload))

                head_quantity = parse_quantity(head0) if rel0 == "hasValue" else None
                if head_quantity is not None:
                    add(sub_id, rel0, Literal.from_quantity(head_quantity), qualifiers)
                    continue  # a bare measured value has no entity to decorate
                head_id = graph.upsert_entity(head0, source=src)
                if head_id != sub_id:  # "Strain: strain = ..." needs no self-loop
                    add(sub_id, rel0, head_id, qualifiers)

                expr_owner = head_id
                context = None
                if detail is not None:
                    hint1, head1 = split_relation_hint(detail)
                    rel1 = hint1 or "has"
                    detail_quantity = parse_quantity(head1) if rel1 == "hasValue" else None
                    if detail_quantity is not None:
                        add(head_id, rel1, Literal.from_quantity(detail_quantity))
                    else:
                        detail_id = graph.upsert_entity(head1, source=src)
                        add(head_id, rel1, detail_id)
                        expr_owner = detail_id
                    context = detail

                if point.expression is not None:
                    add(expr_owner, "hasExpression", Literal.expression(point.expression))

                attr_quals = {"context": context} if context else None
                for kind, payload in plain_attrs:
                    if kind == "value":
                        add(head_id, "hasValue", payload, attr_quals)
                    else:
                        alias_id = graph.upsert_entity(payload, source=src)
                        add(head_id, "alsoCalled", alias_id, attr_quals)
    return added


def extract_expressions(doc: NotesDocument) -> list[tuple[str, str]]:
    """(entity label, raw formula) pairs for every ``lhs = rhs`` point."""
    pairs = []
    for chapter in doc.chapters:
        for sub in chapter.subtopics:
            for point in sub.points:
                if point.expression is None:
                    continue
                owner, detail = _split_owner_detail(point.text)
                _, head = split_relation_hint(detail if detail is not None else owner)
                pairs.append((head, point.expression))
    return pairs
