"""Template-based question answering over the fused graph.

Questions are matched against a fixed set of phrasings, mentions are resolved
to graph entities by character-trigram similarity, and each template walks a
specific edge pattern.  Anything that does not fit a template is reported as
unrecognized rather than guessed at.
"""

from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .graph import Direction, EntityId, KnowledgeGraph, Literal, Triple, TripleId
from .normalize import normalize_label

SCORE_FLOOR = 0.4
AMBIGUITY_EPSILON = 0.01

_USAGE_RELATIONS = {"uses", "usedTo", "usedIn", "use"}
_COMPOSITION_RELATIONS = {"has", "hasPart", "includes", "addedWith", "uses"}
_VALUE_RELATIONS = {"hasValue", "has", "hasProperty"}
_MORE_WORDS = {"more", "higher", "greater"}
_GREATER_POLARITY = {"greater", "more", "higher"}
_LESSER_POLARITY = {"less", "lower", "smaller", "fewer"}


class Template(enum.Enum):
    WHICH_X_USED_FOR_Y = "which_x_used_for_y"
    COMPARATOR_MORE_LESS = "comparator_more_less"
    COMPOSITION_OF_X_IN_Y = "composition_of_x_in_y"
    WHICH_X_OF_CATEGORY_FOR_Y = "which_x_of_category_for_y"
    VALUE_OF_PROPERTY_FOR_X = "value_of_property_for_x"
    UNRECOGNIZED = "unrecognized"


class QAError(Exception):
    pass


class UnrecognizedQuestionError(QAError):
    pass


class NoCandidateError(QAError):
    def __init__(self, mention: str):
        super().__init__(f"no entity matches {mention!r}")
        self.mention = mention


class AmbiguousEntityError(QAError):
    def __init__(self, mention: str, candidates: list[str]):
        super().__init__(f"{mention!r} could be any of: " + ", ".join(candidates))
        self.mention = mention
        self.candidates = candidates


class NoAnswerError(QAError):
    pass


@dataclass(frozen=True)
class ParsedQuestion:
    template: Template
    slots: dict

    def slot(self, name: str) -> str:
        return self.slots[name]


def _clean(text: str) -> str:
    return text.strip().rstrip("?").strip()


# template patterns, tried in order; the first hit wins
_COMPARATOR_RE = re.compile(
    r"^which\s+(?P<x>.+?)\s+has\s+(?P<direction>more|less|higher|lower|greater|smaller)"
    r"\s+(?P<prop>[^,:]+?)\s*[,:]\s*(?P<a>.+?)\s+or\s+(?P<b>.+)$",
    re.IGNORECASE)
_COMPOSITION_RE = re.compile(
    r"^what\s+is\s+the\s+composition\s+of\s+(?P<x>.+?)\s+in\s+(?P<y>.+)$",
    re.IGNORECASE)
_CATEGORY_FOR_RE = re.compile(
    r"^which\s+(?P<x>.+?)\s+(?:is|are)\s+used\s+(?:for|in|to)\s+(?P<y>.+)$",
    re.IGNORECASE)
_WHICH_USED_RE = re.compile(
    r"^what\s+are\s+(?:some\s+|the\s+)?(?P<x>.+?)\s+(?:used\s+)?for\s+(?P<y>.+)$",
    re.IGNORECASE)
_VALUE_RE = re.compile(
    r"^what\s+is\s+the\s+(?P<prop>.+?)\s+(?:for|of)\s+(?P<x>.+)$",
    re.IGNORECASE)


def parse_question(text: str) -> ParsedQuestion:
    """Classify a question and pull out its slots; never raises."""
    q = _clean(text)
    if m := _COMPARATOR_RE.match(q):
        return ParsedQuestion(Template.COMPARATOR_MORE_LESS, {
            "category": m.group("x"), "direction": m.group("direction").lower(),
            "property": m.group("prop"), "a": m.group("a"), "b": m.group("b")})
    if m := _COMPOSITION_RE.match(q):
        return ParsedQuestion(Template.COMPOSITION_OF_X_IN_Y,
                              {"part": m.group("x"), "whole": m.group("y")})
    if m := _CATEGORY_FOR_RE.match(q):
        return ParsedQuestion(Template.WHICH_X_OF_CATEGORY_FOR_Y,
                              {"category": m.group("x"), "target": m.group("y")})
    if m := _WHICH_USED_RE.match(q):
        return ParsedQuestion(Template.WHICH_X_USED_FOR_Y,
                              {"category": m.group("x"), "target": m.group("y")})
    if m := _VALUE_RE.match(q):
        return ParsedQuestion(Template.VALUE_OF_PROPERTY_FOR_X,
                              {"property": m.group("prop"), "entity": m.group("x")})
    return ParsedQuestion(Template.UNRECOGNIZED, {"text": q})


# -- mention resolution --------------------------------------------------------

def trigram_vector(text: str) -> Counter:
    """Character trigram counts of the normalized text.

    Strings shorter than a trigram get the whole string as their only
    feature so they can still match exactly.
    """
    norm = normalize_label(text)
    if not norm:
        return Counter()
    if len(norm) < 3:
        return Counter({norm: 1})
    return Counter(norm[i:i + 3] for i in range(len(norm) - 2))


def cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = sum(count * b[gram] for gram, count in a.items())
    if dot == 0:
        return 0.0
    norm_a = math.sqrt(sum(c * c for c in a.values()))
    norm_b = math.sqrt(sum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


class TrigramResolver:
    """Maps a free-text mention to graph entities by surface similarity."""

    def __init__(self, graph: KnowledgeGraph):
        self.graph = graph
        self._vectors: dict[EntityId, list[Counter]] = {}
        for entity in graph.entities:
            surfaces = {entity.canonical_label} | set(entity.aliases)
            self._vectors[entity.id] = [trigram_vector(s) for s in surfaces if s]

    def score(self, mention_vector: Counter, eid: EntityId) -> float:
        vectors = self._vectors.get(eid, ())
        return max((cosine(mention_vector, v) for v in vectors), default=0.0)

    def resolve(self, mention: str, top_k: int = 5,
                floor: float = SCORE_FLOOR) -> list[tuple[EntityId, float]]:
        """Best-matching entities as (id, score), best first."""
        vec = trigram_vector(mention)
        if not vec:
            raise NoCandidateError(mention)
        scored = [(eid, self.score(vec, eid)) for eid in self._vectors]
        scored = [(eid, s) for eid, s in scored if s >= floor]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        if not scored:
            raise NoCandidateError(mention)
        return scored[:top_k]

    def resolve_one(self, mention: str, floor: float = SCORE_FLOOR) -> EntityId:
        """Resolve to a single entity or refuse when the top scores tie."""
        ranked = self.resolve(mention, top_k=5, floor=floor)
        top = ranked[0][1]
        tied = [eid for eid, score in ranked if top - score <= AMBIGUITY_EPSILON]
        if len(tied) > 1:
            raise AmbiguousEntityError(
                mention, [self.graph.entity(eid).canonical_label for eid in tied])
        return ranked[0][0]


def resolve_mention(graph: KnowledgeGraph, mention: str,
                    top_k: int = 5) -> list[tuple[EntityId, float]]:
    return TrigramResolver(graph).resolve(mention, top_k=top_k)


# -- answering -----------------------------------------------------------------

@dataclass
class Answer:
    template: Template
    entities: list[tuple[EntityId, float]] = field(default_factory=list)
    supporting_triples: list[TripleId] = field(default_factory=list)
    verdict: str | None = None

    def labels(self, graph: KnowledgeGraph) -> list[str]:
        return [graph.entity(eid).canonical_label for eid, _ in self.entities]


def _category_score(graph: KnowledgeGraph, eid: EntityId,
                    category_vector: Counter) -> tuple[float, list[TripleId]]:
    """How well an entity's declared kinds match the asked-for category."""
    best = 0.0
    evidence: list[TripleId] = []
    entity = graph.entity(eid)
    for cat in entity.categories:
        best = max(best, cosine(category_vector, trigram_vector(cat)))
    for t in graph.neighbors(eid, Direction.FORWARD, {"instanceOf", "subclassOf"}):
        if not t.object_is_entity:
            continue
        s = cosine(category_vector, trigram_vector(graph.entity(t.object).canonical_label))
        if s > best or (s >= SCORE_FLOOR and s == best):
            evidence = [t.id]
        best = max(best, s)
    return best, evidence


def _usage_edges(graph: KnowledgeGraph, target: EntityId) -> dict[EntityId, list[TripleId]]:
    """Entities connected to the target by a usage claim, with the edge ids."""
    users: dict[EntityId, list[TripleId]] = {}
    for t in graph.neighbors(target, Direction.BACKWARD, _USAGE_RELATIONS):
        users.setdefault(t.subject, []).append(t.id)
    # "target uses X" also marks X as involved in the target activity
    for t in graph.neighbors(target, Direction.FORWARD, {"uses"}):
        if t.object_is_entity:
            users.setdefault(t.object, []).append(t.id)
    return users


def _answer_usage(graph: KnowledgeGraph, resolver: TrigramResolver,
                  parsed: ParsedQuestion) -> Answer:
    target = resolver.resolve_one(parsed.slot("target"))
    users = _usage_edges(graph, target)
    users.pop(target, None)
    if not users:
        raise NoAnswerError(f"nothing recorded as used for "
                            f"{graph.entity(target).canonical_label!r}")
    category_vector = trigram_vector(parsed.slot("category"))
    scored: list[tuple[EntityId, float, list[TripleId]]] = []
    for eid, edge_ids in users.items():
        cat_score, cat_evidence = _category_score(graph, eid, category_vector)
        scored.append((eid, cat_score, edge_ids + cat_evidence))
    if any(score >= SCORE_FLOOR for _, score, _ in scored):
        scored = [(eid, score, ev) for eid, score, ev in scored if score >= SCORE_FLOOR]
    else:
        # generic category words like "applications"; keep every user
        scored = [(eid, 1.0, ev) for eid, _score, ev in scored]
    scored.sort(key=lambda row: (-row[1], row[0]))
    answer = Answer(parsed.template)
    for eid, score, evidence in scored:
        answer.entities.append((eid, round(score, 6)))
        for tid in evidence:
            if tid not in answer.supporting_triples:
                answer.supporting_triples.append(tid)
    return answer


def _property_matches(vector: Counter, text: str) -> bool:
    return cosine(vector, trigram_vector(text)) >= SCORE_FLOOR


def _answer_comparator(graph: KnowledgeGraph, resolver: TrigramResolver,
                       parsed: ParsedQuestion) -> Answer:
    a = resolver.resolve_one(parsed.slot("a"))
    b = resolver.resolve_one(parsed.slot("b"))
    prop_vector = trigram_vector(parsed.slot("property"))
    want_more = parsed.slot("direction") in _MORE_WORDS
    for t in graph.neighbors(a, Direction.BOTH, {"hasComparator"}):
        if not t.object_is_entity or {t.subject, t.object} != {a, b}:
            continue
        prop = t.qualifiers.get("property", t.qualifiers.get("context", ""))
        if prop and not _property_matches(prop_vector, prop):
            continue
        polarity = t.qualifiers.get("polarity", "greater").lower()
        if polarity in _GREATER_POLARITY:
            greater = t.subject
        elif polarity in _LESSER_POLARITY:
            greater = t.object
        else:
            continue
        lesser = t.object if greater == t.subject else t.subject
        winner = greater if want_more else lesser
        return Answer(parsed.template, [(winner, 1.0)], [t.id],
                      verdict=graph.entity(winner).canonical_label)
    raise NoAnswerError(
        f"no recorded comparison of {parsed.slot('property')!r} between "
        f"{graph.entity(a).canonical_label!r} and {graph.entity(b).canonical_label!r}")


def _render_object(graph: KnowledgeGraph, t: Triple) -> str:
    if t.object_is_entity:
        return graph.entity(t.object).canonical_label
    assert isinstance(t.object, Literal)
    return t.object.render()


def _answer_composition(graph: KnowledgeGraph, resolver: TrigramResolver,
                        parsed: ParsedQuestion) -> Answer:
    part = resolver.resolve_one(parsed.slot("part"))
    whole = resolver.resolve_one(parsed.slot("whole"))
    candidates: list[Triple] = []
    for t in graph.neighbors(whole, Direction.FORWARD, _COMPOSITION_RELATIONS):
        if t.object_is_entity and t.object == part:
            candidates.append(t)
    for t in graph.neighbors(part, Direction.FORWARD, {"partOf"}):
        if t.object_is_entity and t.object == whole:
            candidates.append(t)
    if not candidates:
        raise NoAnswerError(
            f"no composition recorded for {graph.entity(part).canonical_label!r} "
            f"in {graph.entity(whole).canonical_label!r}")
    verdict = None
    chosen = candidates[0]
    for t in candidates:
        for key in ("composition", "amount", "fraction", "percentage", "value"):
            if key in t.qualifiers:
                verdict = t.qualifiers[key]
                chosen = t
                break
        if verdict is not None:
            break
    return Answer(parsed.template, [(part, 1.0)], [chosen.id], verdict=verdict)


def _answer_value(graph: KnowledgeGraph, resolver: TrigramResolver,
                  parsed: ParsedQuestion) -> Answer:
    entity = resolver.resolve_one(parsed.slot("entity"))
    prop_vector = trigram_vector(parsed.slot("property"))
    best: tuple[float, Triple] | None = None
    for t in graph.neighbors(entity, Direction.FORWARD, _VALUE_RELATIONS):
        surfaces = [t.qualifiers[k] for k in ("property", "context") if k in t.qualifiers]
        if t.object_is_entity:
            surfaces.append(graph.entity(t.object).canonical_label)
        score = max((cosine(prop_vector, trigram_vector(s)) for s in surfaces),
                    default=0.0)
        if score >= SCORE_FLOOR and (best is None or score > best[0]):
            best = (score, t)
    if best is None:
        raise NoAnswerError(
            f"no {parsed.slot('property')!r} recorded for "
            f"{graph.entity(entity).canonical_label!r}")
    _score, t = best
    return Answer(parsed.template, [(entity, round(_score, 6))], [t.id],
                  verdict=_render_object(graph, t))


def answer(graph: KnowledgeGraph, question: str | ParsedQuestion,
           resolver: TrigramResolver | None = None) -> Answer:
    """Answer a templated question against the graph.

    Raises UnrecognizedQuestionError for off-template phrasings,
    NoCandidateError / AmbiguousEntityError when a mention cannot be pinned
    to one entity, and NoAnswerError when the graph has no matching claim.
    """
    parsed = question if isinstance(question, ParsedQuestion) else parse_question(question)
    if parsed.template is Template.UNRECOGNIZED:
        raise UnrecognizedQuestionError(f"question does not fit a template: "
                                        f"{parsed.slots.get('text', '')!r}")
    resolver = resolver or TrigramResolver(graph)
    if parsed.template in (Template.WHICH_X_USED_FOR_Y,
                           Template.WHICH_X_OF_CATEGORY_FOR_Y):
        return _answer_usage(graph, resolver, parsed)
    if parsed.template is Template.COMPARATOR_MORE_LESS:
        return _answer_comparator(graph, resolver, parsed)
    if parsed.template is Template.COMPOSITION_OF_X_IN_Y:
        return _answer_composition(graph, resolver, parsed)
    return _answer_value(graph, resolver, parsed)
