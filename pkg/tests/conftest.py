import json
from pathlib import Path

import pytest

from mfgkg import KnowledgeGraph, Literal, SourceTag, notes_to_triples, parse_notes

FIXTURES = Path(__file__).parent / "fixtures"
NOTES_FIXTURES = FIXTURES / "notes"


def jsonable(value):
    if isinstance(value, (tuple, list)):
        return [jsonable(v) for v in value]
    return value


def triple_key(triple) -> str:
    return json.dumps(triple, ensure_ascii=False)


def load_notes_cases() -> list[tuple[str, str, dict]]:
    cases = []
    for notes_path in sorted(NOTES_FIXTURES.glob("*.notes")):
        golden = json.loads(notes_path.with_suffix(".json").read_text(encoding="utf-8"))
        cases.append((notes_path.stem, notes_path.read_text(encoding="utf-8"), golden))
    return cases


def graph_with_formulas(formulas: dict[str, str]) -> KnowledgeGraph:
    """A graph holding one hasExpression edge per label."""
    g = KnowledgeGraph()
    for label, raw in formulas.items():
        eid = g.upsert_entity(label, source=SourceTag.NOTES)
        g.add_triple(eid, "hasExpression", Literal.expression(raw),
                     source=SourceTag.NOTES)
    return g


QA_NOTES = """\
# Machining processes
Planing: uses positive rake angle ;;
Coining: uses EDM ;;
EDM: instanceOf nontraditional manufacturing process
# Cutting tool materials
Alumina: hasComparator cermet (property=hardness) (polarity=greater) ;;
Positive rake angle: instanceOf tool geometry
# Alloys
Cast cobalt alloy: has tungsten (composition=38 %)
# Composites
Discontinuous fibers: hasValue 100 (property=length to diameter ratio)
"""


@pytest.fixture(scope="session")
def qa_graph() -> KnowledgeGraph:
    doc, diagnostics = parse_notes(QA_NOTES)
    assert not diagnostics
    g = KnowledgeGraph()
    notes_to_triples(doc, g)
    return g


def fusion_fixture_graphs() -> tuple[KnowledgeGraph, KnowledgeGraph]:
    """Eight notes entities of which exactly two also exist on the KB side."""
    notes = KnowledgeGraph()
    for label in ("milling", "turning", "casting", "welding",
                  "chip formation", "burr", "shear plane", "built-up edge"):
        notes.upsert_entity(label, source=SourceTag.NOTES)
    notes.add_triple(notes.find_by_label("milling"), "causes",
                     notes.find_by_label("chip formation"), source=SourceTag.NOTES)
    notes.add_triple(notes.find_by_label("milling"), "uses",
                     notes.find_by_label("casting"), source=SourceTag.NOTES)

    wiki = KnowledgeGraph()
    for qid, label in (("Q2", "milling"), ("Q3", "casting"),
                       ("Q28", "lathe"), ("Q40", "industrial robot")):
        eid = wiki.upsert_entity(label, source=SourceTag.WIKIDATA)
        wiki.add_external_id(eid, qid)
    wiki.add_triple(wiki.find_by_label("lathe"), "Use",
                    wiki.find_by_label("milling"), source=SourceTag.WIKIDATA)
    return notes, wiki
