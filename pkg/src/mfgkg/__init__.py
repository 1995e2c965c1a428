"""Manufacturing knowledge graph toolkit.

Compiles structured course notes into a graph, pulls the matching
neighborhood out of Wikidata, fuses the two, and answers templated domain
questions plus formula-based calculations over the result.
"""

from .expressions import (
    CyclicDefinitionError, DepthExceededError, EvaluationError,
    FormulaSyntaxError, SolveResult, SolverError, TraceStep, UnitMismatchError,
    UnsolvableError, free_vars, parse_bindings, parse_expr, solve,
)
from .fusion import (
    Conflict, MergeReport, SynonymOrigin, SynonymPair, SynonymTable,
    apply_manual_overrides, build_synonym_table, entity_surfaces, merge_graphs,
)
from .graph import (
    Direction, Duplicate, Entity, EntityId, GraphStats, KnowledgeGraph, Literal,
    LiteralKind, NOTES_RELATIONS, RelationKind, RelationOrigin, RelationRegistry,
    Triple, TripleId, WIKIDATA_RELATIONS, default_registry, relation_key,
)
from .normalize import (
    Cluster, DEFAULT_THRESHOLD, SourceTag, Threshold, Vocabulary,
    cluster_variants, collapse_ws, ingest_term_list, levenshtein, normalize_label,
)
from .notes import (
    Chapter, NotesDocument, ParseDiagnostic, Point, Severity, Subtopic,
    extract_expressions, notes_to_triples, parse_notes, render_notes,
)
from .qa import (
    AmbiguousEntityError, Answer, NoAnswerError, NoCandidateError, ParsedQuestion,
    QAError, Template, TrigramResolver, UnrecognizedQuestionError, answer, cosine,
    parse_question, resolve_mention, trigram_vector,
)
from .serialize import (
    FormatError, export_graph_tsv, export_ntriples, import_graph_tsv,
    nodes_sidecar_path,
)
from .units import (
    DIMENSIONLESS, IncompatibleUnitsError, Quantity, UnknownUnitError,
    convert, display_unit, parse_quantity, si_quantity,
)
from .wikidata import (
    EndpointConfig, ExpansionResult, FixtureMissingError, KBClient, LinkedMention,
    NetworkError, PId, QId, UnknownRelationError, expand, import_raw, link_text,
    lookup_item, whitelist,
)

__version__ = "0.1.0"
