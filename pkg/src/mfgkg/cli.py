"""Command line front end.

Subcommands cover the full pipeline: compile notes into a graph, collect
vocabulary, expand seeds against the KB (with record/replay for offline
runs), fuse the two sides, then query the result with templated questions or
formula evaluation.

Exit codes: 0 success, 1 bad input data or an unanswerable query, 2 usage
errors, 3 network or fixture trouble.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .expressions import FormulaSyntaxError, SolverError, parse_bindings, solve
from .fusion import apply_manual_overrides, build_synonym_table, merge_graphs
from .graph import KnowledgeGraph, TripleId
from .normalize import SourceTag, Vocabulary, ingest_term_list
from .notes import Severity, notes_to_triples, parse_notes
from .qa import QAError, TrigramResolver, answer as answer_question
from .serialize import FormatError, export_graph_tsv, export_ntriples, import_graph_tsv
from .wikidata import (
    EndpointConfig, ExpansionResult, FixtureMissingError, KBClient, NetworkError,
    PId, QId, UnknownRelationError, expand as expand_neighborhood, import_raw,
    lookup_item, whitelist,
)

EXIT_DATA = 1
EXIT_ENV = 3

ENV_SPARQL = "MFGKG_SPARQL_URL"
ENV_LINKER = "MFGKG_LINKER_URL"
ENV_FIXTURES = "MFGKG_FIXTURE_DIR"


def _echo_json(data, compact: bool = False):
    if compact:
        text = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    else:
        text = json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False)
    click.echo(text)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_graph(path: Path) -> KnowledgeGraph:
    try:
        return import_graph_tsv(path)
    except (FormatError, OSError) as exc:
        _fail(str(exc), EXIT_DATA)
        raise AssertionError("unreachable")


def _triple_text(graph: KnowledgeGraph, tid: TripleId) -> str:
    t = graph.triple(tid)
    subj = graph.entity(t.subject).canonical_label
    obj = (graph.entity(t.object).canonical_label if t.object_is_entity
           else t.object.render())
    quals = "".join(f" {{{k}: {v}}}" for k, v in sorted(t.qualifiers.items()))
    return f"({subj} {t.relation.name} {obj}{quals})"


@click.group()
@click.version_option(version="0.1.0", prog_name="mfgkg")
def main():
    """Build and query a manufacturing knowledge graph."""


# -- ingest ---------------------------------------------------------------------

@main.command("ingest-notes")
@click.argument("files", nargs=-1,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="triple table to write (a .nodes.tsv sidecar appears next to it)")
@click.option("--lenient", is_flag=True,
              help="write the graph even when files have parse errors")
def ingest_notes(files: tuple[Path, ...], out: Path, lenient: bool):
    """Compile notation files into one graph and save it as TSV."""
    if not files:
        raise click.UsageError("no input files given")
    graph = KnowledgeGraph()
    error_count = 0
    for path in files:
        doc, diagnostics = parse_notes(path.read_text(encoding="utf-8"))
        for d in diagnostics:
            click.echo(f"{path}:{d.line}:{d.column}: {d.severity.value}: {d.message}",
                       err=True)
        error_count += sum(1 for d in diagnostics if d.severity is Severity.ERROR)
        notes_to_triples(doc, graph)
    if error_count and not lenient:
        _fail(f"{error_count} parse error(s); rerun with --lenient to write anyway",
              EXIT_DATA)
    export_graph_tsv(graph, out)
    _echo_json({
        "entities": graph.entity_count,
        "errors": error_count,
        "files": len(files),
        "out": str(out),
        "triples": graph.triple_count,
    })


@main.command("ingest-vocab")
@click.argument("files", nargs=-1,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--source", required=True,
              type=click.Choice([t.value for t in (
                  SourceTag.INDEX_WORDS, SourceTag.KEYWORDS,
                  SourceTag.NER_OUTPUT, SourceTag.MANUAL)]),
              help="where these term lists came from")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(path_type=Path),
              help="vocabulary JSON to create or update")
def ingest_vocab(files: tuple[Path, ...], source: str, vocab_path: Path):
    """Fold term lists into the deduplicated vocabulary."""
    if not files:
        raise click.UsageError("no input files given")
    vocab = Vocabulary.load(vocab_path) if vocab_path.exists() else Vocabulary()
    tag = SourceTag(source)
    for path in files:
        ingest_term_list(path.read_text(encoding="utf-8").splitlines(), tag, vocab)
    vocab.save(vocab_path)
    _echo_json({
        "source_counts": {t.value: n for t, n in sorted(
            vocab.source_counts.items(), key=lambda kv: kv[0].value)},
        "terms": len(vocab.terms),
        "variants": len(vocab.variant_map),
        "vocab": str(vocab_path),
    })


# -- KB access -------------------------------------------------------------------

def _endpoint_config(config_path: Path | None, fixture_dir: Path | None,
                     record: bool, replay: bool, max_depth: int | None) -> EndpointConfig:
    """Defaults, then --config file, then environment, then explicit flags."""
    cfg = EndpointConfig()
    if config_path is not None:
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise click.UsageError(f"cannot read config {config_path}: {exc}")
        for key in ("sparql_url", "linker_url", "confidence_threshold", "max_depth",
                    "rate_limit", "retries", "timeout", "fixture_dir"):
            if key in data:
                if key == "fixture_dir":
                    cfg.offline_fixture_dir = data[key]
                else:
                    setattr(cfg, key, data[key])
    if os.environ.get(ENV_SPARQL):
        cfg.sparql_url = os.environ[ENV_SPARQL]
    if os.environ.get(ENV_LINKER):
        cfg.linker_url = os.environ[ENV_LINKER]
    if os.environ.get(ENV_FIXTURES):
        cfg.offline_fixture_dir = os.environ[ENV_FIXTURES]
    if fixture_dir is not None:
        cfg.offline_fixture_dir = fixture_dir
    if max_depth is not None:
        cfg.max_depth = max_depth
    if record and replay:
        raise click.UsageError("--record and --replay are mutually exclusive")
    if replay and cfg.offline_fixture_dir is None:
        raise click.UsageError("--replay needs a fixture directory "
                               f"(--fixture-dir or ${ENV_FIXTURES})")
    if record and cfg.offline_fixture_dir is None:
        raise click.UsageError("--record needs a fixture directory "
                               f"(--fixture-dir or ${ENV_FIXTURES})")
    cfg.record = record
    return cfg


@main.command("expand")
@click.option("--seeds", default="", help="comma-separated item ids (Q...)")
@click.option("--terms", default="", help="comma-separated labels to look up as seeds")
@click.option("--relations", default="",
              help="comma-separated property ids; default: the full whitelist")
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="raw expansion JSON to write")
@click.option("--report", "report_path", type=click.Path(path_type=Path),
              help="where to write the run report JSON")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="endpoint settings JSON")
@click.option("--fixture-dir", type=click.Path(path_type=Path),
              help="directory for recorded responses")
@click.option("--record", is_flag=True, help="hit the network and save every response")
@click.option("--replay", is_flag=True, help="serve every request from recordings")
@click.option("--max-depth", type=int, default=None, help="expansion hops (default 2)")
def expand_cmd(seeds: str, terms: str, relations: str, out: Path,
               report_path: Path | None, config_path: Path | None,
               fixture_dir: Path | None, record: bool, replay: bool,
               max_depth: int | None):
    """Collect the KB neighborhood around seed items."""
    cfg = _endpoint_config(config_path, fixture_dir, record, replay, max_depth)
    client = KBClient(cfg)

    term_list = [t.strip() for t in terms.split(",") if t.strip()]
    seed_list = []
    term_results: dict[str, str | None] = {}
    try:
        for term in term_list:
            qid = lookup_item(term, client=client)
            term_results[term] = qid.value if qid else None
            if qid is not None:
                seed_list.append(qid)
        for chunk in seeds.split(","):
            chunk = chunk.strip()
            if chunk:
                seed_list.append(QId(chunk))
        if relations.strip():
            rel_list = [PId(p.strip()) for p in relations.split(",") if p.strip()]
        else:
            rel_list = whitelist()
        if not seed_list:
            raise click.UsageError("no seeds: give --seeds or resolvable --terms")
        result = expand_neighborhood(seed_list, rel_list, client=client)
    except (ValueError, UnknownRelationError) as exc:
        raise click.UsageError(str(exc))
    except FixtureMissingError as exc:
        _fail(str(exc), EXIT_ENV)
        return
    except NetworkError as exc:
        _fail(str(exc), EXIT_ENV)
        return
    result.save(out)
    summary = {
        "labels": len(result.labels),
        "out": str(out),
        "partial": result.partial,
        "seeds": sorted(q.value for q in set(seed_list)),
        "terms": term_results,
        "triples": len(result.triples),
    }
    if report_path is not None:
        report_path.write_text(
            json.dumps(summary, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")
    _echo_json(summary)


# -- fusion ----------------------------------------------------------------------

def _load_wiki_side(path: Path) -> KnowledgeGraph:
    if path.suffix.lower() == ".json":
        graph = KnowledgeGraph()
        import_raw(ExpansionResult.load(path), graph)
        return graph
    return import_graph_tsv(path)


@main.command("fuse")
@click.option("--notes", "notes_path", required=True,
              type=click.Path(exists=True, path_type=Path), help="notes graph TSV")
@click.option("--wiki", "wiki_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="KB side: raw expansion JSON or a graph TSV")
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="fused graph TSV to write")
@click.option("--report", "report_path", type=click.Path(path_type=Path),
              help="merge report JSON")
@click.option("--overrides", type=click.Path(exists=True, path_type=Path),
              help="manual synonym decisions, one notes-label<TAB>kb-label per line")
@click.option("--figures-dir", type=click.Path(path_type=Path),
              help="render overlap and origin charts here")
def fuse(notes_path: Path, wiki_path: Path, out: Path, report_path: Path | None,
         overrides: Path | None, figures_dir: Path | None):
    """Align the notes graph with the KB side and merge them."""
    try:
        notes_graph = import_graph_tsv(notes_path)
        wiki_graph = _load_wiki_side(wiki_path)
    except (FormatError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_DATA)
        return
    table = build_synonym_table(notes_graph, wiki_graph)
    if overrides is not None:
        try:
            apply_manual_overrides(table, overrides)
        except ValueError as exc:
            _fail(str(exc), EXIT_DATA)
            return
    fused, report = merge_graphs(notes_graph, wiki_graph, table)
    export_graph_tsv(fused, out)

    payload = report.to_dict()
    payload["pairs"] = [[p.notes_label, p.wiki_label, p.origin.value]
                        for p in table.pairs]
    payload["conflicts"] = [[c.surface, list(c.candidates), c.reason]
                            for c in table.conflicts]
    if report_path is not None:
        report_path.write_text(
            json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")
    if figures_dir is not None:
        from .report import save_merge_figures

        save_merge_figures(report, figures_dir)
    summary = report.to_dict()
    summary["out"] = str(out)
    _echo_json(summary)


# -- querying --------------------------------------------------------------------

def _answer_payload(graph: KnowledgeGraph, question: str) -> dict:
    result = answer_question(graph, question)
    return {
        "entities": [[graph.entity(eid).canonical_label, score]
                     for eid, score in result.entities],
        "supporting_triples": [_triple_text(graph, tid)
                               for tid in result.supporting_triples],
        "template": result.template.value,
        "verdict": result.verdict,
    }


@main.command("ask")
@click.argument("question")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, path_type=Path), help="graph TSV to query")
def ask(question: str, graph_path: Path):
    """Answer one templated question."""
    graph = _load_graph(graph_path)
    try:
        payload = _answer_payload(graph, question)
    except QAError as exc:
        _fail(str(exc), EXIT_DATA)
        return
    _echo_json(payload)


@main.command("calc")
@click.option("--graph", "graph_path", type=click.Path(exists=True, path_type=Path),
              help="graph TSV holding formula definitions")
@click.option("--target", required=True, help="label of the quantity to compute")
@click.option("--given", default="",
              help='known values, e.g. "force=10 N,area=1 cm^2"')
def calc(graph_path: Path | None, target: str, given: str):
    """Evaluate a formula chain from the graph."""
    graph = _load_graph(graph_path) if graph_path is not None else None
    try:
        bindings = parse_bindings(given)
        result = solve(target, bindings, graph)
    except (SolverError, FormulaSyntaxError, ValueError) as exc:
        _fail(str(exc), EXIT_DATA)
        return
    _echo_json({
        "target": target,
        "trace": [{
            "formula": step.formula,
            "label": step.label,
            "unit": step.quantity.unit,
            "value": step.quantity.value,
        } for step in result.trace],
        "unit": result.quantity.unit,
        "value": result.quantity.value,
        "warnings": result.warnings,
    })


@main.command("export")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["tsv", "ntriples"]),
              default="tsv", show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def export(graph_path: Path, fmt: str, out: Path):
    """Re-export a graph as TSV or N-Triples-style lines."""
    graph = _load_graph(graph_path)
    if fmt == "tsv":
        export_graph_tsv(graph, out)
    else:
        export_ntriples(graph, out)
    _echo_json({"entities": graph.entity_count, "format": fmt, "out": str(out),
                "triples": graph.triple_count})


@main.command("stats")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--figures-dir", type=click.Path(path_type=Path),
              help="render relation and source charts here")
def stats(graph_path: Path, figures_dir: Path | None):
    """Entity, triple, relation and per-source counts."""
    graph = _load_graph(graph_path)
    payload = graph.stats().as_dict()
    if figures_dir is not None:
        from .report import save_stats_figures

        paths = save_stats_figures(graph, figures_dir)
        payload["figures"] = [str(p) for p in paths]
    _echo_json(payload)


@main.command("repl")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, path_type=Path))
def repl(graph_path: Path):
    """Answer questions line by line; :quit ends the session."""
    graph = _load_graph(graph_path)
    resolver = TrigramResolver(graph)
    for line in sys.stdin:
        question = line.strip()
        if not question:
            continue
        if question == ":quit":
            break
        try:
            parsed = answer_question(graph, question, resolver)
            _echo_json({
                "entities": [[graph.entity(eid).canonical_label, score]
                             for eid, score in parsed.entities],
                "supporting_triples": [_triple_text(graph, tid)
                                       for tid in parsed.supporting_triples],
                "template": parsed.template.value,
                "verdict": parsed.verdict,
            }, compact=True)
        except QAError as exc:
            _echo_json({"error": type(exc).__name__, "message": str(exc)},
                       compact=True)


if __name__ == "__main__":
    main()
