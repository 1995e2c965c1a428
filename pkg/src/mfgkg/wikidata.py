"""Wikidata access: entity linking, term lookup, and neighborhood expansion.

All HTTP goes through one client that can record responses to a fixture
directory and later replay them byte-for-byte, so the full pipeline runs
offline and deterministically.  Fixture files are named by a hash of the
request, and each file keeps the request alongside the response for
debuggability.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .graph import (
    KnowledgeGraph, RelationKind, RelationOrigin, WIKIDATA_RELATIONS,
)
from .normalize import SourceTag, normalize_label

DEFAULT_SPARQL_URL = "https://query.wikidata.org/sparql"
DEFAULT_LINKER_URL = "https://api.dbpedia-spotlight.org/en/annotate"

_QID_RE = re.compile(r"^Q[1-9]\d*$")
_PID_RE = re.compile(r"^P[1-9]\d*$")
_URI_TAIL_RE = re.compile(r"([QP][1-9]\d*)$")


class NetworkError(Exception):
    """The endpoint could not be reached or kept failing after retries."""


class MalformedResponseError(Exception):
    """The endpoint answered, but not in the shape we expect."""


class FixtureMissingError(Exception):
    """Replay mode, but no recorded response exists for this request."""


class UnknownRelationError(ValueError):
    """Requested a property outside the supported whitelist."""


@dataclass(frozen=True, order=True)
class QId:
    value: str

    def __post_init__(self):
        if not _QID_RE.match(self.value):
            raise ValueError(f"not a Q-id: {self.value!r}")

    @property
    def num(self) -> int:
        return int(self.value[1:])


@dataclass(frozen=True, order=True)
class PId:
    value: str

    def __post_init__(self):
        if not _PID_RE.match(self.value):
            raise ValueError(f"not a P-id: {self.value!r}")

    @property
    def num(self) -> int:
        return int(self.value[1:])


_PID_TO_NAME: dict[str, str] = {pid: name for name, pid in WIKIDATA_RELATIONS.items()}


def whitelist() -> list[PId]:
    """Every property the expander will follow, in numeric order."""
    return sorted((PId(pid) for pid in _PID_TO_NAME), key=lambda p: p.num)


def relation_for(pid: PId) -> RelationKind:
    try:
        name = _PID_TO_NAME[pid.value]
    except KeyError:
        raise UnknownRelationError(f"{pid.value} is not whitelisted") from None
    return RelationKind(name, RelationOrigin.WIKIDATA_P, pid.value)


@dataclass
class EndpointConfig:
    sparql_url: str = DEFAULT_SPARQL_URL
    linker_url: str = DEFAULT_LINKER_URL
    confidence_threshold: float = 0.5
    max_depth: int = 2
    rate_limit: float = 2.0  # requests per second; 0 disables throttling
    retries: int = 2
    timeout: float = 30.0
    parallelism: int = 4  # reserved; requests are currently issued serially
    offline_fixture_dir: str | Path | None = None
    record: bool = False


class HttpTransport:
    """Rate-limited GET with retry on 5xx and connection errors.

    ``clock`` and ``sleep`` are injectable so tests can verify pacing
    without waiting.
    """

    def __init__(self, config: EndpointConfig, session=None,
                 clock=time.monotonic, sleep=time.sleep):
        self.config = config
        self.session = session or requests.Session()
        self.clock = clock
        self.sleep = sleep
        self._min_interval = 1.0 / config.rate_limit if config.rate_limit > 0 else 0.0
        self._last: float | None = None

    def _throttle(self):
        if self._min_interval <= 0:
            return
        now = self.clock()
        if self._last is not None:
            remaining = self._last + self._min_interval - now
            if remaining > 0:
                self.sleep(remaining)
                now = self.clock()
        self._last = now

    def get_json(self, url: str, params: dict[str, str]) -> dict:
        last_error: Exception | None = None
        for _attempt in range(self.config.retries + 1):
            self._throttle()
            try:
                resp = self.session.get(
                    url, params=params, timeout=self.config.timeout,
                    headers={"Accept": "application/json"})
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = NetworkError(f"HTTP {resp.status_code} from {url}")
                continue
            if resp.status_code != 200:
                raise NetworkError(f"HTTP {resp.status_code} from {url}")
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponseError(f"non-JSON response from {url}") from exc
        raise NetworkError(
            f"giving up on {url} after {self.config.retries + 1} attempts: {last_error}")


def request_fingerprint(url: str, params: dict[str, str]) -> str:
    payload = json.dumps({"params": params, "url": url},
                         sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:24]


class KBClient:
    """Issues SPARQL and linker requests, optionally via recorded fixtures."""

    def __init__(self, config: EndpointConfig | None = None, transport: HttpTransport | None = None):
        self.config = config or EndpointConfig()
        self._transport = transport

    def _fixture_path(self, url: str, params: dict[str, str]) -> Path:
        assert self.config.offline_fixture_dir is not None
        return Path(self.config.offline_fixture_dir) / (
            request_fingerprint(url, params) + ".json")

    def _get(self, url: str, params: dict[str, str]) -> dict:
        cfg = self.config
        if cfg.offline_fixture_dir is not None and not cfg.record:
            path = self._fixture_path(url, params)
            if not path.exists():
                raise FixtureMissingError(
                    f"no recorded response for {url} ({path.name})")
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        if self._transport is None:
            self._transport = HttpTransport(cfg)
        data = self._transport.get_json(url, params)
        if cfg.offline_fixture_dir is not None and cfg.record:
            path = self._fixture_path(url, params)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(
                {"request": {"params": params, "url": url}, "response": data},
                sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
        return data

    def sparql(self, query: str) -> list[dict]:
        data = self._get(self.config.sparql_url, {"format": "json", "query": query})
        try:
            return data["results"]["bindings"]
        except (KeyError, TypeError):
            raise MalformedResponseError("SPARQL response missing results.bindings") from None

    def annotate(self, text: str) -> dict:
        return self._get(self.config.linker_url, {
            "confidence": repr(self.config.confidence_threshold),
            "text": text,
        })


# -- entity linking -----------------------------------------------------------

@dataclass(frozen=True)
class LinkedMention:
    surface: str
    item: QId
    offset: int
    confidence: float


def link_text(text: str, config: EndpointConfig | None = None,
              client: KBClient | None = None) -> list[LinkedMention]:
    """Annotate free text, keeping confident KB mentions ordered by offset.

    A mention must carry an item id and meet the configured confidence
    threshold; when one item is spotted several times the highest-confidence
    occurrence wins.
    """
    if not text.strip():
        raise ValueError("text is empty")
    client = client or KBClient(config)
    data = client.annotate(text)
    if not isinstance(data, dict):
        raise MalformedResponseError("linker response is not an object")
    resources = data.get("Resources") or []
    best: dict[QId, LinkedMention] = {}
    for res in resources:
        if not isinstance(res, dict):
            continue
        uri = str(res.get("@URI", ""))
        m = _URI_TAIL_RE.search(uri)
        if m is None or not m.group(1).startswith("Q"):
            continue
        try:
            item = QId(m.group(1))
            confidence = float(res.get("@similarityScore", 0.0))
            offset = int(res.get("@offset", 0))
        except (TypeError, ValueError):
            continue
        if confidence < client.config.confidence_threshold:
            continue
        mention = LinkedMention(str(res.get("@surfaceForm", "")), item, offset, confidence)
        old = best.get(item)
        if old is None or (confidence, -offset) > (old.confidence, -old.offset):
            best[item] = mention
    return sorted(best.values(), key=lambda m: (m.offset, m.item.num))


# -- term lookup --------------------------------------------------------------

def _sparql_quote(term: str) -> str:
    return term.replace("\\", "\\\\").replace('"', '\\"')


_LOOKUP_QUERY = (
    'SELECT DISTINCT ?item WHERE {{ '
    '{{ ?item rdfs:label "{term}"@en . }} UNION '
    '{{ ?item skos:altLabel "{term}"@en . }} '
    '}} LIMIT 5'
)


def lookup_item(term: str, config: EndpointConfig | None = None,
                client: KBClient | None = None) -> QId | None:
    """Find the KB item whose English label or alias matches, if any."""
    norm = normalize_label(term)
    if not norm:
        raise ValueError("term is empty")
    client = client or KBClient(config)
    rows = client.sparql(_LOOKUP_QUERY.format(term=_sparql_quote(norm)))
    for row in rows:
        uri = str(row.get("item", {}).get("value", ""))
        m = _URI_TAIL_RE.search(uri)
        if m is not None and m.group(1).startswith("Q"):
            return QId(m.group(1))
    return None


# -- neighborhood expansion ----------------------------------------------------

@dataclass
class ExpansionResult:
    triples: list[tuple[QId, PId, QId]] = field(default_factory=list)
    labels: dict[QId, str] = field(default_factory=dict)
    partial: bool = False

    def to_dict(self) -> dict:
        return {
            "labels": {q.value: label for q, label in sorted(self.labels.items())},
            "partial": self.partial,
            "triples": [[s.value, p.value, o.value] for s, p, o in self.triples],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExpansionResult":
        triples = [(QId(s), PId(p), QId(o)) for s, p, o in data.get("triples", [])]
        labels = {QId(q): str(label) for q, label in data.get("labels", {}).items()}
        return cls(triples, labels, bool(data.get("partial", False)))

    def save(self, path: str | Path):
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ExpansionResult":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


_FORWARD_QUERY = (
    "SELECT ?p ?o WHERE {{ wd:{q} ?p ?o . VALUES ?p {{ {values} }} }}"
)
_BACKWARD_QUERY = (
    "SELECT ?p ?s WHERE {{ ?s ?p wd:{q} . VALUES ?p {{ {values} }} }}"
)
_LABEL_QUERY = (
    'SELECT ?item ?label WHERE {{ VALUES ?item {{ {items} }} '
    '?item rdfs:label ?label . FILTER(LANG(?label) = "en") }}'
)

_LABEL_CHUNK = 50


def _binding_id(row: dict, var: str) -> str | None:
    uri = str(row.get(var, {}).get("value", ""))
    m = _URI_TAIL_RE.search(uri)
    return m.group(1) if m else None


def expand(seeds: list[QId], relations: list[PId],
           config: EndpointConfig | None = None,
           client: KBClient | None = None) -> ExpansionResult:
    """Breadth-first neighborhood of the seeds along whitelisted properties.

    Walks ``config.max_depth`` hops in both edge directions.  A failed
    request skips that frontier item and marks the result partial instead of
    aborting the whole expansion.
    """
    seed_list = sorted(set(seeds), key=lambda q: q.num)
    if not seed_list:
        raise ValueError("no seeds given")
    rel_list = sorted(set(relations), key=lambda p: p.num)
    for pid in rel_list:
        relation_for(pid)  # raises UnknownRelationError outside the whitelist
    result = ExpansionResult()
    if not rel_list:
        result.labels = _fetch_labels(seed_list, client or KBClient(config))
        return result
    client = client or KBClient(config)
    values = " ".join(f"wdt:{p.value}" for p in rel_list)

    seen_triples: set[tuple[str, str, str]] = set()
    visited: set[QId] = set()
    frontier = list(seed_list)
    for _hop in range(max(client.config.max_depth, 0)):
        next_items: set[QId] = set()
        for item in frontier:
            if item in visited:
                continue
            visited.add(item)
            for query, subject_side in ((_FORWARD_QUERY, True), (_BACKWARD_QUERY, False)):
                q = query.format(q=item.value, values=values)
                try:
                    rows = client.sparql(q)
                except NetworkError:
                    result.partial = True
                    continue
                for row in rows:
                    pid_str = _binding_id(row, "p")
                    other_str = _binding_id(row, "o" if subject_side else "s")
                    if (pid_str is None or pid_str not in _PID_TO_NAME
                            or other_str is None or not other_str.startswith("Q")):
                        continue
                    other = QId(other_str)
                    triple = ((item.value, pid_str, other.value) if subject_side
                              else (other.value, pid_str, item.value))
                    if triple not in seen_triples:
                        seen_triples.add(triple)
                        result.triples.append(
                            (QId(triple[0]), PId(triple[1]), QId(triple[2])))
                    if other not in visited:
                        next_items.add(other)
        frontier = sorted(next_items, key=lambda q: q.num)

    result.triples.sort(key=lambda t: (t[0].num, t[1].num, t[2].num))
    mentioned = sorted({q for s, _p, o in result.triples for q in (s, o)} | set(seed_list),
                       key=lambda q: q.num)
    result.labels = _fetch_labels(mentioned, client, result)
    return result


def _fetch_labels(items: list[QId], client: KBClient,
                  result: ExpansionResult | None = None) -> dict[QId, str]:
    labels: dict[QId, str] = {}
    for start in range(0, len(items), _LABEL_CHUNK):
        chunk = items[start:start + _LABEL_CHUNK]
        query = _LABEL_QUERY.format(items=" ".join(f"wd:{q.value}" for q in chunk))
        try:
            rows = client.sparql(query)
        except NetworkError:
            if result is not None:
                result.partial = True
            rows = []
        for row in rows:
            qid_str = _binding_id(row, "item")
            label = str(row.get("label", {}).get("value", ""))
            if qid_str is not None and qid_str.startswith("Q") and label:
                labels.setdefault(QId(qid_str), label)
    for q in items:
        labels.setdefault(q, q.value.lower())
    return labels


# -- graph import ---------------------------------------------------------------

def import_raw(raw: ExpansionResult, graph: KnowledgeGraph) -> KnowledgeGraph:
    """Materialize an expansion into the graph; returns the same graph.

    Items are keyed by their external id, so re-importing is a no-op.  When
    two different items share a label, the later one gets a disambiguated
    canonical label ("steel (q123)") with the plain label kept as an alias.
    """
    def entity_for(qid: QId) -> int:
        eid = graph.find_by_external_id(qid.value)
        if eid is not None:
            return eid
        label = normalize_label(raw.labels.get(qid, "")) or qid.value.lower()
        hit = graph.find_by_label(label)
        if hit is None:
            alias_hits = graph.find_by_alias(label)
            hit = min(alias_hits) if alias_hits else None
        if hit is not None and not graph.entity(hit).external_ids:
            eid = hit  # a notes-side entity adopts the KB identity
        elif hit is not None:
            disambiguated = f"{label} ({qid.value.lower()})"
            eid = graph.find_by_label(disambiguated)
            if eid is None:
                eid = graph.create_entity(disambiguated, source=SourceTag.WIKIDATA)
                graph.add_alias(eid, label)
        else:
            eid = graph.create_entity(label, source=SourceTag.WIKIDATA)
        graph.add_external_id(eid, qid.value)
        graph.entity(eid).provenance.add(SourceTag.WIKIDATA)
        return eid

    for subject, pid, obj in raw.triples:
        relation = relation_for(pid)
        graph.add_triple(entity_for(subject), relation, entity_for(obj),
                         source=SourceTag.WIKIDATA)
    return graph
