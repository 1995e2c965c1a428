"""Label normalization, edit-distance clustering and vocabulary ingestion.

Term lists scraped from different places (index pages, keyword lists, NER
output) spell the same concept in slightly different ways.  Everything that
ends up as a graph label goes through :func:`normalize_label`; near-duplicate
spellings are folded together with a thresholded Levenshtein clustering.
"""

from __future__ import annotations

import enum
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

# En dash, em dash, figure dash, hyphen variants, horizontal bar and the
# minus sign all collapse to the ASCII hyphen before comparison.
_DASHES = "‐‑‒–—―−"
_DASH_MAP = {ord(c): "-" for c in _DASHES}
_WS_RE = re.compile(r"\s+")


class SourceTag(enum.Enum):
    """Where a label, entity or triple came from."""

    NOTES = "notes"
    WIKIDATA = "wikidata"
    INDEX_WORDS = "index-words"
    KEYWORDS = "keywords"
    NER_OUTPUT = "ner-output"
    MANUAL = "manual"


def collapse_ws(text: str) -> str:
    """Collapse runs of whitespace to single spaces and trim the ends."""
    return _WS_RE.sub(" ", text).strip()


def normalize_label(label: str) -> str:
    """Canonical surface form: NFC, lowercase, collapsed whitespace, ASCII hyphens."""
    s = unicodedata.normalize("NFC", label)
    s = s.translate(_DASH_MAP)
    s = s.lower()
    s = _WS_RE.sub(" ", s).strip()
    return s


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over Unicode code points."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,        # deletion
                current[j - 1] + 1,     # insertion
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


@dataclass(frozen=True)
class Threshold:
    """Linking thresholds for variant clustering.

    Two labels link when the edit distance is at most ``absolute`` AND at most
    ``relative`` of the longer label's length.  Labels shorter than
    ``min_length`` never link to anything but an exact duplicate.
    """

    absolute: int = 3
    relative: float = 0.15
    min_length: int = 6

    def links(self, a: str, b: str) -> bool:
        if a == b:
            return True
        if min(len(a), len(b)) < self.min_length:
            return False
        if abs(len(a) - len(b)) > self.absolute:
            return False
        d = levenshtein(a, b)
        return d <= self.absolute and d / max(len(a), len(b)) <= self.relative


DEFAULT_THRESHOLD = Threshold()


@dataclass
class Cluster:
    """A group of spelling variants with a chosen representative."""

    representative: str
    members: list[str]


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def cluster_variants(labels: list[str], threshold: Threshold = DEFAULT_THRESHOLD) -> list[Cluster]:
    """Single-linkage clustering of labels under the linking threshold.

    The input may contain repeats; frequency only affects which member is
    picked as representative (most frequent, ties broken lexicographically).
    Every distinct label lands in exactly one cluster.
    """
    counts = Counter(labels)
    distinct = sorted(counts)
    uf = _UnionFind(distinct)
    for i, a in enumerate(distinct):
        for b in distinct[i + 1:]:
            if threshold.links(a, b):
                uf.union(a, b)
    groups: dict[str, list[str]] = {}
    for label in distinct:
        groups.setdefault(uf.find(label), []).append(label)
    clusters = []
    for members in groups.values():
        # most frequent member wins, ties broken lexicographically
        rep = min(members, key=lambda m: (-counts[m], m))
        clusters.append(Cluster(representative=rep, members=sorted(members)))
    clusters.sort(key=lambda c: c.representative)
    return clusters


@dataclass
class Vocabulary:
    """Deduplicated term list with a variant map and per-source counts."""

    terms: set[str] = field(default_factory=set)
    variant_map: dict[str, str] = field(default_factory=dict)
    source_counts: dict[SourceTag, int] = field(default_factory=dict)

    def canonical_of(self, label: str) -> str | None:
        norm = normalize_label(label)
        if norm in self.terms:
            return norm
        return self.variant_map.get(norm)

    def __contains__(self, label: str) -> bool:
        return self.canonical_of(label) is not None

    def to_dict(self) -> dict:
        return {
            "terms": sorted(self.terms),
            "variant_map": {k: self.variant_map[k] for k in sorted(self.variant_map)},
            "source_counts": {tag.value: n for tag, n in sorted(
                self.source_counts.items(), key=lambda kv: kv[0].value)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(
            terms=set(data.get("terms", ())),
            variant_map=dict(data.get("variant_map", {})),
            source_counts={SourceTag(k): v for k, v in data.get("source_counts", {}).items()},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def ingest_term_list(
    lines: list[str],
    source: SourceTag,
    vocab: Vocabulary | None = None,
    threshold: Threshold = DEFAULT_THRESHOLD,
) -> Vocabulary:
    """Fold a raw term list into a vocabulary.

    Lines starting with ``#`` and blank lines are ignored.  New labels first
    try to attach to an existing term (nearest link under the threshold), the
    remainder is clustered among itself; each new cluster's representative
    becomes a term and the other members become variants.  Canonical terms
    already in the vocabulary are never reassigned.
    """
    if vocab is None:
        vocab = Vocabulary()
    batch: Counter[str] = Counter()
    ingested = 0
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        norm = normalize_label(stripped)
        if not norm:
            continue
        ingested += 1
        batch[norm] += 1
    vocab.source_counts[source] = vocab.source_counts.get(source, 0) + ingested

    known = lambda label: label in vocab.terms or label in vocab.variant_map
    pending: Counter[str] = Counter()
    for label in sorted(batch):
        if known(label):
            continue
        best: tuple[int, str] | None = None
        for surface in vocab.terms | set(vocab.variant_map):
            if threshold.links(label, surface):
                d = levenshtein(label, surface)
                cand = (d, surface)
                if best is None or cand < best:
                    best = cand
        if best is not None:
            canonical = vocab.canonical_of(best[1])
            assert canonical is not None
            vocab.variant_map[label] = canonical
        else:
            pending[label] = batch[label]

    if pending:
        expanded = [label for label, n in sorted(pending.items()) for _ in range(n)]
        for cluster in cluster_variants(expanded, threshold):
            vocab.terms.add(cluster.representative)
            for member in cluster.members:
                if member != cluster.representative:
                    vocab.variant_map[member] = cluster.representative
    return vocab
