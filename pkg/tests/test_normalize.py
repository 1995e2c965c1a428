"""Label normalization, edit distance, and vocabulary clustering."""

import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfgkg.graph import relation_key
from mfgkg.normalize import (
    DEFAULT_THRESHOLD,
    SourceTag,
    Threshold,
    Vocabulary,
    cluster_variants,
    ingest_term_list,
    levenshtein,
    normalize_label,
)

from conftest import FIXTURES


# Hand-computed distances, frozen.  kitten -> sitten -> sittin -> sitting.
FROZEN_DISTANCES = [
    ("kitten", "sitting", 3),
    ("ginzburg", "ginsberg", 2),
    ("landau-ginzburg-devonshire", "landau-ginsberg-devonshire", 2),
    ("landau-ginzburg-devonshire", "landau-ginsburg-devonshire", 1),
    ("landau-ginsburg-devonshire", "landau-ginsberg-devonshire", 1),
    ("", "", 0),
    ("", "abc", 3),
    ("abc", "", 3),
    ("same", "same", 0),
    ("a", "b", 1),
    ("flaw", "lawn", 2),
]


@pytest.mark.parametrize("a, b, expected", FROZEN_DISTANCES)
def test_levenshtein_frozen(a, b, expected):
    assert levenshtein(a, b) == expected


text_strategy = st.text(
    alphabet=string.ascii_lowercase + " -", min_size=0, max_size=12
)


@given(a=text_strategy, b=text_strategy)
def test_levenshtein_symmetry(a, b):
    assert levenshtein(a, b) == levenshtein(b, a)


@given(a=text_strategy, b=text_strategy, c=text_strategy)
@settings(max_examples=200)
def test_levenshtein_triangle(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@given(a=text_strategy, b=text_strategy)
def test_levenshtein_bounds(a, b):
    d = levenshtein(a, b)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
    assert (d == 0) == (a == b)


@given(st.text(max_size=40))
def test_normalize_idempotent(s):
    once = normalize_label(s)
    assert normalize_label(once) == once


def test_normalize_folds_case_space_and_dashes():
    assert normalize_label("  Landau–Ginzburg—Devonshire ") == (
        "landau-ginzburg-devonshire"
    )
    assert normalize_label("Surface\tRoughness") == "surface roughness"
    assert normalize_label("MRR") == "mrr"


def test_relation_key_drops_spacing_and_case():
    assert relation_key("Instance of") == relation_key("instanceOf")
    assert relation_key("has_part") == relation_key("hasPart")
    assert relation_key("usedTo") != relation_key("usedIn")


class TestThreshold:
    def test_short_labels_never_link(self):
        # "burr" vs "burn" is distance 1 but below the length floor
        assert not DEFAULT_THRESHOLD.links("burr", "burn")

    def test_absolute_cap(self):
        t = Threshold(absolute=1, relative=1.0, min_length=1)
        assert t.links("abcdef", "abcdeg")
        assert not t.links("abcdef", "abcdgh")

    def test_relative_cap(self):
        t = Threshold(absolute=10, relative=0.1, min_length=1)
        # distance 2 over length 12 is 0.166, above the 0.1 ceiling
        assert not t.links("abcdefghijkl", "abcdefghijxy")
        assert t.links("abcdefghijkl", "abcdefghijkx")

    def test_landau_variants_all_link(self):
        variants = [
            "landau-ginzburg-devonshire",
            "landau-ginsburg-devonshire",
            "landau-ginsberg-devonshire",
        ]
        for i, a in enumerate(variants):
            for b in variants[i + 1 :]:
                assert DEFAULT_THRESHOLD.links(a, b), (a, b)

    def test_identical_labels_link(self):
        assert DEFAULT_THRESHOLD.links("milling", "milling")


class TestClusterVariants:
    def test_landau_variants_form_one_cluster(self):
        labels = [
            "landau-ginzburg-devonshire",
            "landau-ginsburg-devonshire",
            "landau-ginsberg-devonshire",
        ]
        clusters = cluster_variants(labels)
        assert len(clusters) == 1
        assert len(clusters[0].members) == 3

    def test_distant_labels_stay_apart(self):
        clusters = cluster_variants(["milling", "casting", "welding process"])
        assert len(clusters) == 3

    def test_representative_prefers_frequency(self):
        labels = ["vulcanization", "vulcanisation", "vulcanization"]
        (cluster,) = cluster_variants(labels)
        assert cluster.representative == "vulcanization"

    def test_representative_ties_break_lexicographically(self):
        (cluster,) = cluster_variants(["vulcanization", "vulcanisation"])
        assert cluster.representative == "vulcanisation"

    def test_transitive_chaining(self):
        # a-b and b-c within threshold pulls all three together even if
        # a-c alone would not link
        labels = ["abcdefgh", "abcdefxh", "abcdyfxh"]
        assert levenshtein("abcdefgh", "abcdyfxh") == 2
        clusters = cluster_variants(labels)
        assert len(clusters) == 1


class TestVocabulary:
    def test_ingest_keyword_file_folds_variants(self):
        lines = (FIXTURES / "keywords_50.txt").read_text().splitlines()
        assert len(lines) == 50
        vocab = ingest_term_list(lines, source=SourceTag.KEYWORDS)
        # 42 distinct terms plus four spelling pairs fold to 46
        assert len(vocab.terms) == 46
        assert vocab.source_counts[SourceTag.KEYWORDS] == 50
        assert vocab.canonical_of("aluminum alloy") == "aluminium alloy"
        assert vocab.canonical_of("fibre reinforcement") == "fiber reinforcement"
        assert (
            vocab.canonical_of("Landau-Ginzburg-Devonshire")
            == "landau-ginsberg-devonshire"
        )

    def test_blank_and_comment_lines_skipped(self):
        vocab = ingest_term_list(
            ["# heading", "", "milling", "  ", "casting"],
            source=SourceTag.INDEX_WORDS,
        )
        assert sorted(vocab.terms) == ["casting", "milling"]
        assert vocab.source_counts[SourceTag.INDEX_WORDS] == 2

    def test_duplicate_lines_count_once(self):
        vocab = ingest_term_list(
            ["milling", "Milling", "MILLING"], source=SourceTag.MANUAL
        )
        assert sorted(vocab.terms) == ["milling"]

    def test_second_ingest_attaches_to_existing_terms(self):
        vocab = ingest_term_list(["vulcanization"], source=SourceTag.KEYWORDS)
        ingest_term_list(
            ["vulcanisation", "milling"], source=SourceTag.NER_OUTPUT, vocab=vocab
        )
        assert sorted(vocab.terms) == ["milling", "vulcanization"]
        assert vocab.canonical_of("vulcanisation") == "vulcanization"
        assert vocab.source_counts[SourceTag.KEYWORDS] == 1
        assert vocab.source_counts[SourceTag.NER_OUTPUT] == 2

    def test_contains_checks_variants_too(self):
        vocab = ingest_term_list(
            ["vulcanization", "vulcanisation"], source=SourceTag.KEYWORDS
        )
        assert "Vulcanisation" in vocab
        assert "extrusion" not in vocab

    def test_round_trip(self, tmp_path):
        vocab = ingest_term_list(
            ["vulcanization", "vulcanisation", "milling"],
            source=SourceTag.KEYWORDS,
        )
        path = tmp_path / "vocab.json"
        vocab.save(path)
        loaded = Vocabulary.load(path)
        assert loaded.terms == vocab.terms
        assert loaded.variant_map == vocab.variant_map
        assert loaded.source_counts == vocab.source_counts
