import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aste_dual.corpus import (
    AnnotatedSentence,
    GoldTriplet,
    PosClass,
    Sentence,
    Sentiment,
    build_dependency_graph,
    map_pos_tag,
    merge_annotations,
    parse_aste_file,
    serialize_aste,
)
from aste_dual.errors import AlignmentError, CorpusParseError, DataError, GraphError


class TestParse:
    def test_keyboard_example(self):
        sents = parse_aste_file("The keyboard is comfortable .####[([1], [3], 'POS')]")
        assert len(sents) == 1
        s = sents[0]
        assert s.tokens == ("The", "keyboard", "is", "comfortable", ".")
        assert s.gold == (GoldTriplet((1, 1), (3, 3), Sentiment.POS),)

    def test_wine_list_example(self):
        sents = parse_aste_file("The wine list is very good .####[([0,1,2], [4,5], 'POS')]")
        t = sents[0].gold[0]
        assert t.aspect == (0, 2)
        assert t.opinion == (4, 5)
        assert t.sentiment == Sentiment.POS

    def test_empty_triplet_list(self):
        sents = parse_aste_file("ok .####[]")
        assert len(sents) == 1
        assert sents[0].gold == ()

    def test_multiple_triplets(self):
        text = "The wine list is very good but the price is high .####" \
               "[([0,1,2], [4,5], 'POS'), ([8], [10], 'NEG')]"
        sents = parse_aste_file(text)
        assert len(sents[0].gold) == 2

    def test_blank_lines_skipped(self):
        sents = parse_aste_file("\nok .####[]\n\nfine .####[]\n")
        assert [s.id for s in sents] == ["s-0000", "s-0001"]

    def test_missing_separator(self):
        with pytest.raises(CorpusParseError, match="line 1"):
            parse_aste_file("no separator here")

    def test_malformed_triplets(self):
        with pytest.raises(CorpusParseError, match="line 2"):
            parse_aste_file("ok .####[]\nbad .####[([0], [1], 'POS'")

    def test_non_contiguous_indices(self):
        with pytest.raises(CorpusParseError, match="non-contiguous"):
            parse_aste_file("a b c d .####[([0, 2], [3], 'POS')]")

    def test_index_out_of_range(self):
        with pytest.raises(CorpusParseError, match="out of range"):
            parse_aste_file("a b .####[([0], [5], 'POS')]")

    def test_overlapping_spans_rejected(self):
        with pytest.raises(CorpusParseError, match="overlaps"):
            parse_aste_file("a b c .####[([0, 1], [1, 2], 'POS')]")

    def test_unknown_sentiment(self):
        with pytest.raises(CorpusParseError):
            parse_aste_file("a b .####[([0], [1], 'MEH')]")

    def test_roundtrip_identity(self):
        text = (
            "The keyboard is comfortable .####[([1], [3], 'POS')]\n"
            "ok .####[]\n"
            "The wine list is very good .####[([0, 1, 2], [4, 5], 'POS')]\n"
        )
        once = parse_aste_file(text)
        again = parse_aste_file(serialize_aste(once))
        assert [s.tokens for s in again] == [s.tokens for s in once]
        assert [s.gold for s in again] == [s.gold for s in once]


triplet_lists = st.integers(min_value=2, max_value=8).flatmap(
    lambda n: st.lists(
        st.tuples(
            st.integers(0, n - 1),
            st.integers(0, n - 1),
            st.integers(0, n - 1),
            st.integers(0, n - 1),
            st.sampled_from(list(Sentiment)),
        ).map(
            lambda t: (
                (min(t[0], t[1]), max(t[0], t[1])),
                (min(t[2], t[3]), max(t[2], t[3])),
                t[4],
            )
        ).filter(lambda t: t[0][1] < t[1][0] or t[1][1] < t[0][0]),
        max_size=4,
    ).map(lambda ts: (n, ts))
)


@given(triplet_lists)
@settings(max_examples=200)
def test_serialize_parse_roundtrip_random(case):
    n, ts = case
    regions = {}
    triplets = []
    for aspect, opinion, sentiment in ts:
        key = (aspect, opinion)
        if key in regions:
            continue
        regions[key] = sentiment
        triplets.append(GoldTriplet(aspect, opinion, sentiment))
    sent = AnnotatedSentence(
        sentence=Sentence(id="x", tokens=tuple(f"w{i}" for i in range(n))),
        gold=tuple(triplets),
    )
    parsed = parse_aste_file(serialize_aste([sent]))
    assert parsed[0].gold == sent.gold
    assert parsed[0].tokens == sent.tokens


class TestPosMapping:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("NOUN", PosClass.NOUN_C),
            ("PROPN", PosClass.NOUN_C),
            ("VERB", PosClass.VERB_C),
            ("AUX", PosClass.VERB_C),
            ("ADJ", PosClass.ADJ_C),
            ("ADV", PosClass.ADV_C),
            ("PUNCT", PosClass.OTHER_C),
            ("DET", PosClass.OTHER_C),
            ("", PosClass.OTHER_C),
            ("whatever", PosClass.OTHER_C),
        ],
    )
    def test_mapping(self, raw, expected):
        assert map_pos_tag(raw) is expected

    def test_five_classes_with_fixed_ordinals(self):
        assert [int(c) for c in PosClass] == [0, 1, 2, 3, 4]


class TestMerge:
    def _sentences(self):
        return parse_aste_file("The keyboard is comfortable .####[([1], [3], 'POS')]")

    def test_matching_merge(self):
        sents = self._sentences()
        rec = {
            "id": "s-0000",
            "tokens": ["The", "keyboard", "is", "comfortable", "."],
            "pos": ["DET", "NOUN", "AUX", "ADJ", "PUNCT"],
            "heads": [1, 3, 3, -1, 3],
        }
        merged = merge_annotations(sents, {"s-0000": rec})
        assert merged[0].pos == (
            PosClass.OTHER_C,
            PosClass.NOUN_C,
            PosClass.VERB_C,
            PosClass.ADJ_C,
            PosClass.OTHER_C,
        )
        assert merged[0].heads == (1, 3, 3, -1, 3)

    def test_token_count_mismatch(self):
        sents = self._sentences()
        rec = {
            "id": "s-0000",
            "tokens": ["The", "keyboard", "is", "comfortable", "."],
            "pos": ["DET", "NOUN", "AUX", "ADJ"],
            "heads": [1, 3, 3, -1, 3],
        }
        with pytest.raises(AlignmentError, match="s-0000"):
            merge_annotations(sents, {"s-0000": rec})

    def test_missing_id(self):
        with pytest.raises(AlignmentError, match="s-0000"):
            merge_annotations(self._sentences(), {})

    def test_token_text_mismatch(self):
        sents = self._sentences()
        rec = {
            "id": "s-0000",
            "tokens": ["The", "KEYBOARD", "is", "comfortable", "."],
            "pos": ["DET", "NOUN", "AUX", "ADJ", "PUNCT"],
            "heads": [1, 3, 3, -1, 3],
        }
        with pytest.raises(AlignmentError, match="differ"):
            merge_annotations(sents, {"s-0000": rec})


class TestDependencyGraph:
    def test_two_node_chain(self):
        g = build_dependency_graph([-1, 0], 2)
        assert g.adjacency.tolist() == [[1, 1], [1, 1]]
        assert np.allclose(np.diag(g.degree), [2, 2])
        assert np.allclose(g.normalized, [[0.5, 0.5], [0.5, 0.5]])

    def test_single_node(self):
        g = build_dependency_graph([-1], 1)
        assert g.adjacency.tolist() == [[1]]
        assert np.allclose(g.normalized, [[1.0]])

    def test_three_node_star_eigenvalues(self):
        g = build_dependency_graph([1, -1, 1], 3)
        assert g.adjacency.sum(axis=1).tolist() == [2, 3, 2]
        assert np.allclose(g.normalized, g.normalized.T)
        eig = np.linalg.eigvalsh(g.normalized)
        assert eig.max() <= 1 + 1e-12
        assert eig.min() >= -1 - 1e-12

    def test_no_self_loops_flag(self):
        g = build_dependency_graph([-1, 0], 2, self_loops=False)
        assert g.adjacency.tolist() == [[0, 1], [1, 0]]

    def test_no_self_loops_isolated_node_fails(self):
        with pytest.raises(GraphError, match="isolated"):
            build_dependency_graph([-1], 1, self_loops=False)

    def test_cycle_detected(self):
        with pytest.raises(GraphError, match="cycle"):
            build_dependency_graph([-1, 2, 1], 3)

    def test_self_head_rejected(self):
        with pytest.raises(GraphError):
            build_dependency_graph([-1, 1], 2)

    def test_zero_nodes(self):
        with pytest.raises(GraphError):
            build_dependency_graph([], 0)

    def test_two_roots_rejected(self):
        with pytest.raises(GraphError, match="root"):
            build_dependency_graph([-1, -1], 2)


@st.composite
def random_trees(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    # random attachment, then relabel with a random permutation
    parents = [-1] + [draw(st.integers(0, i - 1)) for i in range(1, n)]
    perm = draw(st.permutations(list(range(n))))
    heads = [0] * n
    for i, p in enumerate(parents):
        heads[perm[i]] = -1 if p == -1 else perm[p]
    return heads, n


@given(random_trees())
@settings(max_examples=200)
def test_random_tree_graph_properties(case):
    heads, n = case
    g = build_dependency_graph(heads, n)
    assert np.array_equal(g.adjacency, g.adjacency.T)
    assert np.all(np.diag(g.degree) > 0)
    assert np.max(np.abs(g.normalized - g.normalized.T)) < 1e-12
    # undirected edges doubled plus self-loops
    assert g.adjacency.sum() == 2 * (n - 1) + n
    eig = np.linalg.eigvalsh(g.normalized)
    assert np.max(np.abs(eig)) <= 1 + 1e-9


class TestInvariants:
    def test_sentence_rejects_whitespace_token(self):
        with pytest.raises(DataError):
            Sentence(id="x", tokens=("a b",))

    def test_sentence_rejects_empty(self):
        with pytest.raises(DataError):
            Sentence(id="x", tokens=())

    def test_annotated_sentence_validates_roots(self):
        s = AnnotatedSentence(
            sentence=Sentence(id="x", tokens=("a", "b")),
            pos=(PosClass.OTHER_C, PosClass.OTHER_C),
            heads=(1, 0),
        )
        with pytest.raises(GraphError):
            s.validate()
