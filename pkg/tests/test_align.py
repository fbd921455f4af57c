import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from aste_dual.align import AlignmentMap, pool_subwords, tokenize_with_alignment
from aste_dual.errors import AlignmentError
from aste_dual.pretrained import ChunkTokenizer


class VocabTokenizer:
    """Dictionary-backed tokenizer for exact span scenarios."""

    start_id = 0
    end_id = 1
    unk_id = 2
    max_subwords = 64

    def __init__(self, table):
        self.table = table

    def subword_ids(self, word):
        return list(self.table[word])


class TestTokenizeWithAlignment:
    def test_single_word_single_subword(self):
        tok = VocabTokenizer({"good": [7]})
        ids, amap = tokenize_with_alignment(["good"], tok)
        assert ids == [0, 7, 1]
        assert amap.spans == ((0, 0),)

    def test_single_word_three_subwords(self):
        tok = VocabTokenizer({"playability": [5, 6, 7]})
        ids, amap = tokenize_with_alignment(["playability"], tok)
        assert ids == [0, 5, 6, 7, 1]
        assert amap.spans == ((0, 2),)

    def test_two_one_subword_words(self):
        tok = VocabTokenizer({"wine": [3], "list": [4]})
        ids, amap = tokenize_with_alignment(["wine", "list"], tok)
        assert amap.spans == ((0, 0), (1, 1))

    def test_empty_tokenization_substitutes_unk(self, caplog):
        tok = VocabTokenizer({"x": []})
        with caplog.at_level("WARNING"):
            ids, amap = tokenize_with_alignment(["x"], tok)
        assert ids == [0, 2, 1]
        assert amap.spans == ((0, 0),)
        assert "no subwords" in caplog.text

    def test_length_limit_enforced(self):
        tok = VocabTokenizer({"w": [5, 6]})
        tok.max_subwords = 5
        with pytest.raises(AlignmentError, match="limit"):
            tokenize_with_alignment(["w", "w"], tok)

    def test_empty_sentence_rejected(self):
        with pytest.raises(AlignmentError):
            tokenize_with_alignment([], VocabTokenizer({}))

    def test_chunk_tokenizer_covers_word(self):
        tok = ChunkTokenizer()
        ids, amap = tokenize_with_alignment(["playability"], tok)
        assert amap.spans == ((0, 2),)  # 11 chars in 4-char chunks
        assert "".join(tok.pieces("playability")) == "playability"


class TestAlignmentMap:
    def test_rejects_gap(self):
        with pytest.raises(AlignmentError):
            AlignmentMap(spans=((0, 0), (2, 3)))

    def test_rejects_overlap(self):
        with pytest.raises(AlignmentError):
            AlignmentMap(spans=((0, 1), (1, 2)))

    def test_rejects_inverted(self):
        with pytest.raises(AlignmentError):
            AlignmentMap(spans=((1, 0),))


class TestPoolSubwords:
    def test_single_span_identity(self):
        amap = AlignmentMap(spans=((0, 0),))
        states = torch.tensor([[1.0, 2.0]])
        assert torch.equal(pool_subwords(states, amap), states)

    def test_two_point_mean(self):
        amap = AlignmentMap(spans=((0, 1),))
        states = torch.tensor([[1.0, 3.0], [3.0, 5.0]])
        assert torch.allclose(pool_subwords(states, amap), torch.tensor([[2.0, 4.0]]))

    def test_marker_rows_dropped(self):
        amap = AlignmentMap(spans=((0, 1), (2, 3), (4, 4)), leading=1, trailing=1)
        states = torch.randn(7, 3)
        out = pool_subwords(states, amap)
        assert out.shape == (3, 3)
        assert torch.allclose(out[2], states[5])

    def test_row_count_mismatch(self):
        amap = AlignmentMap(spans=((0, 0),), leading=1, trailing=1)
        with pytest.raises(AlignmentError):
            pool_subwords(torch.randn(5, 2), amap)


@st.composite
def alignment_cases(draw):
    n_words = draw(st.integers(1, 6))
    sizes = [draw(st.integers(1, 3)) for _ in range(n_words)]
    spans = []
    cursor = 0
    for size in sizes:
        spans.append((cursor, cursor + size - 1))
        cursor += size
    return AlignmentMap(spans=tuple(spans), leading=1, trailing=1), cursor


@given(alignment_cases(), st.integers(0, 2**32 - 1))
@settings(max_examples=100)
def test_pooling_row_count_and_permutation_equivariance(case, seed):
    amap, n_subwords = case
    gen = torch.Generator().manual_seed(seed)
    states = torch.randn(n_subwords + 2, 4, generator=gen, dtype=torch.float64)
    out = pool_subwords(states, amap)
    assert out.shape == (amap.n_words, 4)
    # permuting span order permutes output rows identically
    perm = torch.randperm(amap.n_words, generator=gen).tolist()
    permuted = AlignmentMap.__new__(AlignmentMap)
    object.__setattr__(permuted, "spans", tuple(amap.spans[i] for i in perm))
    object.__setattr__(permuted, "leading", 1)
    object.__setattr__(permuted, "trailing", 1)
    out_perm = torch.stack([out[i] for i in perm])
    pooled = torch.stack(
        [states[1 + i : 1 + j + 1].mean(dim=0) for i, j in permuted.spans]
    )
    assert torch.allclose(pooled, out_perm)


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=100)
def test_one_subword_per_word_is_marker_stripped_identity(n, seed):
    amap = AlignmentMap(spans=tuple((i, i) for i in range(n)), leading=1, trailing=1)
    gen = torch.Generator().manual_seed(seed)
    states = torch.randn(n + 2, 3, generator=gen, dtype=torch.float64)
    assert torch.equal(pool_subwords(states, amap), states[1:-1])
