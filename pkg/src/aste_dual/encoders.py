"""Particular context encoder: 3-domain embeddings -> BiLSTM -> dependency GCN.

The word-vector tables (general-domain and review-domain) are frozen inputs
loaded from text files; only the 5-way POS embedding is learnable. The GCN
layer recursion is

    h = relu(normalized_adjacency @ h @ W)

with dimension-preserving per-layer weights and no bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .corpus import PosClass
from .errors import ConfigError, DataError


@dataclass
class EmbeddingTable:
    """Frozen token -> vector lookup with a shared unknown row."""

    vocab: dict[str, int]
    vectors: np.ndarray  # |v| x dim, unk row included
    dim: int
    unk_index: int

    def index(self, token: str) -> int:
        idx = self.vocab.get(token)
        if idx is None:
            idx = self.vocab.get(token.lower(), self.unk_index)
        return idx

    def row(self, token: str) -> np.ndarray:
        return self.vectors[self.index(token)]

    @classmethod
    def from_pairs(cls, pairs) -> "EmbeddingTable":
        """pairs: iterable of (token, vector). Unk row = mean of all rows."""
        vocab, rows = {}, []
        for token, vec in pairs:
            if token in vocab:
                continue
            vocab[token] = len(rows)
            rows.append(np.asarray(vec, dtype=np.float32))
        if not rows:
            raise DataError("embedding table is empty")
        dim = rows[0].shape[0]
        unk = np.mean(rows, axis=0)
        vectors = np.vstack(rows + [unk])
        return cls(vocab=vocab, vectors=vectors, dim=dim, unk_index=len(rows))


def load_embedding_file(path) -> EmbeddingTable:
    """Read `token v_1 ... v_d` lines; d is inferred from the first row."""
    pairs = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                if not line.strip():
                    continue
                raise DataError(f"{path}: line {line_no}: no vector components")
            token, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
            elif len(comps) != dim:
                raise DataError(
                    f"{path}: line {line_no}: expected {dim} components, got {len(comps)}"
                )
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float32)
            except ValueError as exc:
                raise DataError(f"{path}: line {line_no}: {exc}") from None
            pairs.append((token, vec))
    return EmbeddingTable.from_pairs(pairs)


def embed_3domain(
    tokens,
    pos,
    general: EmbeddingTable,
    specific: EmbeddingTable,
    pos_matrix: torch.Tensor,
) -> torch.Tensor:
    """Concatenate general, review-domain, and POS embeddings per word.

    ``pos_matrix`` is the 5 x d_p learnable table; gradients flow through it.
    """
    if len(tokens) != len(pos):
        raise DataError(f"{len(tokens)} tokens but {len(pos)} POS tags")
    dtype, device = pos_matrix.dtype, pos_matrix.device
    g = torch.as_tensor(
        np.stack([general.row(t) for t in tokens]), dtype=dtype, device=device
    )
    s = torch.as_tensor(
        np.stack([specific.row(t) for t in tokens]), dtype=dtype, device=device
    )
    pos_ids = torch.as_tensor([int(p) for p in pos], dtype=torch.long, device=device)
    return torch.cat([g, s, pos_matrix[pos_ids]], dim=1)


class Embedding3Domain(nn.Module):
    """3-domain embedding layer. ``single_embedding`` keeps only the
    general-domain block (width d_g, no learnable POS table)."""

    def __init__(
        self,
        general: EmbeddingTable,
        specific: EmbeddingTable | None,
        d_p: int,
        single_embedding: bool = False,
    ):
        super().__init__()
        self.general = general
        self.specific = specific
        self.single_embedding = single_embedding
        if single_embedding:
            self.out_dim = general.dim
        else:
            if specific is None:
                raise ConfigError("3-domain embedding needs the review-domain table")
            self.pos_table = nn.Parameter(torch.empty(len(PosClass), d_p))
            nn.init.normal_(self.pos_table, std=0.1)
            self.out_dim = general.dim + specific.dim + d_p

    def forward(self, tokens, pos) -> torch.Tensor:
        if self.single_embedding:
            ref = next(self.parameters(), None)
            dtype = ref.dtype if ref is not None else torch.float32
            return torch.as_tensor(
                np.stack([self.general.row(t) for t in tokens]), dtype=dtype
            )
        return embed_3domain(tokens, pos, self.general, self.specific, self.pos_table)


class BiLSTMEncoder(nn.Module):
    """Bidirectional LSTM over one sentence; output width d_l (d_l/2 per
    direction)."""

    def __init__(self, input_dim: int, d_l: int):
        super().__init__()
        if d_l % 2 != 0:
            raise ConfigError(f"d_l={d_l} must be even")
        self.d_l = d_l
        self.lstm = nn.LSTM(
            input_size=input_dim, hidden_size=d_l // 2, bidirectional=True, batch_first=True
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.lstm(x.unsqueeze(0))
        return out.squeeze(0)


class GcnStack(nn.Module):
    """k graph-convolution layers over the normalized dependency adjacency.

    k = 0 is the identity (the GCN-ablated variant).
    """

    def __init__(self, d_l: int, k: int):
        super().__init__()
        if k < 0:
            raise ConfigError(f"layer count must be non-negative, got {k}")
        self.linears = nn.ModuleList(
            [nn.Linear(d_l, d_l, bias=False) for _ in range(k)]
        )

    def forward(self, h: torch.Tensor, norm_adj: torch.Tensor) -> torch.Tensor:
        if norm_adj.shape[0] != h.shape[0]:
            raise DataError(
                f"graph over {norm_adj.shape[0]} nodes but {h.shape[0]} word states"
            )
        for linear in self.linears:
            h = torch.relu(norm_adj @ linear(h))
        return h


class ParticularEncoder(nn.Module):
    """embed_3domain -> BiLSTM -> GCN stack, returning h_p (n x d_l)."""

    def __init__(
        self,
        general: EmbeddingTable,
        specific: EmbeddingTable | None,
        d_p: int,
        d_l: int,
        gcn_layers: int,
        single_embedding: bool = False,
    ):
        super().__init__()
        self.embedding = Embedding3Domain(
            general, specific, d_p, single_embedding=single_embedding
        )
        self.lstm = BiLSTMEncoder(self.embedding.out_dim, d_l)
        self.gcn = GcnStack(d_l, gcn_layers)

    def forward(self, tokens, pos, norm_adj: torch.Tensor) -> torch.Tensor:
        ref = next(self.lstm.parameters())
        embedded = self.embedding(tokens, pos).to(ref.dtype)
        x = self.lstm(embedded)
        return self.gcn(x, norm_adj)
