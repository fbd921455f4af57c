"""Encoding interaction: cross-applied self-attention with residual
self-loops, iterated with a per-iteration GCN + BiLSTM refresh of the
particular branch. The basic branch's final state is the module output.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .encoders import BiLSTMEncoder, GcnStack
from .errors import ConfigError, DataError


def attention_scores(h: torch.Tensor, heads: int = 1) -> torch.Tensor:
    """Row-wise softmax of the Gram matrix h h^T (unscaled, no projections).

    With heads > 1, the feature axis is chunked, one map computed per chunk,
    and the maps averaged; rows still sum to 1.
    """
    if heads == 1:
        return torch.softmax(h @ h.T, dim=-1)
    if h.shape[1] % heads != 0:
        raise ConfigError(f"width {h.shape[1]} not divisible by {heads} heads")
    maps = [torch.softmax(c @ c.T, dim=-1) for c in h.chunk(heads, dim=1)]
    return torch.stack(maps).mean(dim=0)


@dataclass
class AttentionMaps:
    alpha_b: torch.Tensor  # n x n, from the basic branch
    alpha_p: torch.Tensor  # n x n, from the particular branch


def interact_once(
    h_b: torch.Tensor,
    h_p: torch.Tensor,
    maps: AttentionMaps,
    dropout_rate: float = 0.0,
    training: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One cross-attention exchange: each branch is mixed by the opposing
    map, dropout-masked, and added back onto itself."""
    if maps.alpha_p.shape[0] != h_b.shape[0] or maps.alpha_b.shape[0] != h_p.shape[0]:
        raise DataError("attention maps do not match state row counts")
    h_b_new = F.dropout(maps.alpha_p @ h_b, p=dropout_rate, training=training) + h_b
    h_p_new = F.dropout(maps.alpha_b @ h_p, p=dropout_rate, training=training) + h_p
    return h_b_new, h_p_new


class InteractionLayer(nn.Module):
    """One iteration: attention exchange, then GCN + BiLSTM refresh of the
    particular branch. The refresh submodules are plain attributes so tests
    can substitute identities."""

    def __init__(self, d_l: int, gcn_layers: int, dropout: float, heads: int = 1):
        super().__init__()
        self.dropout = dropout
        self.heads = heads
        self.gcn = GcnStack(d_l, gcn_layers)
        self.lstm = BiLSTMEncoder(d_l, d_l)

    def forward(self, h_b, h_p, norm_adj):
        maps = AttentionMaps(
            alpha_b=attention_scores(h_b, self.heads),
            alpha_p=attention_scores(h_p, self.heads),
        )
        h_b_new, h_p_mixed = interact_once(
            h_b, h_p, maps, dropout_rate=self.dropout, training=self.training
        )
        h_p_new = self.lstm(self.gcn(h_p_mixed, norm_adj))
        return h_b_new, h_p_new


class InteractionStack(nn.Module):
    """L interaction iterations; returns the basic branch after the last."""

    def __init__(
        self,
        d_l: int,
        iterations: int,
        gcn_layers: int,
        dropout: float,
        heads: int = 1,
        share_weights: bool = False,
    ):
        super().__init__()
        if iterations < 1:
            raise ConfigError(f"interaction iterations must be >= 1, got {iterations}")
        if share_weights:
            layer = InteractionLayer(d_l, gcn_layers, dropout, heads)
            layers = [layer] * iterations
        else:
            layers = [
                InteractionLayer(d_l, gcn_layers, dropout, heads)
                for _ in range(iterations)
            ]
        self.layers = nn.ModuleList(layers)

    def forward(self, h_b: torch.Tensor, h_p: torch.Tensor, norm_adj: torch.Tensor):
        for layer in self.layers:
            h_b, h_p = layer(h_b, h_p, norm_adj)
        return h_b
